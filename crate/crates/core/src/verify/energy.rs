//! A priori estimates `|u| <= C (|u_0| + |f|)` measured over random data.
//!
//! The modes of the diagonal model decouple, so the constant of an
//! `n`-mode truncation is the largest single-mode constant below `n`; random
//! three-mode samples are added on top as a check of that reduction.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::embeddings::LevelSet;
use super::scenario::demo_triple;
use super::tolerances::ENERGY_DRIFT;
use super::{drift, CheckReport};
use crate::error::{invalid, Result};
use crate::problems::{make_diagonal_heat, Perturbation, PerturbationComponent, Problem, Profile, Slot, TimeFunction};
use crate::solver::{mixed_scale_solve, picard_solve, r1_solve, semigroup_mild_solve, AuxChoice, BudgetConstants, MildQuadrature, SolverOptions};
use crate::spaces::{mr_norm, quad, rung_norm, trace_sup_norm, weighted_lp_norm, GridFunction, HilbertScale, Span, TimeGrid, TraceNorm, TraceSpace};

/// Which estimate is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyCase {
    /// Lower order, `q > p`: `|u|_MR <= C(|u_0|_trace + |f|_{L^p(X_0)})`.
    Perturbed,
    /// Lower order with `q = p`.
    Continuity,
    /// Mixed scale with the sum-space price of the computed decomposition.
    MixedScale,
    /// [`EnergyCase::MixedScale`] on the first partition interval only.
    MixedLocal,
    /// Trace-valued perturbation with `L^1`-in-time trace data.
    Transference,
    /// Mild solution of the autonomous problem with `L^1` trace data.
    Mild,
}

impl EnergyCase {
    pub const ALL: [EnergyCase; 6] = [
        EnergyCase::Perturbed,
        EnergyCase::Continuity,
        EnergyCase::MixedScale,
        EnergyCase::MixedLocal,
        EnergyCase::Transference,
        EnergyCase::Mild,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnergyCase::Perturbed => "perturbed",
            EnergyCase::Continuity => "continuity",
            EnergyCase::MixedScale => "mixed_scale",
            EnergyCase::MixedLocal => "mixed_local",
            EnergyCase::Transference => "transference",
            EnergyCase::Mild => "mild",
        }
    }
}

/// Spectral truncations, grid levels and data seeds of an energy check.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyConfig {
    pub dims: Vec<usize>,
    pub levels: LevelSet,
    pub seeds: Vec<u64>,
    /// Random three-mode samples per truncation, level and seed.
    pub combos: usize,
    pub horizon: f64,
    /// Widest spike of the spike test; it is halved four times.
    pub spike_width: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self { dims: vec![16, 32, 64, 128], levels: LevelSet::default(), seeds: vec![1, 2, 3], combos: 4, horizon: 1.0, spike_width: 1.0 / 1024.0 }
    }
}

fn base_problem(case: EnergyCase, n: usize) -> Result<Problem> {
    let (a, scale) = make_diagonal_heat(n, 1.0)?;
    let zero = TimeFunction::zero(n);
    let slot = |r: f64, gamma: f64| Slot { f: zero.clone(), r, nu: 0.0, gamma };
    let (p, b, f) = match case {
        EnergyCase::Perturbed => {
            let c = PerturbationComponent::lower_order(4.0, Profile::power(0.5, 0.125), 1.0)?;
            (2.0, Perturbation::single(c), vec![slot(2.0, 0.0)])
        }
        EnergyCase::Continuity => {
            let c = PerturbationComponent::lower_order(2.0, Profile::power(0.5, 0.25), 1.0)?;
            (2.0, Perturbation::single(c), vec![slot(2.0, 0.0)])
        }
        EnergyCase::MixedScale | EnergyCase::MixedLocal => {
            let c = PerturbationComponent::mixed(demo_triple(), Profile::power(1.0, 0.25), 1.0)?;
            (4.0, Perturbation::single(c), vec![slot(4.0, 0.0), slot(4.0 / 3.0, 0.5)])
        }
        EnergyCase::Transference => {
            let c = PerturbationComponent::trace_valued(2.0, Profile::power(0.5, 0.25), 1.0)?;
            (2.0, Perturbation::single(c), vec![slot(2.0, 0.0), slot(1.0, 0.5)])
        }
        EnergyCase::Mild => (2.0, Perturbation::none(), vec![slot(1.0, 0.5)]),
    };
    Ok(Problem { scale, a, b, f, u0: vec![0.0; n], p, kappa: 0.0 })
}

fn initial_norm(problem: &Problem) -> Result<TraceNorm> {
    let level = 1.0 - (1.0 + problem.kappa) / problem.p;
    TraceNorm::new(TraceSpace::RealInterp { level, q: problem.p }, &problem.scale)
}

/// Whether slot `k` is an `L^1`-in-time trace-space slot.
fn is_trace_slot(case: EnergyCase, k: usize) -> bool {
    matches!((case, k), (EnergyCase::Transference, 1) | (EnergyCase::Mild, 0))
}

/// `∫_0^b |f(t)|` in the norm `norm`: exact for a single term, otherwise
/// three Gauss points on each of 256 equal cells (smooth data only).
fn trace_l1(f: &TimeFunction, b: f64, norm: &TraceNorm) -> Result<f64> {
    let live: Vec<&(Profile, Vec<f64>)> = f.terms.iter().filter(|(_, v)| v.iter().any(|x| *x != 0.0)).collect();
    if f.cells.is_none() && live.len() <= 1 {
        return match live.first() {
            None => Ok(0.0),
            Some((p, v)) => Ok(norm.norm(v) * p.weighted_norm(0.0, b, 1.0, 0.0)?),
        };
    }
    let grid = TimeGrid::graded(b, 256, 1.0)?;
    let nodes = grid.nodes();
    let mut s = 0.0;
    for j in 0..grid.cells() {
        let w = quad::weighted_gauss3(nodes[j], nodes[j + 1], 0.0);
        for (k, t) in quad::gauss3_points(nodes[j], nodes[j + 1]).into_iter().enumerate() {
            s += w[k] * norm.norm(&f.eval(t));
        }
    }
    Ok(s)
}

fn slot_norm(case: EnergyCase, problem: &Problem, k: usize, b: f64) -> Result<f64> {
    let s = &problem.f[k];
    if is_trace_slot(case, k) {
        let norm = TraceNorm::new(TraceSpace::RealInterp { level: s.gamma, q: problem.p }, &problem.scale)?;
        trace_l1(&s.f, b, &norm)
    } else {
        s.f.weighted_norm(0.0, b, s.r, s.nu, s.gamma, &problem.scale)
    }
}

fn smooth(dim: usize, rng: &mut ChaCha8Rng) -> Result<TimeFunction> {
    let mut f = TimeFunction::zero(dim);
    for _ in 0..3 {
        let freq = rng.random_range(0.2..3.0);
        let mean = rng.random_range(-1.0..1.0);
        let coeffs = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        f = f.plus(TimeFunction::term(Profile::Sine { mean, amp: 1.0, freq }, coeffs))?;
    }
    Ok(f)
}

/// Which data pieces a sample carries.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Direction {
    /// Only the initial value, normalised.
    Initial,
    /// Only forcing slot `k`, normalised.
    Slot(usize),
    /// Every piece normalised and weighted in `[0, 1)`.
    Mix,
}

fn directions(problem: &Problem) -> Vec<Direction> {
    let mut out = vec![Direction::Initial];
    out.extend((0..problem.f.len()).map(Direction::Slot));
    out.push(Direction::Mix);
    out
}

/// Random data along `dir`.
fn fill(case: EnergyCase, mut problem: Problem, horizon: f64, dir: Direction, rng: &mut ChaCha8Rng) -> Result<Problem> {
    let n = problem.scale.dim();
    let weight = |piece: Direction, rng: &mut ChaCha8Rng| -> f64 {
        match dir {
            Direction::Mix => rng.random_range(0.0..1.0),
            d if d == piece => 1.0,
            _ => 0.0,
        }
    };
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let zn = initial_norm(&problem)?.norm(&z);
    let w = weight(Direction::Initial, rng);
    problem.u0 = z.iter().map(|x| w * x / zn).collect();
    for k in 0..problem.f.len() {
        let w = weight(Direction::Slot(k), rng);
        if w == 0.0 {
            problem.f[k].f = TimeFunction::zero(n);
            continue;
        }
        problem.f[k].f = smooth(n, rng)?;
        let norm = slot_norm(case, &problem, k, horizon)?;
        problem.f[k].f = problem.f[k].f.clone().scaled(w / norm);
    }
    Ok(problem)
}

fn ep_norm(u: &GridFunction, p: f64, scale: &HilbertScale, span: Span) -> Result<f64> {
    let trace = TraceNorm::new(TraceSpace::RealInterp { level: 1.0 - 1.0 / p, q: p }, scale)?;
    Ok(weighted_lp_norm(u, p, 0.0, 1.0, scale, span)?.max(trace_sup_norm(u, 0.0, &trace, span)))
}

fn component<'a>(parts: &'a [(String, GridFunction)], name: &str) -> Result<&'a GridFunction> {
    match parts.iter().find(|(n, _)| n == name) {
        Some((_, g)) => Ok(g),
        None => invalid(format!("solve report has no component {name}")),
    }
}

/// `(left, right)` sides of the estimate for one data sample.
fn measure(case: EnergyCase, problem: &Problem, grid: &TimeGrid) -> Result<(f64, f64)> {
    let opts = SolverOptions::default();
    let (p, kappa) = (problem.p, problem.kappa);
    let scale = &problem.scale;
    let full = Span::full(grid);
    let u0 = initial_norm(problem)?.norm(&problem.u0);
    let t_end = grid.horizon();
    let data = |b: f64| -> Result<f64> {
        let mut s = u0;
        for k in 0..problem.f.len() {
            s += slot_norm(case, problem, k, b)?;
        }
        Ok(s)
    };
    match case {
        EnergyCase::Perturbed | EnergyCase::Continuity => {
            let rep = picard_solve(problem, grid, BudgetConstants { c0: 1.0, m: 1.0 }, &opts)?;
            Ok((mr_norm(&rep.trajectory, p, kappa, scale, full)?, data(t_end)?))
        }
        EnergyCase::MixedScale | EnergyCase::MixedLocal => {
            let rep = mixed_scale_solve(problem, grid, AuxChoice::SameAsA, 1.0, &opts)?;
            let (span, b) = if case == EnergyCase::MixedLocal {
                let k = grid.floor_index(rep.partition[1]).max(1);
                (Span::new(0, k), grid.nodes()[k])
            } else {
                (full, t_end)
            };
            let s1 = &problem.f[1];
            let left = rung_norm(component(&rep.components, "x0_part")?, p, kappa, 0.0, scale, span)?
                + rung_norm(component(&rep.components, "component_1")?, s1.r, s1.nu, s1.gamma, scale, span)?;
            Ok((left, data(b)?))
        }
        EnergyCase::Transference => {
            let rep = r1_solve(problem, grid, None, MildQuadrature::ImplicitEuler, 1.0, &opts)?;
            Ok((ep_norm(&rep.trajectory, p, scale, full)?, data(t_end)?))
        }
        EnergyCase::Mild => {
            let u = semigroup_mild_solve(&problem.a, scale, &problem.f[0].f, &problem.u0, p, grid, MildQuadrature::ExactExponential)?;
            Ok((ep_norm(&u, p, scale, full)?, data(t_end)?))
        }
    }
}

fn ratio((left, right): (f64, f64)) -> f64 {
    if right == 0.0 {
        0.0
    } else {
        left / right
    }
}

fn sample_rng(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (tag << 40) ^ index)
}

/// Largest measured constant per (truncation, level, seed); passes when all
/// of them lie within 15% of each other.
pub fn check_energy_estimates(case: EnergyCase, config: &EnergyConfig) -> Result<CheckReport> {
    let n_max = *config.dims.iter().max().ok_or_else(|| crate::Error::Invalid("no truncations given".into()))?;
    let full = base_problem(case, n_max)?;
    let mut rep = CheckReport::new("energy_estimate");
    rep.param("case", case.name());
    rep.param("p", full.p);
    rep.param("dims", format!("{:?}", config.dims));
    rep.param("per_octave", format!("{:?}", config.levels.per_octave));
    rep.param("seeds", format!("{:?}", config.seeds));
    let mut count = 0;
    for &po in &config.levels.per_octave {
        let grid = TimeGrid::log_graded(config.horizon, po, config.levels.octaves)?;
        for &seed in &config.seeds {
            let mut per_mode = Vec::with_capacity(n_max);
            for i in 0..n_max {
                let mut rng = sample_rng(seed, 1, i as u64);
                let single = full.restrict(&[i])?;
                let mut best = 0.0f64;
                for dir in directions(&single) {
                    let prob = fill(case, single.clone(), config.horizon, dir, &mut rng)?;
                    best = best.max(ratio(measure(case, &prob, &grid)?));
                    count += 1;
                }
                per_mode.push(best);
            }
            for &n in &config.dims {
                let mut best = per_mode[..n].iter().cloned().fold(0.0, f64::max);
                let mut rng = sample_rng(seed, 2, n as u64);
                for _ in 0..config.combos {
                    let mut modes = sample(&mut rng, n, 3.min(n)).into_vec();
                    modes.sort_unstable();
                    let prob = fill(case, full.restrict(&modes)?, config.horizon, Direction::Mix, &mut rng)?;
                    best = best.max(ratio(measure(case, &prob, &grid)?));
                    count += 1;
                }
                rep.push(format!("n={n} per_octave={po} seed={seed}"), best);
            }
        }
    }
    rep.samples = count;
    rep.drift = drift(&rep.ratios);
    rep.stable = rep.drift <= ENERGY_DRIFT;
    rep.pass = rep.stable && rep.ratios_finite();
    Ok(rep)
}

/// Mild solutions with `g = spike(1, w) e_i / |e_i|` and `u_0 = 0` for
/// five widths halving from `config.spike_width`. Constant per width is the largest
/// over modes and levels; passes when it drifts at most 15%.
pub fn check_spike_stability(config: &EnergyConfig) -> Result<CheckReport> {
    let n = config.dims.iter().cloned().min().unwrap_or(16);
    let problem = base_problem(EnergyCase::Mild, n)?;
    let trace = TraceNorm::new(TraceSpace::RealInterp { level: 0.5, q: problem.p }, &problem.scale)?;
    let mut rep = CheckReport::new("spike_stability");
    rep.param("dim", n);
    rep.param("per_octave", format!("{:?}", config.levels.per_octave));
    let grids = config
        .levels
        .per_octave
        .iter()
        .map(|&po| TimeGrid::log_graded(config.horizon, po, config.levels.octaves).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    for k in 0..5 {
        let width = config.spike_width / f64::from(1 << k);
        let mut best = 0.0f64;
        for grid in &grids {
            let mut level_best = 0.0f64;
            for i in 0..n {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e[i] /= trace.norm(&e);
                let g = TimeFunction::term(Profile::spike(1.0, width), e);
                let u = semigroup_mild_solve(&problem.a, &problem.scale, &g, &problem.u0, problem.p, grid, MildQuadrature::ExactExponential)?;
                let left = ep_norm(&u, problem.p, &problem.scale, Span::full(grid))?;
                level_best = level_best.max(left / trace_l1(&g, config.horizon, &trace)?);
                rep.samples += 1;
            }
            rep.series_push(&format!("width={width}"), level_best);
            best = best.max(level_best);
        }
        rep.push(format!("width={width}"), best);
    }
    let all: Vec<f64> = rep.series.values().flatten().cloned().collect();
    rep.drift = drift(&all);
    rep.stable = rep.drift <= ENERGY_DRIFT;
    rep.pass = rep.stable && rep.ratios_finite();
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_data_gives_zero_ratio() {
        let grid = TimeGrid::log_graded(1.0, 4, 8).unwrap();
        for case in EnergyCase::ALL {
            let p = base_problem(case, 2).unwrap();
            let (l, r) = measure(case, &p, &grid).unwrap();
            assert_eq!((l, r), (0.0, 0.0), "{case:?}");
        }
    }

    #[test]
    fn filled_data_has_unit_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = base_problem(EnergyCase::Transference, 3).unwrap();
        let p = fill(EnergyCase::Transference, base.clone(), 1.0, Direction::Mix, &mut rng).unwrap();
        assert!(initial_norm(&p).unwrap().norm(&p.u0) < 1.0);
        for k in 0..2 {
            assert!(slot_norm(EnergyCase::Transference, &p, k, 1.0).unwrap() < 1.0);
        }
        let p = fill(EnergyCase::Transference, base, 1.0, Direction::Slot(1), &mut rng).unwrap();
        assert!(p.u0.iter().all(|x| *x == 0.0) && p.f[0].f.is_zero());
        assert!((slot_norm(EnergyCase::Transference, &p, 1, 1.0).unwrap() - 1.0).abs() < 1e-12);
    }
}
