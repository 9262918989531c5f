//! Interval-by-interval Picard iteration shared by the three solvers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::kernel::{exp_step, march, Implicit};
use super::level::LevelData;
use super::SolverOptions;
use crate::error::{invalid, Error, Result};
use crate::problems::{Op, OperatorFamily};

/// Statistics of one solved interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalStats {
    pub start: f64,
    pub end: f64,
    /// Node indices on the grid the interval was solved on.
    pub first: usize,
    pub last: usize,
    pub iterations: usize,
    /// Largest ratio of successive iterate distances.
    pub contraction: f64,
    /// Successive distance ratios `d_{k+1}/d_k`.
    pub ratios: Vec<f64>,
    /// Depth of adaptive halving that produced this interval.
    pub depth: usize,
}

/// `v ↦ Φ(v)` on the node range `[first, last]`.
pub(crate) trait FixedPointMap {
    type Cache;
    fn level(&self) -> &LevelData<'_>;
    fn prepare(&self, first: usize, last: usize, start: &[f64]) -> Result<Self::Cache>;
    fn apply(&self, cache: &Self::Cache, first: usize, last: usize, start: &[f64], v: &[f64]) -> Result<Vec<f64>>;
    /// Whether `Φ` depends on `v` on this range.
    fn active(&self, first: usize, last: usize) -> bool {
        let lvl = self.level();
        lvl.b_mean.iter().any(|m| m[first..last].iter().any(|x| *x != 0.0))
    }
}

pub(crate) struct LevelOutcome {
    pub values: Vec<f64>,
    pub stats: Vec<IntervalStats>,
}

pub(crate) fn run_level<M: FixedPointMap>(map: &M, cuts: &[usize], opts: &SolverOptions, u0: &[f64]) -> Result<LevelOutcome> {
    let lvl = map.level();
    let dim = lvl.dim;
    let mut values = vec![0.0; dim * lvl.nodes.len()];
    values[..dim].copy_from_slice(u0);
    let mut stats = Vec::new();
    let mut rng = opts.perturbed_start.map(ChaCha8Rng::seed_from_u64);
    for w in cuts.windows(2) {
        solve_interval(map, w[0], w[1], 0, opts, &mut values, &mut stats, &mut rng)?;
    }
    Ok(LevelOutcome { values, stats })
}

#[allow(clippy::too_many_arguments)]
fn solve_interval<M: FixedPointMap>(
    map: &M,
    first: usize,
    last: usize,
    depth: usize,
    opts: &SolverOptions,
    values: &mut [f64],
    stats: &mut Vec<IntervalStats>,
    rng: &mut Option<ChaCha8Rng>,
) -> Result<()> {
    let lvl = map.level();
    let dim = lvl.dim;
    let start = values[first * dim..(first + 1) * dim].to_vec();
    let cache = map.prepare(first, last, &start)?;
    let len = dim * (last - first + 1);
    let (t0, t1) = (lvl.nodes[first], lvl.nodes[last]);
    if !map.active(first, last) {
        let v = map.apply(&cache, first, last, &start, &vec![0.0; len])?;
        values[first * dim..(last + 1) * dim].copy_from_slice(&v);
        stats.push(IntervalStats { start: t0, end: t1, first, last, iterations: 1, contraction: 0.0, ratios: vec![], depth });
        return Ok(());
    }
    let mut v = match rng {
        Some(r) => (0..len).map(|_| StandardNormal.sample(r)).collect(),
        None => vec![0.0; len],
    };
    let mut prev_d: Option<f64> = None;
    let mut ratios = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut failure = String::new();
    for k in 1..=opts.max_iter {
        let w = map.apply(&cache, first, last, &start, &v)?;
        let diff: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a - b).collect();
        let d = lvl.lp_top(first, last, &diff);
        let n = lvl.lp_top(first, last, &w);
        if !d.is_finite() {
            failure = "iterates are not finite".into();
            break;
        }
        if let Some(pd) = prev_d {
            if d > 1e-13 * n && pd > 0.0 {
                ratios.push(d / pd);
            }
        }
        v = w;
        iterations = k;
        if d <= opts.tol * n.max(1.0) {
            converged = true;
            break;
        }
        prev_d = Some(d);
    }
    let contraction = ratios.iter().cloned().fold(0.0, f64::max);
    if converged && contraction <= opts.contraction_cap {
        values[first * dim..(last + 1) * dim].copy_from_slice(&v);
        stats.push(IntervalStats { start: t0, end: t1, first, last, iterations, contraction, ratios, depth });
        return Ok(());
    }
    if failure.is_empty() {
        failure = if converged {
            format!("measured contraction {contraction:.3} above cap {}", opts.contraction_cap)
        } else {
            format!("no convergence in {} iterations", opts.max_iter)
        };
    }
    if depth < opts.max_depth && last - first >= 2 {
        let mid = (first + last) / 2;
        solve_interval(map, first, mid, depth + 1, opts, values, stats, rng)?;
        return solve_interval(map, mid, last, depth + 1, opts, values, stats, rng);
    }
    Err(Error::Contraction { a: t0, b: t1, detail: failure })
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

/// `Φ(v) = ũ + E_A(f - B v)`, with `ũ` the homogeneous continuation.
pub(crate) struct LowerOrderMap<'a> {
    pub lvl: &'a LevelData<'a>,
}

impl FixedPointMap for LowerOrderMap<'_> {
    type Cache = Vec<f64>;

    fn level(&self) -> &LevelData<'_> {
        self.lvl
    }

    fn prepare(&self, first: usize, last: usize, start: &[f64]) -> Result<Vec<f64>> {
        let l = self.lvl;
        let op = Implicit { base: &l.problem.a.base, alpha: &l.a_alpha, extra: None };
        march(&op, &l.nodes, first, last, start, &mut |_, _| {})
    }

    fn apply(&self, cache: &Vec<f64>, first: usize, last: usize, _start: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let l = self.lvl;
        let dim = l.dim;
        let op = Implicit { base: &l.problem.a.base, alpha: &l.a_alpha, extra: None };
        let zero = vec![0.0; dim];
        let mut z = march(&op, &l.nodes, first, last, &zero, &mut |j, buf| {
            l.add_forcing(j, buf);
            let vn = &v[(j + 1 - first) * dim..(j + 2 - first) * dim];
            for i in 0..dim {
                buf[i] -= l.b_diag[j * dim + i] * vn[i];
            }
        })?;
        add_into(&mut z, cache);
        Ok(z)
    }
}

/// Auxiliary operator used on the higher rung for mixed-scale solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxChoice {
    /// `A` itself: the correction term vanishes.
    SameAsA,
    /// Autonomous time average of `A` over `[0, T]`.
    TimeAverage,
}

/// `Φ(v) = ũ + E_A(f_0) + Σ_i (y_i + w_i)` with `y_i = E_aux(f_i - B_i v)`
/// and `w_i = E_A((A_aux - A) y_i)`.
pub(crate) struct MixedMap<'a> {
    pub lvl: &'a LevelData<'a>,
    pub aux_alpha: Vec<f64>,
    pub aux_differs: bool,
}

pub(crate) struct MixedCache {
    pub homogeneous: Vec<f64>,
    pub base_part: Vec<f64>,
}

impl<'a> MixedMap<'a> {
    pub fn new(lvl: &'a LevelData<'a>, aux: AuxChoice) -> Result<Self> {
        if lvl.problem.f.len() > lvl.problem.b.components.len() + 1 {
            return invalid("more inhomogeneity slots than perturbation components plus one");
        }
        let aux_alpha = match aux {
            AuxChoice::SameAsA => lvl.a_alpha.clone(),
            AuxChoice::TimeAverage => {
                let horizon = *lvl.nodes.last().unwrap();
                vec![lvl.problem.a.profile_mean(0.0, horizon); lvl.cells()]
            }
        };
        let aux_differs = aux_alpha.iter().zip(&lvl.a_alpha).any(|(x, y)| x != y);
        Ok(Self { lvl, aux_alpha, aux_differs })
    }

    /// Parts `[u^0, u^1, ...]` of `Φ(v)`: part 0 is the slot 0 response
    /// plus the homogeneous flow of `starts[0]`, part `i` the response to
    /// component `i - 1` plus the flow of `starts[i]`. With `starts` summing
    /// to the interval start value the parts sum to `Φ(v)`.
    pub fn split(&self, cache: &MixedCache, first: usize, last: usize, v: &[f64], starts: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let l = self.lvl;
        let dim = l.dim;
        let zero = vec![0.0; dim];
        let a_op = Implicit { base: &l.problem.a.base, alpha: &l.a_alpha, extra: None };
        let aux_op = Implicit { base: &l.problem.a.base, alpha: &self.aux_alpha, extra: None };
        let flow = |s: &[f64]| -> Result<Vec<f64>> {
            if s.iter().all(|x| *x == 0.0) {
                return Ok(vec![0.0; dim * (last - first + 1)]);
            }
            march(&a_op, &l.nodes, first, last, s, &mut |_, _| {})
        };
        let mut base = cache.base_part.clone();
        add_into(&mut base, &flow(&starts[0])?);
        let mut parts = vec![base];
        for (c, lam) in l.lambdas.iter().enumerate() {
            let slot = l.slot_mean.get(c + 1);
            let bm = &l.b_mean[c];
            let y = march(&aux_op, &l.nodes, first, last, &zero, &mut |j, buf| {
                if let Some(s) = slot {
                    for i in 0..dim {
                        buf[i] += s[j * dim + i];
                    }
                }
                let vn = &v[(j + 1 - first) * dim..(j + 2 - first) * dim];
                for i in 0..dim {
                    buf[i] -= bm[j] * lam[i] * vn[i];
                }
            })?;
            let mut part = y.clone();
            if self.aux_differs {
                let w = march(&a_op, &l.nodes, first, last, &zero, &mut |j, buf| {
                    let yn = &y[(j + 1 - first) * dim..(j + 2 - first) * dim];
                    l.problem.a.base.apply_add(self.aux_alpha[j] - l.a_alpha[j], yn, buf);
                })?;
                add_into(&mut part, &w);
            }
            add_into(&mut part, &flow(&starts[c + 1])?);
            parts.push(part);
        }
        Ok(parts)
    }
}

impl FixedPointMap for MixedMap<'_> {
    type Cache = MixedCache;

    fn level(&self) -> &LevelData<'_> {
        self.lvl
    }

    fn prepare(&self, first: usize, last: usize, start: &[f64]) -> Result<MixedCache> {
        let l = self.lvl;
        let dim = l.dim;
        let op = Implicit { base: &l.problem.a.base, alpha: &l.a_alpha, extra: None };
        let homogeneous = march(&op, &l.nodes, first, last, start, &mut |_, _| {})?;
        let zero = vec![0.0; dim];
        let base_part = match l.slot_mean.first() {
            Some(s) => march(&op, &l.nodes, first, last, &zero, &mut |j, buf| {
                for i in 0..dim {
                    buf[i] += s[j * dim + i];
                }
            })?,
            None => vec![0.0; dim * (last - first + 1)],
        };
        Ok(MixedCache { homogeneous, base_part })
    }

    fn apply(&self, cache: &MixedCache, first: usize, last: usize, _start: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let dim = self.lvl.dim;
        let starts = vec![vec![0.0; dim]; self.lvl.lambdas.len() + 1];
        let parts = self.split(cache, first, last, v, &starts)?;
        let mut out = cache.homogeneous.clone();
        for p in &parts {
            add_into(&mut out, p);
        }
        Ok(out)
    }
}

/// Time discretisation of the semigroup part of trace-valued solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MildQuadrature {
    /// Per-mode exponentials with forcing linear on each cell.
    ExactExponential,
    /// Implicit Euler resolvent steps, matching the other solvers.
    ImplicitEuler,
}

/// `Φ(v) = ṽ + z`: `ṽ` mild solution for `A_0` from the interval start with
/// forcing `g - B v`, and `z' + A z = (A_0 - A) ṽ + h`, `z = 0` at the start.
pub(crate) struct TraceMap<'a> {
    pub lvl: &'a LevelData<'a>,
    pub a0: &'a OperatorFamily,
    pub a0_alpha: Vec<f64>,
    pub quadrature: MildQuadrature,
}

impl<'a> TraceMap<'a> {
    pub fn new(lvl: &'a LevelData<'a>, a0: &'a OperatorFamily, quadrature: MildQuadrature) -> Result<Self> {
        if !a0.is_autonomous() {
            return invalid("the semigroup generator must be autonomous");
        }
        if quadrature == MildQuadrature::ExactExponential && !a0.is_diagonal() {
            return invalid("exact exponential quadrature needs a diagonal generator");
        }
        if lvl.problem.f.len() > 2 {
            return invalid("trace-valued solves take at most two inhomogeneity slots");
        }
        let c = a0.profile.eval(0.0);
        Ok(Self { lvl, a0, a0_alpha: vec![c; lvl.cells()], quadrature })
    }

    pub fn mild(&self, first: usize, last: usize, start: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let l = self.lvl;
        let dim = l.dim;
        let g = l.slot_mean.get(1);
        match self.quadrature {
            MildQuadrature::ImplicitEuler => {
                let op = Implicit { base: &self.a0.base, alpha: &self.a0_alpha, extra: None };
                march(&op, &l.nodes, first, last, start, &mut |j, buf| {
                    if let Some(s) = g {
                        for i in 0..dim {
                            buf[i] += s[j * dim + i];
                        }
                    }
                    let vn = &v[(j + 1 - first) * dim..(j + 2 - first) * dim];
                    for i in 0..dim {
                        buf[i] -= l.b_diag[j * dim + i] * vn[i];
                    }
                })
            }
            MildQuadrature::ExactExponential => {
                let d = match &self.a0.base {
                    Op::Diagonal(d) => d,
                    Op::Dense(_) => unreachable!("checked in TraceMap::new"),
                };
                let c = self.a0_alpha[0];
                let gs = l.slot_slope.get(1);
                let mut out = Vec::with_capacity(dim * (last - first + 1));
                out.extend_from_slice(start);
                let mut mean = vec![0.0; dim];
                let mut slope = vec![0.0; dim];
                for j in first..last {
                    let h = l.nodes[j + 1] - l.nodes[j];
                    for i in 0..dim {
                        mean[i] = g.map_or(0.0, |s| s[j * dim + i]);
                        slope[i] = gs.map_or(0.0, |s| s[j * dim + i]);
                    }
                    let va = &v[(j - first) * dim..(j + 1 - first) * dim];
                    let vb = &v[(j + 1 - first) * dim..(j + 2 - first) * dim];
                    for (cmp, lam) in l.lambdas.iter().enumerate() {
                        let m = l.b_mom[cmp][j];
                        for i in 0..dim {
                            let vc = 0.5 * (va[i] + vb[i]);
                            let dv = (vb[i] - va[i]) / h;
                            mean[i] -= lam[i] * (vc * m[0] + dv * m[1]) / h;
                            slope[i] -= 12.0 * lam[i] * (vc * m[1] + dv * m[2]) / (h * h * h);
                        }
                    }
                    let k = out.len() - dim;
                    for i in 0..dim {
                        let u = exp_step(c * d[i], h, out[k + i], mean[i], slope[i]);
                        out.push(u);
                    }
                }
                Ok(out)
            }
        }
    }
}

impl FixedPointMap for TraceMap<'_> {
    type Cache = ();

    fn level(&self) -> &LevelData<'_> {
        self.lvl
    }

    fn prepare(&self, _first: usize, _last: usize, _start: &[f64]) -> Result<()> {
        Ok(())
    }

    fn apply(&self, _cache: &(), first: usize, last: usize, start: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let l = self.lvl;
        let dim = l.dim;
        let mut vt = self.mild(first, last, start, v)?;
        let op = Implicit { base: &l.problem.a.base, alpha: &l.a_alpha, extra: None };
        let h = l.slot_mean.first();
        let zero = vec![0.0; dim];
        let same = self.a0.base == l.problem.a.base && self.a0_alpha.iter().zip(&l.a_alpha).all(|(x, y)| x == y);
        if same && h.is_none() {
            return Ok(vt);
        }
        let z = march(&op, &l.nodes, first, last, &zero, &mut |j, buf| {
            if let Some(s) = h {
                for i in 0..dim {
                    buf[i] += s[j * dim + i];
                }
            }
            if !same {
                let vn = &vt[(j + 1 - first) * dim..(j + 2 - first) * dim];
                self.a0.base.apply_add(self.a0_alpha[j], vn, buf);
                l.problem.a.base.apply_add(-l.a_alpha[j], vn, buf);
            }
        })?;
        add_into(&mut vt, &z);
        Ok(vt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_nonautonomous, Perturbation, Problem, Profile, Slot, TimeFunction};
    use crate::spaces::{HilbertScale, TimeGrid};

    fn decay() -> Problem {
        Problem {
            scale: HilbertScale::new(vec![1.0], 1.0).unwrap(),
            a: OperatorFamily::autonomous(Op::Diagonal(vec![1.0])),
            b: Perturbation::none(),
            f: vec![Slot { f: TimeFunction::zero(1), r: 2.0, nu: 0.0, gamma: 0.0 }],
            u0: vec![1.0],
            p: 2.0,
            kappa: 0.0,
        }
    }

    #[test]
    fn mild_steps_match_scalar_formulas() {
        let prob = decay();
        let grid = TimeGrid::graded(1.0, 8, 1.0).unwrap();
        let lvl = LevelData::new(&prob, &grid).unwrap();
        let v = vec![0.0; 9];
        let euler = TraceMap::new(&lvl, &prob.a, MildQuadrature::ImplicitEuler).unwrap().mild(0, 8, &[1.0], &v).unwrap();
        let exact = TraceMap::new(&lvl, &prob.a, MildQuadrature::ExactExponential).unwrap().mild(0, 8, &[1.0], &v).unwrap();
        for j in 0..=8 {
            let t = j as f64 / 8.0;
            assert!((euler[j] - (1.0f64 + 0.125).powi(-(j as i32))).abs() < 1e-14);
            assert!((exact[j] - (-t).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn semigroup_generator_must_be_autonomous() {
        let prob = decay();
        let grid = TimeGrid::graded(1.0, 4, 1.0).unwrap();
        let lvl = LevelData::new(&prob, &grid).unwrap();
        let moving = make_nonautonomous(&prob.a, Profile::Sine { mean: 1.0, amp: 0.5, freq: 1.0 }, 1.0).unwrap();
        assert!(TraceMap::new(&lvl, &moving, MildQuadrature::ImplicitEuler).is_err());
        let dense = OperatorFamily::autonomous(Op::Dense(nalgebra::DMatrix::identity(1, 1)));
        assert!(TraceMap::new(&lvl, &dense, MildQuadrature::ExactExponential).is_err());
    }
}
