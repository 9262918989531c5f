//! Criticality sweep, scheme cross-checks and decomposition invariance.

use serde::{Deserialize, Serialize};

use super::scenario::{demo_triple, Scenario, Family};
use super::tolerances::UNIQUENESS_FACTOR;
use super::{nondecreasing, CheckReport};
use crate::error::{parameter, Error, Result};
use crate::problems::{make_diagonal_heat, Perturbation, PerturbationComponent, Problem, Profile, Slot, TimeFunction};
use crate::solver::{oracle_solve, partition_count_bound, Envelope, SolveReport, SolverOptions};
use crate::spaces::{weighted_lp_norm, GridFunction, Span, TimeGrid};

/// Settings of the criticality sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalityConfig {
    /// Offsets `ε > 0`, swept from largest to smallest.
    pub offsets: Vec<f64>,
    pub dim: usize,
    pub cells: usize,
}

impl Default for CriticalityConfig {
    fn default() -> Self {
        Self { offsets: vec![0.2, 0.1, 0.05, 0.025], dim: 8, cells: 1024 }
    }
}

/// `(p, q_b)` of the family's envelope class.
fn exponents(family: Family) -> (f64, f64) {
    match family {
        Family::LowerOrder => (2.0, 4.0),
        Family::LowerOrderCritical => (2.0, 2.0),
        Family::MixedScale => (4.0, 2.0),
        Family::TraceValued => (2.0, 2.0),
    }
}

/// Anti-damping perturbation `-t^{-1/q_b+ε} Λ` with forcing `1` in every
/// mode and `u_0 = 0`, so the solution grows with the envelope.
fn critical_scenario(family: Family, eps: f64, config: &CriticalityConfig) -> Result<Scenario> {
    let (p, qb) = exponents(family);
    let n = config.dim;
    let (a, scale) = make_diagonal_heat(n, 1.0)?;
    let env = Profile::power(1.0, 1.0 / qb - eps);
    let ones = TimeFunction::term(Profile::constant(1.0), vec![1.0; n]);
    let zero = TimeFunction::zero(n);
    let (c, f) = match family {
        Family::LowerOrder | Family::LowerOrderCritical => {
            (PerturbationComponent::lower_order(qb, env, -1.0)?, vec![Slot { f: ones, r: p, nu: 0.0, gamma: 0.0 }])
        }
        Family::MixedScale => (
            PerturbationComponent::mixed(demo_triple(), env, -1.0)?,
            vec![Slot { f: ones, r: p, nu: 0.0, gamma: 0.0 }, Slot { f: zero, r: 4.0 / 3.0, nu: 0.0, gamma: 0.5 }],
        ),
        Family::TraceValued => (
            PerturbationComponent::trace_valued(p, env, -1.0)?,
            vec![Slot { f: ones, r: p, nu: 0.0, gamma: 0.0 }, Slot { f: zero, r: 1.0, nu: 0.0, gamma: 0.5 }],
        ),
    };
    let problem = Problem { scale, a, b: Perturbation::single(c), f, u0: vec![0.0; n], p, kappa: 0.0 };
    let mut s = Scenario::random(family, n, config.cells, 0)?;
    s.problem = problem;
    s.grid = TimeGrid::graded(1.0, config.cells, 3.0)?;
    Ok(s)
}

/// Least-squares `R²` of `y` against `x`.
fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}

/// Sweeps `b_ε(t) = t^{-1/q_b+ε}` over the offsets. Envelopes with `ε <= 0`
/// must be rejected with [`Error::NotIntegrable`]; for `ε > 0` the
/// solution-to-data ratio and the piece count `N(ε)` must not decrease as
/// `ε` shrinks, and `N(ε)` must respect the piece-count bound.
pub fn criticality_experiment(family: Family, config: &CriticalityConfig) -> Result<CheckReport> {
    if config.offsets.iter().any(|e| !(*e > 0.0 && *e < 0.5)) {
        return parameter("offsets must lie in (0, 1/2)");
    }
    let (p, qb) = exponents(family);
    let mut rep = CheckReport::new("criticality");
    rep.param("family", family.name());
    rep.param("p", p);
    rep.param("q_b", qb);
    let mut rejected = true;
    for eps in [0.0, -0.05] {
        let s = critical_scenario(family, eps, config)?;
        let ok = matches!(s.solve(&SolverOptions::default()), Err(Error::NotIntegrable { .. }));
        rep.series_push("rejected", if ok { 1.0 } else { 0.0 });
        rejected &= ok;
    }
    let mut offsets = config.offsets.clone();
    offsets.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut counts = Vec::new();
    let mut within = true;
    for &eps in &offsets {
        let s = critical_scenario(family, eps, config)?;
        let out = s.solve(&SolverOptions::default())?;
        let data = s.problem.f[0].f.weighted_norm(0.0, 1.0, p, 0.0, 0.0, &s.problem.scale)?;
        let n = (out.partition.len() - 1) as f64;
        let c = &s.problem.b.components[0];
        let env = Envelope { profile: &c.envelope, q: qb, mu: 0.0 };
        let bound = partition_count_bound(&[env], out.budget, 1.0)?;
        let bq = env.norm(0.0, 1.0)?.powf(qb);
        within &= n <= bound;
        rep.push(format!("eps={eps}"), out.norms["lp_x1"] / data);
        rep.series_push("partition_count", n);
        rep.series_push("count_bound", bound);
        rep.series_push("closed_form_count", (bq / out.budget.powf(qb) - 1e-9).ceil());
        rep.series_push("b_norm_q", bq);
        rep.series_push("max_contraction", out.max_contraction());
        counts.push(n);
    }
    let logs: Vec<f64> = rep.ratios.iter().map(|r| r.ln()).collect();
    rep.series.insert("fit_r2".into(), vec![r_squared(&rep.series["b_norm_q"], &logs)]);
    rep.samples = offsets.len();
    let monotone = nondecreasing(&counts) && nondecreasing(&rep.ratios);
    if !monotone {
        rep.notes.push("ratio or piece count decreased as ε shrank".into());
    }
    if !rejected {
        rep.notes.push("a non-integrable envelope was not rejected".into());
    }
    rep.stable = monotone;
    rep.pass = monotone && within && rejected && rep.ratios_finite();
    Ok(rep)
}

fn relative_distance(x: &GridFunction, y: &GridFunction, reference: f64, s: &Scenario) -> Result<f64> {
    let pr = &s.problem;
    let d = weighted_lp_norm(&x.sub(y), pr.p, pr.kappa, 1.0, &pr.scale, Span::full(&s.grid))?;
    Ok(d / reference.max(1.0))
}

fn reference_norm(u: &GridFunction, s: &Scenario) -> Result<f64> {
    let pr = &s.problem;
    weighted_lp_norm(u, pr.p, pr.kappa, 1.0, &pr.scale, Span::full(&s.grid))
}

fn record_iteration(rep: &mut CheckReport, out: &SolveReport) {
    rep.series_push("max_contraction", out.max_contraction());
    let late = out.intervals.iter().flat_map(|s| s.ratios.iter().skip(1)).cloned().fold(0.0, f64::max);
    rep.series_push("late_distance_ratio", late);
}

/// Direct solve on the same grid, the family's scheme, and the scheme from
/// a random initial guess; passes when all pairwise `L^p(w_κ; X_1)`
/// distances, relative to `max(1, |u|)`, are at most `10 tol`.
pub fn uniqueness_crosscheck(scenario: &Scenario, opts: &SolverOptions) -> Result<CheckReport> {
    let mut rep = CheckReport::new("uniqueness");
    rep.param("family", scenario.family.name());
    rep.param("seed", scenario.seed);
    rep.param("tol", opts.tol);
    let direct = oracle_solve(&scenario.problem, &scenario.grid, 1)?;
    let scheme = scenario.solve(opts)?;
    let perturbed_opts = SolverOptions { perturbed_start: Some(scenario.seed.wrapping_add(1)), ..opts.clone() };
    let perturbed = scenario.solve(&perturbed_opts)?;
    let r = reference_norm(&direct, scenario)?;
    rep.push("direct-scheme".into(), relative_distance(&direct, &scheme.trajectory, r, scenario)?);
    rep.push("direct-perturbed".into(), relative_distance(&direct, &perturbed.trajectory, r, scenario)?);
    rep.push("scheme-perturbed".into(), relative_distance(&scheme.trajectory, &perturbed.trajectory, r, scenario)?);
    record_iteration(&mut rep, &scheme);
    record_iteration(&mut rep, &perturbed);
    rep.samples = 3;
    rep.drift = rep.ratios.iter().cloned().fold(0.0, f64::max);
    rep.pass = rep.drift <= UNIQUENESS_FACTOR * opts.tol && rep.ratios_finite();
    Ok(rep)
}

/// Solves after moving each fraction of forcing slot 1 into slot 0 and
/// compares with the unshifted solve; passes when every relative distance
/// is at most `10 tol`.
pub fn decomposition_invariance(scenario: &Scenario, fractions: &[f64], opts: &SolverOptions) -> Result<CheckReport> {
    let mut rep = CheckReport::new("decomposition_invariance");
    rep.param("family", scenario.family.name());
    rep.param("seed", scenario.seed);
    rep.param("tol", opts.tol);
    let base = scenario.solve(opts)?;
    let r = reference_norm(&base.trajectory, scenario)?;
    for &theta in fractions {
        let moved = scenario.shifted(theta)?.solve(opts)?;
        rep.push(format!("fraction={theta}"), relative_distance(&base.trajectory, &moved.trajectory, r, scenario)?);
    }
    rep.samples = fractions.len();
    rep.drift = rep.ratios.iter().cloned().fold(0.0, f64::max);
    rep.pass = rep.drift <= UNIQUENESS_FACTOR * opts.tol && rep.ratios_finite();
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r_squared_of_a_line_is_one() {
        assert!((r_squared(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-14);
        assert!(r_squared(&[1.0, 2.0, 3.0], &[1.0, -1.0, 1.0]) < 1e-12);
    }
}
