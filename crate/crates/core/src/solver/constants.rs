//! Empirical constants: maximal regularity lower bounds and the
//! continuity-method bound for perturbations on the trace space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{oracle_scaled, oracle_solve};
use crate::error::{parameter, Result};
use crate::problems::{Op, OperatorFamily, Perturbation, Problem, Slot, TimeFunction};
use crate::spaces::{function_lp_norm, mr_norm, GridFunction, HilbertScale, Span, TimeGrid};

/// Lower-bound estimate of the maximal regularity constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrEstimate {
    /// Max of `ratios`.
    pub value: f64,
    pub samples: usize,
    pub ratios: Vec<f64>,
    /// Node index `k` of the horizon `t_k` used by each sample.
    pub horizons: Vec<usize>,
    pub refinement: usize,
    /// Closed-form ratio for `f = e_i` on `[0, T]`, per mode; only for
    /// autonomous diagonal `A`.
    pub per_mode: Option<Vec<f64>>,
}

fn unforced_problem(a: &OperatorFamily, scale: &HilbertScale, p: f64, kappa: f64, f: TimeFunction) -> Problem {
    Problem {
        scale: scale.clone(),
        a: a.clone(),
        b: Perturbation::none(),
        f: vec![Slot { f, r: p, nu: kappa, gamma: 0.0 }],
        u0: vec![0.0; scale.dim()],
        p,
        kappa,
    }
}

/// Samples `mr_norm(u) / |f|_{L^p(w_κ; X_0)}` over `[0, t_k]` for random
/// cell-wise constant `f` with standard normal entries and random nodes
/// `t_k`; `u` solves `u' + A u = f`, `u(0) = 0`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_mr_constant(
    a: &OperatorFamily,
    scale: &HilbertScale,
    p: f64,
    kappa: f64,
    grid: &TimeGrid,
    samples: usize,
    seed: u64,
    refinement: usize,
) -> Result<MrEstimate> {
    if samples == 0 {
        return parameter("at least one sample is needed");
    }
    let dim = scale.dim();
    let cells = grid.cells();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(samples);
    let mut horizons = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut values: Vec<f64> = (0..dim * cells).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
        values.iter_mut().for_each(|x| *x /= norm);
        let k = rng.random_range(1..=cells);
        let f = TimeFunction::cells(dim, grid.nodes().to_vec(), values)?;
        let problem = unforced_problem(a, scale, p, kappa, f.clone());
        let u = oracle_solve(&problem, grid, refinement)?;
        let span = Span::new(0, k);
        let num = mr_norm(&u, p, kappa, scale, span)?;
        let den = function_lp_norm(&|t| f.eval(t), grid, p, kappa, 0.0, scale, span)?;
        ratios.push(if den > 0.0 { num / den } else { 0.0 });
        horizons.push(k);
    }
    let per_mode = match (&a.base, a.is_autonomous()) {
        (Op::Diagonal(d), true) => {
            let c = a.profile.eval(0.0);
            let fine = std::sync::Arc::new(grid.refine(4));
            let den = function_lp_norm(&|_| vec![1.0], grid, p, kappa, 0.0, &HilbertScale::new(vec![1.0], scale.gamma_star())?, Span::full(grid))?;
            let mut out = Vec::with_capacity(dim);
            for i in 0..dim {
                let mu = c * d[i];
                let u = GridFunction::from_fn(fine.clone(), dim, |t| {
                    let mut v = vec![0.0; dim];
                    v[i] = -(-mu * t).exp_m1() / mu;
                    v
                })?;
                out.push(mr_norm(&u, p, kappa, scale, Span::full(&fine))? / den);
            }
            Some(out)
        }
        _ => None,
    };
    let value = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(MrEstimate { value, samples, ratios, horizons, refinement, per_mode })
}

/// Ratios `mr_norm(u_s) / |f|` for `u' + A u + s B u = f`, `u(0) = 0`, at
/// `s ∈ {0, 1/4, 1/2, 3/4, 1}` against
/// `2 C M exp(2^{p-1} (C M)^p |b|_{L^p}^p / p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub steps: Vec<f64>,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub envelope_norm: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn gronwall_check(problem: &Problem, grid: &TimeGrid, trace_constant: f64, mr_constant: f64, refinement: usize) -> Result<GronwallReport> {
    let p = problem.p;
    let horizon = grid.horizon();
    let mut b = 0.0;
    for c in &problem.b.components {
        b += c.envelope.weighted_norm(0.0, horizon, p, 0.0)?;
    }
    let f = problem.total_forcing();
    let fnorm = function_lp_norm(&|t| f.eval(t), grid, p, problem.kappa, 0.0, &problem.scale, Span::full(grid))?;
    if fnorm == 0.0 {
        return parameter("forcing must be nonzero");
    }
    let mut zeroed = problem.clone();
    zeroed.u0.iter_mut().for_each(|x| *x = 0.0);
    let steps = vec![0.0, 0.25, 0.5, 0.75, 1.0];
    let mut ratios = Vec::with_capacity(steps.len());
    for &s in &steps {
        let u = oracle_scaled(&zeroed, grid, refinement, s)?;
        ratios.push(mr_norm(&u, p, problem.kappa, &problem.scale, Span::full(grid))? / fnorm);
    }
    let cm = trace_constant * mr_constant;
    let bound = 2.0 * cm * (2f64.powf(p - 1.0) * cm.powf(p) * b.powf(p) / p).exp();
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(GronwallReport { steps, ratios, max_ratio, envelope_norm: b, bound, holds: max_ratio <= bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{PerturbationComponent, Profile};

    fn scalar() -> (OperatorFamily, HilbertScale) {
        (OperatorFamily::autonomous(Op::Diagonal(vec![1.0])), HilbertScale::new(vec![1.0], 1.0).unwrap())
    }

    #[test]
    fn mr_estimate_is_bounded_for_a_scalar_mode() {
        // |u|_{L^2(X_1)} and |u'|_{L^2} are each at most |f|_{L^2} for u' + u = f
        let (a, scale) = scalar();
        let grid = TimeGrid::graded(1.0, 64, 1.0).unwrap();
        let est = estimate_mr_constant(&a, &scale, 2.0, 0.0, &grid, 8, 3, 1).unwrap();
        assert_eq!(est.ratios.len(), 8);
        assert!(est.value > 0.0 && est.value <= 2.0 + 1e-2, "{}", est.value);
        let per_mode = est.per_mode.unwrap();
        assert_eq!(per_mode.len(), 1);
        assert!(per_mode[0] > 0.0 && per_mode[0] <= 2.0);
        assert!(estimate_mr_constant(&a, &scale, 2.0, 0.0, &grid, 0, 3, 1).is_err());
    }

    #[test]
    fn gronwall_ratios_sit_below_bound() {
        let (a, scale) = scalar();
        let c = PerturbationComponent::lower_order(2.0, Profile::constant(0.5), 1.0).unwrap();
        let problem = Problem {
            scale,
            a,
            b: Perturbation::single(c),
            f: vec![Slot { f: TimeFunction::term(Profile::constant(1.0), vec![1.0]), r: 2.0, nu: 0.0, gamma: 0.0 }],
            u0: vec![0.0],
            p: 2.0,
            kappa: 0.0,
        };
        let grid = TimeGrid::graded(1.0, 64, 1.0).unwrap();
        let rep = gronwall_check(&problem, &grid, 1.0, 2.0, 1).unwrap();
        assert_eq!(rep.ratios.len(), 5);
        assert!((rep.envelope_norm - 0.5).abs() < 1e-14);
        assert!(rep.holds && rep.max_ratio > 0.0);
        // a damping perturbation only lowers the solution
        assert!(rep.ratios.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{:?}", rep.ratios);
    }
}
