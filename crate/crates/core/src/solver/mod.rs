//! Solution schemes: a direct reference solver, the budget-partitioned
//! Picard scheme for lower-order perturbations, the mixed-scale scheme and
//! the transference scheme for trace-valued perturbations.

mod constants;
mod fixed_point;
mod kernel;
mod level;
pub mod partition;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use constants::{estimate_mr_constant, gronwall_check, GronwallReport, MrEstimate};
pub use fixed_point::{AuxChoice, IntervalStats, MildQuadrature};
pub use partition::{partition_by_budget, partition_count_bound, Envelope};

use crate::error::{invalid, parameter, Result};
use crate::problems::{f64_to_q, OperatorFamily, PerturbationClass, Problem, Slot, TimeFunction};
use crate::spaces::{mr_norm, trace_sup_norm, weighted_lp_norm, GridFunction, HilbertScale, Span, TimeGrid, TraceNorm, TraceSpace};
use fixed_point::{run_level, FixedPointMap, LowerOrderMap, MixedMap, TraceMap};
use kernel::{march, Implicit};
use level::{richardson, LevelData};

/// Tuning of the iterative schemes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Picard stops once the iterate distance is below `tol * max(1, |v|)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Intervals whose measured contraction exceeds this are halved.
    pub contraction_cap: f64,
    pub max_depth: usize,
    /// Combine the grid and its 2x refinement by Richardson extrapolation.
    pub richardson: bool,
    /// Seed for a random nonzero initial Picard guess; `None` starts at 0.
    pub perturbed_start: Option<u64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 60, contraction_cap: 0.75, max_depth: 12, richardson: true, perturbed_start: None }
    }
}

/// Constants that size the partition budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetConstants {
    /// Constant of the unperturbed estimate.
    pub c0: f64,
    /// Bound of `|B(t)| / b(t)`.
    pub m: f64,
}

/// Result of a scheme run.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub trajectory: GridFunction,
    /// `0 = τ_0 < ... < τ_N = T` as requested by the budget rule.
    pub partition: Vec<f64>,
    /// Intervals actually solved on the experiment grid, after snapping to
    /// nodes and adaptive halving.
    pub intervals: Vec<IntervalStats>,
    pub budget: f64,
    pub constants: Option<BudgetConstants>,
    pub norms: BTreeMap<String, f64>,
    /// Relative implicit Euler defect of the unextrapolated fixed points.
    pub residual: f64,
    /// Named parts whose sum is the trajectory.
    #[serde(skip)]
    pub components: Vec<(String, GridFunction)>,
}

impl SolveReport {
    pub fn max_contraction(&self) -> f64 {
        self.intervals.iter().map(|s| s.contraction).fold(0.0, f64::max)
    }

    pub fn total_iterations(&self) -> usize {
        self.intervals.iter().map(|s| s.iterations).sum()
    }
}

fn check_grid(problem: &Problem, grid: &TimeGrid) -> Result<()> {
    problem.validate()?;
    if grid.cells() < 1 {
        return invalid("grid needs at least one cell");
    }
    Ok(())
}

fn direct_level(problem: &Problem, grid: &TimeGrid, b_scale: f64) -> Result<(Vec<f64>, f64)> {
    let mut lvl = LevelData::new(problem, grid)?;
    if b_scale != 1.0 {
        lvl.b_diag.iter_mut().for_each(|x| *x *= b_scale);
    }
    let op = Implicit { base: &problem.a.base, alpha: &lvl.a_alpha, extra: Some(&lvl.b_diag) };
    let u = march(&op, &lvl.nodes, 0, lvl.cells(), &problem.u0, &mut |j, buf| lvl.add_forcing(j, buf))?;
    let res = lvl.residual(&u);
    Ok((u, res))
}

/// Direct implicit Euler solve of `u' + (A + B)u = f` on `grid` refined
/// `refinement` times, extrapolated against one further halving and
/// restricted back to the nodes of `grid`.
pub fn oracle_solve(problem: &Problem, grid: &TimeGrid, refinement: usize) -> Result<GridFunction> {
    oracle_scaled(problem, grid, refinement, 1.0)
}

/// [`oracle_solve`] for `u' + (A + s B)u = f`.
pub(crate) fn oracle_scaled(problem: &Problem, grid: &TimeGrid, refinement: usize, b_scale: f64) -> Result<GridFunction> {
    check_grid(problem, grid)?;
    let k = refinement.max(1);
    let work = grid.refine(k);
    let dim = problem.scale.dim();
    let (coarse, _) = direct_level(problem, &work, b_scale)?;
    let (fine, _) = direct_level(problem, &work.refine(2), b_scale)?;
    let ext = richardson(&coarse, &fine, dim);
    let mut values = Vec::with_capacity(dim * (grid.cells() + 1));
    for j in 0..=grid.cells() {
        values.extend_from_slice(&ext[k * j * dim..(k * j + 1) * dim]);
    }
    GridFunction::from_values(Arc::new(grid.clone()), dim, values)
}

fn snap_cuts(grid: &TimeGrid, partition: &[f64]) -> Vec<usize> {
    let mut cuts = vec![0];
    for &t in &partition[1..partition.len() - 1] {
        let i = grid.floor_index(t);
        if i > *cuts.last().unwrap() && i < grid.cells() {
            cuts.push(i);
        }
    }
    cuts.push(grid.cells());
    cuts
}

/// Node values, interval statistics, residual and component parts of one
/// grid level.
type LevelOut = (Vec<f64>, Vec<IntervalStats>, f64, Vec<Vec<f64>>);

/// Runs `per_level(grid, cuts)` on the grid and, when requested, on its
/// refinement, and extrapolates.
fn run_levels(
    problem: &Problem,
    grid: &TimeGrid,
    partition: &[f64],
    opts: &SolverOptions,
    per_level: &dyn Fn(&TimeGrid, &[usize]) -> Result<LevelOut>,
) -> Result<LevelOut> {
    let cuts = snap_cuts(grid, partition);
    let dim = problem.scale.dim();
    let first = per_level(grid, &cuts)?;
    if !opts.richardson {
        return Ok(first);
    }
    let fine_cuts: Vec<usize> = cuts.iter().map(|c| 2 * c).collect();
    let second = per_level(&grid.refine(2), &fine_cuts)?;
    let values = richardson(&first.0, &second.0, dim);
    let parts = first.3.iter().zip(&second.3).map(|(c, f)| richardson(c, f, dim)).collect();
    Ok((values, first.1, first.2.max(second.2), parts))
}

fn base_norms(problem: &Problem, u: &GridFunction) -> Result<BTreeMap<String, f64>> {
    let span = Span::full(u.grid());
    let mut norms = BTreeMap::new();
    norms.insert("mr".to_string(), mr_norm(u, problem.p, problem.kappa, &problem.scale, span)?);
    norms.insert("lp_x1".to_string(), weighted_lp_norm(u, problem.p, problem.kappa, 1.0, &problem.scale, span)?);
    Ok(norms)
}

fn rationals(problem: &Problem) -> Result<(crate::admissibility::Q, crate::admissibility::Q)> {
    Ok((f64_to_q(problem.p)?, f64_to_q(problem.kappa)?))
}

/// Envelopes of all components with their integrability exponents.
fn envelopes(problem: &Problem) -> Result<Vec<Envelope<'_>>> {
    let (p, kappa) = rationals(problem)?;
    let mut out = Vec::new();
    for c in &problem.b.components {
        match c.envelope_exponents(&p, &kappa)? {
            Some((q, mu)) => out.push(Envelope { profile: &c.envelope, q, mu }),
            None => {
                if !matches!(c.envelope, crate::problems::Profile::Zero) {
                    return parameter("r = p admits only the zero envelope");
                }
            }
        }
    }
    Ok(out)
}

fn grid_function(grid: &TimeGrid, dim: usize, values: Vec<f64>) -> Result<GridFunction> {
    GridFunction::from_values(Arc::new(grid.clone()), dim, values)
}

/// Per-interval parts of a converged level, glued into full-length arrays.
/// `parts_on(first, last, v, starts)` gets the part values at the interval
/// start; on the first interval these are `initial`.
fn glue_parts(
    nodes: usize,
    dim: usize,
    values: &[f64],
    stats: &[IntervalStats],
    initial: Vec<Vec<f64>>,
    parts_on: &dyn Fn(usize, usize, &[f64], &[Vec<f64>]) -> Result<Vec<Vec<f64>>>,
) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![vec![0.0; nodes * dim]; initial.len()];
    let mut starts = initial;
    for s in stats {
        let v = &values[s.first * dim..(s.last + 1) * dim];
        let parts = parts_on(s.first, s.last, v, &starts)?;
        for ((o, p), st) in out.iter_mut().zip(parts).zip(starts.iter_mut()) {
            o[s.first * dim..(s.last + 1) * dim].copy_from_slice(&p);
            st.copy_from_slice(&p[p.len() - dim..]);
        }
    }
    Ok(out)
}

/// Budget-partitioned Picard scheme with budget `1/(2 C_0 M)`. On each
/// interval `Φ(v) = ũ + E_A(f - B v)` where `ũ` continues the value at the
/// interval start without forcing.
pub fn picard_solve(problem: &Problem, grid: &TimeGrid, consts: BudgetConstants, opts: &SolverOptions) -> Result<SolveReport> {
    check_grid(problem, grid)?;
    if !(consts.c0 > 0.0 && consts.m > 0.0) {
        return parameter("budget constants must be positive");
    }
    let budget = 1.0 / (2.0 * consts.c0 * consts.m);
    let envs = envelopes(problem)?;
    let partition = partition_by_budget(&envs, budget, grid.horizon())?;
    let (values, intervals, residual, _) = run_levels(problem, grid, &partition, opts, &|g, cuts| {
        let lvl = LevelData::new(problem, g)?;
        let map = LowerOrderMap { lvl: &lvl };
        let out = run_level(&map, cuts, opts, &problem.u0)?;
        let res = lvl.residual(&out.values);
        Ok((out.values, out.stats, res, vec![]))
    })?;
    let trajectory = grid_function(grid, problem.scale.dim(), values)?;
    let norms = base_norms(problem, &trajectory)?;
    Ok(SolveReport { trajectory, partition, intervals, budget, constants: Some(consts), norms, residual, components: vec![] })
}

/// Mixed-scale scheme. Each component `i` has its own inhomogeneity slot
/// `i + 1` solved with the auxiliary operator; slot 0 is solved with `A`.
/// Budget: the summed envelope norms equal `1/(2 C_0)`.
pub fn mixed_scale_solve(problem: &Problem, grid: &TimeGrid, aux: AuxChoice, c0: f64, opts: &SolverOptions) -> Result<SolveReport> {
    check_grid(problem, grid)?;
    if !(c0 > 0.0) {
        return parameter("C_0 must be positive");
    }
    let (p, kappa) = rationals(problem)?;
    let gamma_star = f64_to_q(problem.scale.gamma_star())?;
    for c in &problem.b.components {
        if let PerturbationClass::Mixed { triple } = &c.class {
            let v = crate::admissibility::is_admissible(&p, &kappa, triple, &gamma_star)?;
            if !v.admissible() {
                return parameter(format!("inadmissible triple: {}", v.reason()));
            }
        }
    }
    if aux == AuxChoice::TimeAverage && !problem.a.base.is_diagonal() && !problem.a.is_autonomous() {
        return invalid("time-averaged auxiliary operator needs a diagonal or autonomous A");
    }
    let budget = 1.0 / (2.0 * c0);
    let envs = envelopes(problem)?;
    let partition = partition_by_budget(&envs, budget, grid.horizon())?;
    let dim = problem.scale.dim();
    let (values, intervals, residual, parts) = run_levels(problem, grid, &partition, opts, &|g, cuts| {
        let lvl = LevelData::new(problem, g)?;
        let map = MixedMap::new(&lvl, aux)?;
        let out = run_level(&map, cuts, opts, &problem.u0)?;
        let res = lvl.residual(&out.values);
        let mut initial = vec![vec![0.0; dim]; problem.b.components.len() + 1];
        initial[0].copy_from_slice(&problem.u0);
        let parts = glue_parts(lvl.nodes.len(), dim, &out.values, &out.stats, initial, &|a, b, v, starts| {
            let cache = map.prepare(a, b, &v[..dim])?;
            map.split(&cache, a, b, v, starts)
        })?;
        Ok((out.values, out.stats, res, parts))
    })?;
    let trajectory = grid_function(grid, dim, values)?;
    let norms = base_norms(problem, &trajectory)?;
    let mut components = Vec::new();
    for (i, part) in parts.into_iter().enumerate() {
        let name = if i == 0 { "x0_part".to_string() } else { format!("component_{i}") };
        components.push((name, grid_function(grid, dim, part)?));
    }
    Ok(SolveReport { trajectory, partition, intervals, budget, constants: None, norms, residual, components })
}

fn default_generator(problem: &Problem, horizon: f64) -> OperatorFamily {
    if problem.a.is_autonomous() {
        problem.a.clone()
    } else {
        problem.a.time_average(horizon)
    }
}

/// `e^{-tA_0} u_0 + ∫_0^t e^{-(t-s)A_0} g(s) ds` for autonomous `A_0`.
pub fn semigroup_mild_solve(
    a0: &OperatorFamily,
    scale: &HilbertScale,
    g: &TimeFunction,
    u0: &[f64],
    p: f64,
    grid: &TimeGrid,
    quadrature: MildQuadrature,
) -> Result<GridFunction> {
    if !a0.is_autonomous() {
        return parameter("the semigroup generator must be autonomous");
    }
    let dim = scale.dim();
    let problem = Problem {
        scale: scale.clone(),
        a: a0.clone(),
        b: crate::problems::Perturbation::none(),
        f: vec![
            Slot { f: TimeFunction::zero(dim), r: p, nu: 0.0, gamma: 0.0 },
            Slot { f: g.clone(), r: 1.0, nu: 0.0, gamma: 1.0 - 1.0 / p },
        ],
        u0: u0.to_vec(),
        p,
        kappa: 0.0,
    };
    check_grid(&problem, grid)?;
    let level = |g: &TimeGrid| -> Result<Vec<f64>> {
        let lvl = LevelData::new(&problem, g)?;
        let map = TraceMap::new(&lvl, a0, quadrature)?;
        map.mild(0, lvl.cells(), u0, &vec![0.0; dim * lvl.nodes.len()])
    };
    let values = match quadrature {
        MildQuadrature::ExactExponential => level(grid)?,
        MildQuadrature::ImplicitEuler => richardson(&level(grid)?, &level(&grid.refine(2))?, dim),
    };
    grid_function(grid, dim, values)
}

/// Transference scheme for trace-valued perturbations. Slot 0 is the
/// `L^p(X_0)` part `h`, slot 1 the `L^1`-in-time trace-valued part `g`.
/// `a0` defaults to `A` when autonomous and to its time average otherwise.
pub fn r1_solve(
    problem: &Problem,
    grid: &TimeGrid,
    a0: Option<&OperatorFamily>,
    quadrature: MildQuadrature,
    c0: f64,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    check_grid(problem, grid)?;
    if !(c0 > 0.0) {
        return parameter("C_0 must be positive");
    }
    for c in &problem.b.components {
        match c.class {
            PerturbationClass::TraceValued { p } if p == problem.p => {}
            _ => return parameter("transference solves need trace-valued components with the base exponent p"),
        }
    }
    let owned;
    let a0 = match a0 {
        Some(a) => a,
        None => {
            owned = default_generator(problem, grid.horizon());
            &owned
        }
    };
    let budget = 1.0 / (2.0 * c0);
    let envs = envelopes(problem)?;
    let partition = partition_by_budget(&envs, budget, grid.horizon())?;
    let dim = problem.scale.dim();
    let (values, intervals, residual, parts) = run_levels(problem, grid, &partition, opts, &|g, cuts| {
        let lvl = LevelData::new(problem, g)?;
        let map = TraceMap::new(&lvl, a0, quadrature)?;
        let out = run_level(&map, cuts, opts, &problem.u0)?;
        let res = lvl.residual(&out.values);
        let parts = glue_parts(lvl.nodes.len(), dim, &out.values, &out.stats, vec![problem.u0.clone(), vec![0.0; dim]], &|a, b, v, _| {
            let mild = map.mild(a, b, &v[..dim], v)?;
            let full = map.apply(&(), a, b, &v[..dim], v)?;
            let corr = full.iter().zip(&mild).map(|(x, y)| x - y).collect();
            Ok(vec![mild, corr])
        })?;
        Ok((out.values, out.stats, res, parts))
    })?;
    let trajectory = grid_function(grid, dim, values)?;
    let mut norms = base_norms(problem, &trajectory)?;
    let trace = TraceNorm::new(TraceSpace::RealInterp { level: 1.0 - 1.0 / problem.p, q: problem.p }, &problem.scale)?;
    norms.insert("trace_sup".to_string(), trace_sup_norm(&trajectory, 0.0, &trace, Span::full(grid)));
    let mut components = Vec::new();
    for (name, part) in ["mild", "correction"].into_iter().zip(parts) {
        components.push((name.to_string(), grid_function(grid, dim, part)?));
    }
    Ok(SolveReport { trajectory, partition, intervals, budget, constants: None, norms, residual, components })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_diagonal_heat, Op, Perturbation, PerturbationComponent, Profile};

    fn scalar(b: Perturbation, u0: f64, f: TimeFunction, p: f64) -> Problem {
        Problem {
            scale: HilbertScale::new(vec![1.0], 1.0).unwrap(),
            a: OperatorFamily::autonomous(Op::Diagonal(vec![1.0])),
            b,
            f: vec![Slot { f, r: p, nu: 0.0, gamma: 0.0 }],
            u0: vec![u0],
            p,
            kappa: 0.0,
        }
    }

    fn max_err(u: &GridFunction, exact: impl Fn(f64) -> f64) -> f64 {
        let nodes = u.grid().nodes();
        (0..nodes.len()).map(|j| (u.node(j)[0] - exact(nodes[j])).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn oracle_matches_scalar_closed_forms() {
        // second order under extrapolation
        let errs: Vec<(f64, f64)> = [128, 256]
            .iter()
            .map(|&m| {
                let grid = TimeGrid::graded(1.0, m, 2.0).unwrap();
                let decay = scalar(Perturbation::none(), 1.0, TimeFunction::zero(1), 2.0);
                let e1 = max_err(&oracle_solve(&decay, &grid, 1).unwrap(), |t| (-t).exp());
                let forced = scalar(Perturbation::none(), 0.0, TimeFunction::term(Profile::constant(1.0), vec![1.0]), 2.0);
                let e2 = max_err(&oracle_solve(&forced, &grid, 1).unwrap(), |t| 1.0 - (-t).exp());
                (e1, e2)
            })
            .collect();
        assert!(errs[1].0 < 1e-5 && errs[1].1 < 1e-5, "{errs:?}");
        assert!(errs[0].0 / errs[1].0 > 3.5 && errs[0].1 / errs[1].1 > 3.5, "{errs:?}");
    }

    #[test]
    fn singular_envelope_closed_form() {
        let grid = TimeGrid::graded(1.0, 2048, 2.0).unwrap();
        let c = PerturbationComponent::lower_order(2.0, Profile::power(1.0, 0.25), 1.0).unwrap();
        let prob = scalar(Perturbation::single(c), 1.0, TimeFunction::zero(1), 2.0);
        let exact = |t: f64| (-t - 4.0 / 3.0 * t.powf(0.75)).exp();
        let u = oracle_solve(&prob, &grid, 1).unwrap();
        assert!(max_err(&u, exact) < 1e-5, "{}", max_err(&u, exact));
        let rep = picard_solve(&prob, &grid, BudgetConstants { c0: 1.0, m: 1.0 }, &SolverOptions::default()).unwrap();
        assert!(max_err(&rep.trajectory, exact) < 1e-4);
        let same = oracle_solve(&prob, &grid, 1).unwrap();
        assert!(max_err(&rep.trajectory, |t| same.eval(t)[0]) < 1e-6);
        assert!(rep.max_contraction() <= 0.75);
    }

    #[test]
    fn unperturbed_picard_is_one_step() {
        let grid = TimeGrid::graded(1.0, 64, 1.0).unwrap();
        let prob = scalar(Perturbation::none(), 1.0, TimeFunction::term(Profile::constant(1.0), vec![1.0]), 2.0);
        let rep = picard_solve(&prob, &grid, BudgetConstants { c0: 1.0, m: 1.0 }, &SolverOptions::default()).unwrap();
        assert_eq!(rep.partition, vec![0.0, 1.0]);
        assert_eq!(rep.total_iterations(), 1);
        let o = oracle_solve(&prob, &grid, 1).unwrap();
        assert!(max_err(&rep.trajectory, |t| o.eval(t)[0]) < 1e-14);
    }

    #[test]
    fn trace_valued_constant_envelope() {
        let grid = TimeGrid::graded(1.0, 1024, 1.0).unwrap();
        let c = PerturbationComponent::trace_valued(2.0, Profile::constant(1.0), 1.0).unwrap();
        let prob = scalar(Perturbation::single(c), 1.0, TimeFunction::zero(1), 2.0);
        let opts = SolverOptions::default();
        for quad in [MildQuadrature::ImplicitEuler, MildQuadrature::ExactExponential] {
            let rep = r1_solve(&prob, &grid, None, quad, 1.0, &opts).unwrap();
            assert!(max_err(&rep.trajectory, |t| (-2.0 * t).exp()) < 1e-6, "{quad:?}");
        }
    }

    #[test]
    fn mild_solve_closed_forms() {
        let grid = TimeGrid::graded(1.0, 128, 1.0).unwrap();
        let a0 = OperatorFamily::autonomous(Op::Diagonal(vec![1.0]));
        let s = HilbertScale::new(vec![1.0], 1.0).unwrap();
        let one = TimeFunction::term(Profile::constant(1.0), vec![1.0]);
        let u = semigroup_mild_solve(&a0, &s, &one, &[0.0], 2.0, &grid, MildQuadrature::ExactExponential).unwrap();
        assert!(max_err(&u, |t| 1.0 - (-t).exp()) < 1e-14);
        let u = semigroup_mild_solve(&a0, &s, &TimeFunction::zero(1), &[1.0], 2.0, &grid, MildQuadrature::ExactExponential).unwrap();
        assert!(max_err(&u, |t| (-t).exp()) < 1e-14);
        let mut pa = a0.clone();
        pa.profile = Profile::Sine { mean: 1.0, amp: 0.5, freq: 1.0 };
        assert!(semigroup_mild_solve(&pa, &s, &one, &[0.0], 2.0, &grid, MildQuadrature::ExactExponential).is_err());
    }

    #[test]
    fn mixed_scale_with_time_average_matches_oracle() {
        let (a, scale) = make_diagonal_heat(8, 1.0).unwrap();
        let a = crate::problems::make_nonautonomous(&a, Profile::Sine { mean: 1.5, amp: 0.5, freq: 3.0 }, 1.0).unwrap();
        let triple = crate::admissibility::Triple::new(
            crate::admissibility::Q::new(4, 3),
            crate::admissibility::Q::new(0, 1),
            crate::admissibility::Q::new(1, 2),
        );
        let c = PerturbationComponent::mixed(triple, Profile::power(1.0, 0.25), 1.0).unwrap();
        let n = scale.dim();
        let f0 = TimeFunction::term(Profile::constant(1.0), vec![1.0; n]);
        let f1 = TimeFunction::term(Profile::power(1.0, 0.1), (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect());
        let prob = Problem {
            scale,
            a,
            b: Perturbation::single(c),
            f: vec![Slot { f: f0, r: 4.0, nu: 0.0, gamma: 0.0 }, Slot { f: f1, r: 4.0 / 3.0, nu: 0.0, gamma: 0.5 }],
            u0: vec![0.5; n],
            p: 4.0,
            kappa: 0.0,
        };
        let grid = TimeGrid::graded(1.0, 256, 2.0).unwrap();
        let rep = mixed_scale_solve(&prob, &grid, AuxChoice::TimeAverage, 1.0, &SolverOptions::default()).unwrap();
        let same = oracle_solve(&prob, &grid, 1).unwrap();
        let span = Span::full(&grid);
        let diff = rep.trajectory.sub(&same);
        let rel = weighted_lp_norm(&diff, 4.0, 0.0, 1.0, &prob.scale, span).unwrap()
            / weighted_lp_norm(&same, 4.0, 0.0, 1.0, &prob.scale, span).unwrap();
        assert!(rel < 1e-9, "{rel}");
        // parts add up to the trajectory
        let mut sum = GridFunction::zeros(rep.trajectory.grid().clone(), n);
        for (_, part) in &rep.components {
            sum = sum.add(part);
        }
        let gap = weighted_lp_norm(&sum.sub(&rep.trajectory), 4.0, 0.0, 1.0, &prob.scale, span).unwrap();
        assert!(gap < 1e-8 * weighted_lp_norm(&same, 4.0, 0.0, 1.0, &prob.scale, span).unwrap());
        let corr = &rep.components[1].1;
        assert!(weighted_lp_norm(corr, 4.0, 0.0, 1.0, &prob.scale, span).unwrap() > 0.0);
    }

    #[test]
    fn zero_data_gives_zero() {
        let c = PerturbationComponent::lower_order(3.0, Profile::power(2.0, 0.2), -1.0).unwrap();
        let prob = scalar(Perturbation::single(c), 0.0, TimeFunction::zero(1), 2.0);
        let grid = TimeGrid::graded(1.0, 64, 2.0).unwrap();
        let rep = picard_solve(&prob, &grid, BudgetConstants { c0: 1.0, m: 1.0 }, &SolverOptions::default()).unwrap();
        assert!(rep.trajectory.values().iter().all(|x| *x == 0.0));
    }
}
