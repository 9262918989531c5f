//! Seeded random configurations, one family per perturbation class.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::samples::smooth_forcing;
use crate::admissibility::Triple;
use crate::error::{invalid, Result};
use crate::problems::{
    make_diagonal_heat, make_nonautonomous, Perturbation, PerturbationComponent, Problem, Profile, Slot,
};
use crate::solver::{
    mixed_scale_solve, oracle_solve, picard_solve, r1_solve, AuxChoice, BudgetConstants, MildQuadrature, SolveReport,
    SolverOptions,
};
use crate::spaces::{GridFunction, TimeGrid};
use num_rational::Ratio;

/// Perturbation class of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `B: X_{1-1/q} → X_0` with `q > p`.
    LowerOrder,
    /// Lower order with `q = p`.
    LowerOrderCritical,
    /// `B: X_1 → X_γ` priced by an admissible triple.
    MixedScale,
    /// `B: X_1 → X_{1-1/p}` with an `L^1`-in-time trace-valued forcing.
    TraceValued,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::LowerOrder, Family::LowerOrderCritical, Family::MixedScale, Family::TraceValued];

    pub fn name(self) -> &'static str {
        match self {
            Family::LowerOrder => "lower_order",
            Family::LowerOrderCritical => "lower_order_critical",
            Family::MixedScale => "mixed_scale",
            Family::TraceValued => "trace_valued",
        }
    }
}

/// A problem with its grid and the scheme settings that solve it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub family: Family,
    pub problem: Problem,
    pub grid: TimeGrid,
    /// Constant of the unperturbed estimate used to size the budget.
    pub c0: f64,
    pub aux: AuxChoice,
    pub quadrature: MildQuadrature,
    pub seed: u64,
}

fn sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

/// The triple `(4/3, 0, 1/2)` used with `p = 4`.
pub(crate) fn demo_triple() -> Triple {
    Triple::new(Ratio::new(4, 3), Ratio::new(0, 1), Ratio::new(1, 2))
}

impl Scenario {
    /// Heat model with `n` modes on a graded grid of `cells` cells over
    /// `[0, 1]`, smooth random forcing and envelope `c t^{-α}`.
    pub fn random(family: Family, n: usize, cells: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (family as u64) << 56);
        let (a, scale) = make_diagonal_heat(n, 1.0)?;
        let grid = TimeGrid::graded(1.0, cells, 3.0)?;
        let u0: Vec<f64> = (0..n)
            .map(|i| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z / (1.0 + i as f64).powi(2)
            })
            .collect();
        let coef = rng.random_range(0.2..1.0);
        let s = sign(&mut rng);
        let (p, a, b, f) = match family {
            Family::LowerOrder => {
                let alpha = rng.random_range(0.05..0.2);
                let c = PerturbationComponent::lower_order(4.0, Profile::power(coef, alpha), s)?;
                let f = smooth_forcing(n, &mut rng)?;
                (2.0, a, c, vec![Slot { f, r: 2.0, nu: 0.0, gamma: 0.0 }])
            }
            Family::LowerOrderCritical => {
                let alpha = rng.random_range(0.05..0.3);
                let c = PerturbationComponent::lower_order(2.0, Profile::power(coef, alpha), s)?;
                let f = smooth_forcing(n, &mut rng)?;
                (2.0, a, c, vec![Slot { f, r: 2.0, nu: 0.0, gamma: 0.0 }])
            }
            Family::MixedScale => {
                let alpha = rng.random_range(0.1..0.3);
                let c = PerturbationComponent::mixed(demo_triple(), Profile::power(coef, alpha), s)?;
                let a = make_nonautonomous(&a, Profile::Sine { mean: 1.5, amp: 0.5, freq: rng.random_range(0.5..2.0) }, 1.0)?;
                let f0 = smooth_forcing(n, &mut rng)?;
                let f1 = smooth_forcing(n, &mut rng)?;
                let slots = vec![Slot { f: f0, r: 4.0, nu: 0.0, gamma: 0.0 }, Slot { f: f1, r: 4.0 / 3.0, nu: 0.0, gamma: 0.5 }];
                (4.0, a, c, slots)
            }
            Family::TraceValued => {
                let alpha = rng.random_range(0.05..0.3);
                let c = PerturbationComponent::trace_valued(2.0, Profile::power(coef, alpha), s)?;
                let a = make_nonautonomous(&a, Profile::Sine { mean: 1.5, amp: rng.random_range(0.2..0.5), freq: 1.0 }, 1.0)?;
                let h = smooth_forcing(n, &mut rng)?;
                let g = smooth_forcing(n, &mut rng)?;
                let slots = vec![Slot { f: h, r: 2.0, nu: 0.0, gamma: 0.0 }, Slot { f: g, r: 1.0, nu: 0.0, gamma: 0.5 }];
                (2.0, a, c, slots)
            }
        };
        let problem = Problem { scale, a, b: Perturbation::single(b), f, u0, p, kappa: 0.0 };
        problem.validate()?;
        Ok(Self {
            family,
            problem,
            grid,
            c0: 1.0,
            aux: AuxChoice::TimeAverage,
            quadrature: MildQuadrature::ImplicitEuler,
            seed,
        })
    }

    /// Runs the scheme that belongs to the family.
    pub fn solve(&self, opts: &SolverOptions) -> Result<SolveReport> {
        match self.family {
            Family::LowerOrder | Family::LowerOrderCritical => {
                picard_solve(&self.problem, &self.grid, BudgetConstants { c0: self.c0, m: 1.0 }, opts)
            }
            Family::MixedScale => mixed_scale_solve(&self.problem, &self.grid, self.aux, self.c0, opts),
            Family::TraceValued => r1_solve(&self.problem, &self.grid, None, self.quadrature, self.c0, opts),
        }
    }

    /// Direct reference solve on the grid refined `refinement` times.
    pub fn oracle(&self, refinement: usize) -> Result<GridFunction> {
        oracle_solve(&self.problem, &self.grid, refinement)
    }

    /// The same forcing with `fraction` of slot 1 moved into slot 0.
    pub fn shifted(&self, fraction: f64) -> Result<Self> {
        if self.problem.f.len() < 2 {
            return invalid("shifting needs at least two forcing slots");
        }
        let mut out = self.clone();
        let moved = self.problem.f[1].f.clone().scaled(fraction);
        out.problem.f[1].f = self.problem.f[1].f.clone().scaled(1.0 - fraction);
        out.problem.f[0].f = self.problem.f[0].f.clone().plus(moved)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenarios_are_reproducible_and_valid() {
        for s in Family::ALL {
            let a = Scenario::random(s, 4, 16, 7).unwrap();
            assert_eq!(a, Scenario::random(s, 4, 16, 7).unwrap());
            assert_ne!(a.problem.u0, Scenario::random(s, 4, 16, 8).unwrap().problem.u0);
        }
    }

    #[test]
    fn shifting_keeps_the_total_forcing() {
        let s = Scenario::random(Family::MixedScale, 3, 8, 1).unwrap();
        let t = s.shifted(0.4).unwrap();
        for x in [0.1, 0.5, 0.9] {
            let a = s.problem.total_forcing().eval(x);
            let b = t.problem.total_forcing().eval(x);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-12);
            }
        }
        assert!(Scenario::random(Family::LowerOrder, 3, 8, 1).unwrap().shifted(0.5).is_err());
    }
}
