use std::sync::Arc;

use num_rational::Ratio;
use num_traits::One;
use proptest::prelude::*;

use mrlab::admissibility::{embedding_feasibility, holder_exponents, is_admissible, Feasibility, HolderExponents, Triple, Q};
use mrlab::problems::{Op, OperatorFamily, Perturbation, PerturbationComponent, Problem, Profile, Slot, TimeFunction};
use mrlab::solver::{partition_by_budget, partition_count_bound, picard_solve, BudgetConstants, Envelope, SolverOptions};
use mrlab::spaces::{weighted_lp_norm, GridFunction, HilbertScale, Span, TimeGrid};
use mrlab::verify::{drift, nondecreasing};

fn rational(max: i128) -> impl Strategy<Value = Q> {
    (0..=max * 24, 1..=24i128).prop_map(|(n, d)| Ratio::new(n, d) / Ratio::from_integer(24))
}

/// `∫_a^b t^μ dt`.
fn power_integral(a: f64, b: f64, mu: f64) -> f64 {
    (b.powf(mu + 1.0) - a.powf(mu + 1.0)) / (mu + 1.0)
}

/// `(Σ_k |v_k|^q ∫_{t_k}^{t_{k+1}} t^μ)^{1/q}` on the uniform partition of `[0, 1]`.
fn step_norm(values: &[f64], q: f64, mu: f64) -> f64 {
    let n = values.len() as f64;
    let s: f64 = values
        .iter()
        .enumerate()
        .map(|(k, v)| v.abs().powf(q) * power_integral(k as f64 / n, (k + 1) as f64 / n, mu))
        .sum();
    s.powf(1.0 / q)
}

fn steps(values: Vec<f64>) -> Profile {
    let n = values.len();
    Profile::Steps { breaks: (0..=n).map(|k| k as f64 / n as f64).collect(), values }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn holder_exponents_balance(p in rational(6), kappa in rational(3), r in rational(6), nu in rational(4)) {
        let one = Q::one();
        prop_assume!(p > one && kappa < p - one && r > Ratio::from_integer(0) && r < p);
        let HolderExponents::Finite { q, mu } = holder_exponents(&p, &kappa, &r, &nu).unwrap() else {
            panic!("r < p gives a finite pair");
        };
        // 1/r = 1/q + 1/p and ν/r = μ/q + κ/p
        prop_assert_eq!(one / r, one / q + one / p);
        prop_assert_eq!(nu / r, mu / q + kappa / p);
    }

    #[test]
    fn admissible_triples_have_valid_witnesses(
        p in rational(6), kappa in rational(3), r in rational(6), nu in rational(3), gamma in rational(1),
    ) {
        let one = Q::one();
        prop_assume!(p > one && kappa < p - one && r > Ratio::from_integer(0));
        let verdict = is_admissible(&p, &kappa, &Triple::new(r, nu, gamma), &one).unwrap();
        let feasible = embedding_feasibility(&p, &kappa, &r, &nu, &gamma).unwrap();
        if verdict.admissible() {
            let Feasibility::Feasible(w) = feasible else { panic!("admissible but infeasible") };
            prop_assert!(w.r_hat >= r && w.r_hat <= p);
            prop_assert_eq!(w.s_hat, w.s + gamma);
        }
    }

    #[test]
    fn step_norms_match_closed_form(values in prop::collection::vec(-3.0..3.0f64, 1..12), q in 1.0..6.0f64, mu in -0.5..2.0f64) {
        let lib = steps(values.clone()).weighted_norm(0.0, 1.0, q, mu).unwrap();
        let exact = step_norm(&values, q, mu);
        prop_assert!((lib - exact).abs() <= 1e-12 * exact.max(1.0), "{} {}", lib, exact);
    }

    #[test]
    fn weighted_holder_inequality(
        b in prop::collection::vec(-3.0..3.0f64, 8),
        v in prop::collection::vec(-3.0..3.0f64, 8),
        p in 2.0..6.0f64, rf in 0.1..0.9f64, kappa in 0.0..0.9f64, nu in 0.0..2.0f64,
    ) {
        let r = 1.0 + rf * (p - 1.0);
        let q = p * r / (p - r);
        let mu = (nu * p - kappa * r) / (p - r);
        prop_assume!(mu > -1.0);
        let bv: Vec<f64> = b.iter().zip(&v).map(|(x, y)| x * y).collect();
        let lhs = steps(bv).weighted_norm(0.0, 1.0, r, nu).unwrap();
        let rhs = step_norm(&b, q, mu) * step_norm(&v, p, kappa);
        prop_assert!(lhs <= rhs * (1.0 + 1e-10), "{} > {}", lhs, rhs);
    }

    #[test]
    fn partition_respects_count_bound(coef in 0.1..4.0f64, alpha in 0.0..0.24f64, budget in 0.05..1.0f64, q in 2.0..4.0f64) {
        prop_assume!(alpha * q < 0.95);
        let total = (coef.powf(q) / (1.0 - alpha * q)).powf(1.0 / q);
        // the library refuses partitions beyond a million pieces
        prop_assume!((total / budget).powf(q) < 1e5);
        let b = Profile::power(coef, alpha);
        let env = Envelope { profile: &b, q, mu: 0.0 };
        let pts = partition_by_budget(&[env], budget, 1.0).unwrap();
        prop_assert_eq!(pts[0], 0.0);
        prop_assert_eq!(*pts.last().unwrap(), 1.0);
        prop_assert!(pts.windows(2).all(|w| w[1] > w[0]));
        // every piece but the last carries exactly the budget
        for w in pts.windows(2).take(pts.len() - 2) {
            let piece = (coef.powf(q) * power_integral(w[0], w[1], -alpha * q)).powf(1.0 / q);
            prop_assert!((piece - budget).abs() <= 1e-8 * budget, "{} vs {}", piece, budget);
        }
        let bound = partition_count_bound(&[env], budget, 1.0).unwrap();
        prop_assert!(((pts.len() - 1) as f64) <= bound);
        prop_assert!((bound - 2.0 - (total / budget).powf(q)).abs() <= 1e-9 * bound);
    }

    #[test]
    fn drift_is_scale_free(values in prop::collection::vec(0.1..10.0f64, 1..10), c in 0.01..100.0f64) {
        let scaled: Vec<f64> = values.iter().map(|x| c * x).collect();
        let d = drift(&values);
        prop_assert!(d >= 0.0);
        prop_assert!((drift(&scaled) - d).abs() <= 1e-12 * (1.0 + d));
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assert!(nondecreasing(&sorted));
    }

    #[test]
    fn lp_norm_is_a_norm(
        x in prop::collection::vec(-2.0..2.0f64, 33 * 2),
        y in prop::collection::vec(-2.0..2.0f64, 33 * 2),
        c in -5.0..5.0f64, p in 1.0..5.0f64, level in 0.0..1.0f64,
    ) {
        let grid = Arc::new(TimeGrid::graded(1.0, 32, 2.0).unwrap());
        let scale = HilbertScale::new(vec![1.0, 9.0], 1.0).unwrap();
        let span = Span::full(&grid);
        let u = GridFunction::from_values(grid.clone(), 2, x).unwrap();
        let v = GridFunction::from_values(grid.clone(), 2, y).unwrap();
        let n = |w: &GridFunction| weighted_lp_norm(w, p, 0.0, level, &scale, span).unwrap();
        prop_assert!((n(&u.scaled(c)) - c.abs() * n(&u)).abs() <= 1e-10 * (1.0 + n(&u)));
        prop_assert!(n(&u.add(&v)) <= (n(&u) + n(&v)) * (1.0 + 1e-12));
    }
}

fn diagonal_problem(u0: Vec<f64>, forcing: Vec<f64>, alpha: f64, sign: f64) -> Problem {
    let eig = vec![1.0, 4.0, 9.0];
    let c = PerturbationComponent::lower_order(4.0, Profile::power(0.5, alpha), sign).unwrap();
    Problem {
        scale: HilbertScale::new(eig.clone(), 1.0).unwrap(),
        a: OperatorFamily::autonomous(Op::Diagonal(eig)),
        b: Perturbation::single(c),
        f: vec![Slot { f: TimeFunction::term(Profile::constant(1.0), forcing), r: 2.0, nu: 0.0, gamma: 0.0 }],
        u0,
        p: 2.0,
        kappa: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solutions_scale_linearly_with_data(
        u0 in prop::collection::vec(-2.0..2.0f64, 3),
        f in prop::collection::vec(-2.0..2.0f64, 3),
        c in -4.0..4.0f64, alpha in 0.0..0.2f64, sign in prop::bool::ANY,
    ) {
        let sign = if sign { 1.0 } else { -1.0 };
        let grid = TimeGrid::graded(1.0, 64, 2.0).unwrap();
        let consts = BudgetConstants { c0: 1.0, m: 1.0 };
        let opts = SolverOptions { tol: 1e-13, ..SolverOptions::default() };
        let base = picard_solve(&diagonal_problem(u0.clone(), f.clone(), alpha, sign), &grid, consts, &opts).unwrap();
        let scaled_data = diagonal_problem(u0.iter().map(|x| c * x).collect(), f.iter().map(|x| c * x).collect(), alpha, sign);
        let scaled = picard_solve(&scaled_data, &grid, consts, &opts).unwrap();
        let size = base.trajectory.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (a, b) in base.trajectory.values().iter().zip(scaled.trajectory.values()) {
            prop_assert!((c * a - b).abs() <= 1e-9 * (1.0 + c.abs()) * (1.0 + size));
        }
    }
}
