//! Exact rational bookkeeping for exponent triples `(r, ν, γ)` relative to a
//! base pair `(p, κ)`.
//!
//! A perturbation mapping `X_1` into `X_γ` with a time envelope `b` is
//! controlled through the space `L^r(w_ν; X_γ)`; the triple has to fit the
//! base space `L^p(w_κ; X_0)` in the sense checked by [`is_admissible`].

use std::fmt;

use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{parameter, Error, Result};

/// Exact rational number.
pub type Q = Ratio<i128>;

/// Parses `"4/3"`, `"2"`, `"-1"` or a terminating decimal such as `"0.125"`.
pub fn parse_rational(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Invalid(format!("cannot read {s:?} as a rational number"));
    if let Some((n, d)) = s.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|_| bad())?;
        let d: i128 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Q::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || frac.len() > 18 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = int.starts_with('-');
        let ip: i128 = if int.is_empty() || int == "-" { 0 } else { int.parse::<i128>().map_err(|_| bad())?.abs() };
        let den = 10i128.pow(frac.len() as u32);
        let fp: i128 = frac.parse().map_err(|_| bad())?;
        let v = Q::new(ip * den + fp, den);
        return Ok(if neg { -v } else { v });
    }
    Ok(Q::from_integer(s.parse().map_err(|_| bad())?))
}

pub fn to_f64(q: &Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

fn show(q: &Q) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Exponent triple of a mixed-scale perturbation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub r: Q,
    pub nu: Q,
    pub gamma: Q,
}

impl Triple {
    pub fn new(r: Q, nu: Q, gamma: Q) -> Self {
        Self { r, nu, gamma }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(r, ν, γ) = ({}, {}, {})", show(&self.r), show(&self.nu), show(&self.gamma))
    }
}

/// One clause of the admissibility conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Clause {
    GammaOpenUnit,
    GammaBelowTop,
    NuNonNegative,
    RAboveNuPlusOne,
    RAtMostP,
    WeightRatio,
    GapPositive,
    GapAtMostGamma,
}

impl Clause {
    pub fn label(self) -> &'static str {
        match self {
            Clause::GammaOpenUnit => "0 < γ < 1",
            Clause::GammaBelowTop => "γ ≤ γ*",
            Clause::NuNonNegative => "ν ≥ 0",
            Clause::RAboveNuPlusOne => "ν+1 < r",
            Clause::RAtMostP => "r ≤ p",
            Clause::WeightRatio => "κ/p ≤ ν/r",
            Clause::GapPositive => "(1+κ)/p < (1+ν)/r",
            Clause::GapAtMostGamma => "(1+ν)/r ≤ (1+κ)/p + γ",
        }
    }
}

/// Outcome of [`is_admissible`], listing every clause that fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub failed: Vec<Clause>,
}

impl Verdict {
    pub fn admissible(&self) -> bool {
        self.failed.is_empty()
    }

    pub fn reason(&self) -> String {
        if self.failed.is_empty() {
            return "admissible".to_string();
        }
        let labels: Vec<&str> = self.failed.iter().map(|c| c.label()).collect();
        format!("violates {}", labels.join("; "))
    }
}

fn check_base(p: &Q, kappa: &Q) -> Result<()> {
    if *p <= Q::one() {
        return parameter(format!("p = {} must exceed 1", show(p)));
    }
    if kappa.is_negative() || *kappa >= p - Q::one() {
        return parameter(format!("κ = {} must lie in [0, p-1)", show(kappa)));
    }
    Ok(())
}

/// Checks whether `triple` is `(p, κ)`-admissible for a scale whose top
/// fractional level is `gamma_star`:
/// `γ ∈ (0,1) ∩ (0,γ*]`, `ν ≥ 0`, `ν+1 < r ≤ p`, `κ/p ≤ ν/r` and
/// `(1+κ)/p < (1+ν)/r ≤ (1+κ)/p + γ`.
pub fn is_admissible(p: &Q, kappa: &Q, triple: &Triple, gamma_star: &Q) -> Result<Verdict> {
    check_base(p, kappa)?;
    if triple.r <= Q::zero() {
        return parameter(format!("r = {} must be positive", show(&triple.r)));
    }
    let Triple { r, nu, gamma } = triple;
    let one = Q::one();
    let mut failed = Vec::new();
    if !(gamma.is_positive() && *gamma < one) {
        failed.push(Clause::GammaOpenUnit);
    }
    if gamma > gamma_star {
        failed.push(Clause::GammaBelowTop);
    }
    if nu.is_negative() {
        failed.push(Clause::NuNonNegative);
    }
    if !(nu + one < *r) {
        failed.push(Clause::RAboveNuPlusOne);
    }
    if r > p {
        failed.push(Clause::RAtMostP);
    }
    if kappa / p > nu / r {
        failed.push(Clause::WeightRatio);
    }
    let lhs = (one + kappa) / p;
    let mid = (one + nu) / r;
    if !(lhs < mid) {
        failed.push(Clause::GapPositive);
    }
    if mid > lhs + gamma {
        failed.push(Clause::GapAtMostGamma);
    }
    Ok(Verdict { failed })
}

/// Envelope exponents `(q, μ)` with `b ∈ L^q(w_μ)` making the weighted
/// Hölder inequality
/// `|b v|_{L^r(w_ν)} <= |b|_{L^q(w_μ)} |v|_{L^p(w_κ)}` hold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum HolderExponents {
    Finite { q: Q, mu: Q },
    /// `r = p`: the only envelope compatible with the inequality is zero.
    ZeroEnvelope,
}

/// `q = pr/(p-r)`, `μ = (νp - κr)/(p-r)`.
pub fn holder_exponents(p: &Q, kappa: &Q, r: &Q, nu: &Q) -> Result<HolderExponents> {
    if !r.is_positive() {
        return parameter(format!("r = {} must be positive", show(r)));
    }
    if r > p {
        return parameter(format!("r = {} exceeds p = {}", show(r), show(p)));
    }
    if r == p {
        return Ok(HolderExponents::ZeroEnvelope);
    }
    let d = p - r;
    Ok(HolderExponents::Finite { q: p * r / d, mu: (nu * p - kappa * r) / d })
}

/// Parameters when the perturbation is only bounded on the intermediate
/// level `β ∈ [1 - (1+κ)/p, 1]`: `θ = 1 - (1-β)p/(1+κ)`,
/// `q = pr/(p - rθ)`, `μ = (νp - κrθ)/(p - rθ)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneralizedParams {
    pub theta: Q,
    pub exponents: HolderExponents,
}

pub fn generalized_b_params(p: &Q, kappa: &Q, r: &Q, nu: &Q, beta: &Q) -> Result<GeneralizedParams> {
    check_base(p, kappa)?;
    let one = Q::one();
    let lo = one - (one + kappa) / p;
    if *beta < lo || *beta > one {
        return parameter(format!("β = {} outside [{}, 1]", show(beta), show(&lo)));
    }
    if !r.is_positive() || r > p {
        return parameter(format!("r = {} must lie in (0, p]", show(r)));
    }
    let theta = one - (one - beta) * p / (one + kappa);
    let d = p - r * theta;
    let exponents = if d.is_zero() {
        HolderExponents::ZeroEnvelope
    } else {
        HolderExponents::Finite { q: p * r / d, mu: (nu * p - kappa * r * theta) / d }
    };
    Ok(GeneralizedParams { theta, exponents })
}

/// Intermediate exponents `(r̂, ν̂, s, ŝ)` realising the embedding chain
/// between `L^r(w_ν)` and `L^p(w_κ)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub r_hat: Q,
    pub nu_hat: Q,
    pub s: Q,
    pub s_hat: Q,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Feasibility {
    Feasible(Witness),
    /// Names the inequality of the system that cannot be met.
    Infeasible(String),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

/// The inequality system a witness must satisfy. Returns the first violated
/// inequality.
pub fn check_witness(p: &Q, kappa: &Q, r: &Q, nu: &Q, gamma: &Q, w: &Witness) -> std::result::Result<(), &'static str> {
    let one = Q::one();
    if !w.r_hat.is_positive() {
        return Err("r̂ > 0");
    }
    if !(p >= &w.r_hat && &w.r_hat >= r) {
        return Err("p ≥ r̂ ≥ r");
    }
    let y = w.nu_hat / w.r_hat;
    if !(kappa / p <= y && y <= nu / r) {
        return Err("κ/p ≤ ν̂/r̂ ≤ ν/r");
    }
    let m = (one + w.nu_hat) / w.r_hat;
    let a = (one + kappa) / p;
    let b = (one + nu) / r;
    if !(a < m && m < b) {
        return Err("(1+κ)/p < (1+ν̂)/r̂ < (1+ν)/r");
    }
    if w.s > m - b {
        return Err("s ≤ (1+ν̂)/r̂ - (1+ν)/r");
    }
    if w.s < -*gamma + m - a {
        return Err("s ≥ -γ + (1+ν̂)/r̂ - (1+κ)/p");
    }
    if w.s_hat != w.s + gamma {
        return Err("ŝ = s + γ");
    }
    Ok(())
}

/// Solves the embedding inequality system deterministically: `(1+ν̂)/r̂` is
/// the midpoint of `((1+κ)/p, (1+ν)/r)`, `ν̂/r̂` the smallest value keeping
/// `r̂ >= r`, and `s` sits at its upper bound.
pub fn embedding_feasibility(p: &Q, kappa: &Q, r: &Q, nu: &Q, gamma: &Q) -> Result<Feasibility> {
    check_base(p, kappa)?;
    if !r.is_positive() {
        return parameter(format!("r = {} must be positive", show(r)));
    }
    let one = Q::one();
    let two = Q::from_integer(2);
    if r > p {
        return Ok(Feasibility::Infeasible("p ≥ r̂ ≥ r".into()));
    }
    if kappa / p > nu / r {
        return Ok(Feasibility::Infeasible("κ/p ≤ ν̂/r̂ ≤ ν/r".into()));
    }
    let a = (one + kappa) / p;
    let b = (one + nu) / r;
    if a >= b {
        return Ok(Feasibility::Infeasible("(1+κ)/p < (1+ν̂)/r̂ < (1+ν)/r".into()));
    }
    let m = (a + b) / two;
    let y = std::cmp::max(kappa / p, m - one / r);
    let r_hat = one / (m - y);
    let nu_hat = y * r_hat;
    let s = m - b;
    let w = Witness { r_hat, nu_hat, s, s_hat: s + gamma };
    match check_witness(p, kappa, r, nu, gamma, &w) {
        Ok(()) => Ok(Feasibility::Feasible(w)),
        Err(clause) => Ok(Feasibility::Infeasible(clause.into())),
    }
}

/// Closed-form criterion for solvability of the embedding system:
/// `r ≤ p`, `κ/p ≤ ν/r` and `(1+κ)/p < (1+ν)/r ≤ (1+κ)/p + γ`.
pub fn admissible_for_embedding(p: &Q, kappa: &Q, r: &Q, nu: &Q, gamma: &Q) -> bool {
    let one = Q::one();
    let a = (one + kappa) / p;
    let b = (one + nu) / r;
    r <= p && kappa / p <= nu / r && a < b && b <= a + gamma
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i128, d: i128) -> Q {
        Q::new(n, d)
    }

    #[test]
    fn parses_rationals() {
        assert_eq!(parse_rational("4/3").unwrap(), q(4, 3));
        assert_eq!(parse_rational(" 2 ").unwrap(), q(2, 1));
        assert_eq!(parse_rational("0.125").unwrap(), q(1, 8));
        assert_eq!(parse_rational("-1.5").unwrap(), q(-3, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn demo_triple_is_admissible() {
        let t = Triple::new(q(4, 3), q(0, 1), q(1, 2));
        let v = is_admissible(&q(4, 1), &q(0, 1), &t, &q(1, 1)).unwrap();
        assert!(v.admissible(), "{}", v.reason());
    }

    #[test]
    fn failed_clauses_are_named() {
        let t = Triple::new(q(1, 1), q(0, 1), q(1, 2));
        let v = is_admissible(&q(4, 1), &q(0, 1), &t, &q(1, 1)).unwrap();
        assert!(v.reason().contains("ν+1 < r"));
        let t = Triple::new(q(2, 1), q(0, 1), q(1, 8));
        let v = is_admissible(&q(4, 1), &q(0, 1), &t, &q(1, 1)).unwrap();
        assert_eq!(v.failed, vec![Clause::GapAtMostGamma]);
        let t = Triple::new(q(2, 1), q(0, 1), q(3, 4));
        let v = is_admissible(&q(4, 1), &q(0, 1), &t, &q(1, 2)).unwrap();
        assert_eq!(v.failed, vec![Clause::GammaBelowTop]);
    }

    #[test]
    fn holder_regression() {
        assert_eq!(
            holder_exponents(&q(2, 1), &q(0, 1), &q(1, 1), &q(0, 1)).unwrap(),
            HolderExponents::Finite { q: q(2, 1), mu: q(0, 1) }
        );
        assert_eq!(holder_exponents(&q(3, 1), &q(1, 2), &q(3, 1), &q(1, 1)).unwrap(), HolderExponents::ZeroEnvelope);
        assert!(holder_exponents(&q(2, 1), &q(0, 1), &q(3, 1), &q(0, 1)).is_err());
    }

    #[test]
    fn generalized_regression() {
        let g = generalized_b_params(&q(4, 1), &q(0, 1), &q(4, 3), &q(0, 1), &q(7, 8)).unwrap();
        assert_eq!(g.theta, q(1, 2));
        assert_eq!(g.exponents, HolderExponents::Finite { q: q(8, 5), mu: q(0, 1) });
        // β = 1 recovers the plain Hölder pair
        let g = generalized_b_params(&q(4, 1), &q(1, 2), &q(2, 1), &q(1, 4), &q(1, 1)).unwrap();
        assert_eq!(g.exponents, holder_exponents(&q(4, 1), &q(1, 2), &q(2, 1), &q(1, 4)).unwrap());
        assert!(generalized_b_params(&q(4, 1), &q(0, 1), &q(4, 3), &q(0, 1), &q(1, 2)).is_err());
    }

    #[test]
    fn witness_regression() {
        let f = embedding_feasibility(&q(4, 1), &q(0, 1), &q(4, 3), &q(0, 1), &q(1, 2)).unwrap();
        assert_eq!(
            f,
            Feasibility::Feasible(Witness { r_hat: q(2, 1), nu_hat: q(0, 1), s: q(-1, 4), s_hat: q(1, 4) })
        );
    }

    #[test]
    fn infeasible_names_inequality() {
        let f = embedding_feasibility(&q(4, 1), &q(0, 1), &q(2, 1), &q(0, 1), &q(1, 8)).unwrap();
        assert!(matches!(f, Feasibility::Infeasible(ref s) if s.contains("s ≥")));
        let f = embedding_feasibility(&q(2, 1), &q(0, 1), &q(3, 1), &q(0, 1), &q(1, 2)).unwrap();
        assert_eq!(f, Feasibility::Infeasible("p ≥ r̂ ≥ r".into()));
    }
}
