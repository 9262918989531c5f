use crate::error::{parameter, Error, Result};
use crate::problems::Profile;

/// Envelope with the weighted Lebesgue space it is measured in,
/// `L^q(w_μ)`.
#[derive(Debug, Clone, Copy)]
pub struct Envelope<'a> {
    pub profile: &'a Profile,
    pub q: f64,
    pub mu: f64,
}

impl Envelope<'_> {
    pub fn norm(&self, a: f64, b: f64) -> Result<f64> {
        self.profile.weighted_norm(a, b, self.q, self.mu)
    }
}

const MAX_PIECES: usize = 1_000_000;

/// Splits `[0, T]` into pieces on which the summed envelope norms
/// `Σ_i |b_i|_{L^{q_i}(w_{μ_i}; τ_n, τ_{n+1})}` equal `budget`; the last piece
/// is capped at `T`. Returns `0 = τ_0 < ... < τ_N = T`.
pub fn partition_by_budget(envelopes: &[Envelope<'_>], budget: f64, horizon: f64) -> Result<Vec<f64>> {
    if !(budget > 0.0 && budget.is_finite()) {
        return parameter(format!("budget = {budget} must be positive"));
    }
    if !(horizon > 0.0) {
        return parameter(format!("horizon T = {horizon} must be positive"));
    }
    for e in envelopes {
        // class membership on (0, T)
        e.norm(0.0, horizon).map_err(|err| match err {
            Error::NotIntegrable { a, b, .. } => Error::NotIntegrable {
                a,
                b,
                detail: format!("envelope is not in L^{}(w_{}) on (0, {horizon})", e.q, e.mu),
            },
            other => other,
        })?;
    }
    let total = |a: f64, b: f64| -> f64 { envelopes.iter().map(|e| e.norm(a, b).unwrap_or(f64::INFINITY)).sum() };
    let mut points = vec![0.0];
    let mut tau = 0.0;
    while tau < horizon {
        if points.len() > MAX_PIECES {
            return parameter("budget partition exceeds one million pieces");
        }
        if total(tau, horizon) <= budget * (1.0 + 1e-9) {
            points.push(horizon);
            break;
        }
        let next = if envelopes.len() == 1 {
            let e = envelopes[0];
            e.profile.invert_power_integral(tau, budget.powf(e.q), e.q, e.mu, horizon)
        } else {
            let (mut lo, mut hi) = (tau, horizon);
            let tol = 1e-12 * budget;
            let mut mid = 0.5 * (lo + hi);
            for _ in 0..200 {
                mid = 0.5 * (lo + hi);
                let v = total(tau, mid);
                if (v - budget).abs() <= tol || hi - lo <= 1e-15 * hi {
                    break;
                }
                if v < budget {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            mid
        };
        if !(next > tau) {
            return parameter(format!("budget partition stalled at t = {tau}"));
        }
        tau = next.min(horizon);
        points.push(tau);
    }
    Ok(points)
}

/// `1 + Σ_i (m |b_i|_{L^{q_i}(w_{μ_i}; 0, T)} / budget)^{q_i}` for `m`
/// envelopes: on every full piece some envelope carries at least
/// `budget / m`. One extra piece is allowed for the capped final interval.
pub fn partition_count_bound(envelopes: &[Envelope<'_>], budget: f64, horizon: f64) -> Result<f64> {
    let m = envelopes.len().max(1) as f64;
    let mut s = 1.0;
    for e in envelopes {
        s += (m * e.norm(0.0, horizon)? / budget).powf(e.q);
    }
    Ok(s + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_envelope_gives_equal_pieces() {
        let b = Profile::constant(1.0);
        let e = Envelope { profile: &b, q: 2.0, mu: 0.0 };
        let pts = partition_by_budget(&[e], 0.25, 1.0).unwrap();
        assert_eq!(pts.len(), 17);
        for (n, t) in pts.iter().enumerate() {
            assert!((t - n as f64 / 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_envelope_is_one_piece() {
        let b = Profile::Zero;
        let pts = partition_by_budget(&[Envelope { profile: &b, q: 3.0, mu: 0.0 }], 0.1, 2.0).unwrap();
        assert_eq!(pts, vec![0.0, 2.0]);
    }

    #[test]
    fn critical_envelope_is_rejected() {
        let b = Profile::power(1.0, 0.5);
        let r = partition_by_budget(&[Envelope { profile: &b, q: 2.0, mu: 0.0 }], 0.1, 1.0);
        assert!(matches!(r, Err(Error::NotIntegrable { .. })));
    }

    #[test]
    fn pieces_carry_the_budget() {
        let b1 = Profile::power(0.5, 0.125);
        let b2 = Profile::Steps { breaks: vec![0.0, 0.3, 1.0], values: vec![2.0, 0.5] };
        let env = [Envelope { profile: &b1, q: 4.0, mu: 0.0 }, Envelope { profile: &b2, q: 2.0, mu: 0.5 }];
        let pts = partition_by_budget(&env, 0.2, 1.0).unwrap();
        for w in pts.windows(2).take(pts.len() - 2) {
            let s: f64 = env.iter().map(|e| e.norm(w[0], w[1]).unwrap()).sum();
            assert!((s - 0.2).abs() < 1e-9, "{s}");
        }
        let n = (pts.len() - 1) as f64;
        assert!(n <= partition_count_bound(&env, 0.2, 1.0).unwrap());
    }
}
