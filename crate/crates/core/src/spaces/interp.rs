use super::scale::HilbertScale;
use crate::error::{parameter, Result};

/// Quadrature points per decade of `t` in the K-functional integral.
pub const POINTS_PER_DECADE: f64 = 200.0;

/// Real interpolation norm of the couple `(X_0, X_{1+γ*})` built from the
/// quadratic K-functional
/// `K_2(t, x)^2 = Σ_i t^2 μ_i^2 / (1 + t^2 μ_i^2) x_i^2`, `μ_i = λ_i^{1+γ*}`:
/// `|x|_{θ,q} = (∫_0^∞ (t^{-θ} K_2(t, x))^q dt/t)^{1/q}`.
///
/// The integral runs over a log-spaced grid from `1e-6 / μ_n` to
/// `1e6 / μ_1` (trapezoid in `ln t`) with the two power-law tails added in
/// closed form. `q = ∞` takes the supremum over the grid instead.
#[derive(Debug, Clone)]
pub struct InterpNorm {
    theta: f64,
    q: f64,
    mu: Vec<f64>,
    ts: Vec<f64>,
    step: f64,
    /// Norms of the unit vectors, used for vectors with one nonzero entry.
    unit: Vec<f64>,
}

impl InterpNorm {
    pub fn new(scale: &HilbertScale, theta: f64, q: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return parameter(format!("theta = {theta} not in (0, 1)"));
        }
        if !(q >= 1.0) {
            return parameter(format!("q = {q} must be at least 1"));
        }
        let e = 1.0 + scale.gamma_star();
        let mu: Vec<f64> = scale.eigenvalues().iter().map(|l| l.powf(e)).collect();
        let lo = (1e-6 / mu[mu.len() - 1]).ln();
        let hi = (1e6 / mu[0]).ln();
        let decades = (hi - lo) / std::f64::consts::LN_10;
        let n = (decades * POINTS_PER_DECADE).ceil().max(1.0) as usize;
        let step = (hi - lo) / n as f64;
        let ts = (0..=n).map(|i| (lo + step * i as f64).exp()).collect();
        let mut out = Self { theta, q, mu, ts, step, unit: Vec::new() };
        out.unit = (0..out.mu.len()).map(|k| out.integrate(&[(1.0, out.mu[k])])).collect();
        Ok(out)
    }

    /// Norm of the trace-type space `X_{s,q}`, realised with `θ = s / (1 + γ*)`.
    pub fn for_level(scale: &HilbertScale, level: f64, q: f64) -> Result<Self> {
        Self::new(scale, level / (1.0 + scale.gamma_star()), q)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        let mut nz: Vec<(f64, f64)> = Vec::new();
        let mut last = 0;
        for (k, (v, m)) in x.iter().zip(&self.mu).enumerate() {
            if *v != 0.0 {
                nz.push((v * v, *m));
                last = k;
            }
        }
        match nz.len() {
            0 => 0.0,
            1 => x[last].abs() * self.unit[last],
            _ => self.integrate(&nz),
        }
    }

    /// Norm of the vector with squared entries `x2` at `μ = m`, `(x2, m)`.
    fn integrate(&self, nz: &[(f64, f64)]) -> f64 {
        let k2 = |t: f64| -> f64 {
            nz.iter()
                .map(|&(x2, m)| {
                    let s = t * m;
                    let s2 = s * s;
                    x2 * s2 / (1.0 + s2)
                })
                .sum()
        };
        let th = self.theta;
        if self.q.is_infinite() {
            return self
                .ts
                .iter()
                .map(|&t| t.powf(-th) * k2(t).sqrt())
                .fold(0.0, f64::max);
        }
        let q = self.q;
        let half = 0.5 * q;
        let integrand = |t: f64| -> f64 {
            let k = k2(t);
            if q == 2.0 {
                k / (t * t).powf(th)
            } else {
                t.powf(-th * q) * k.powf(half)
            }
        };
        let n = self.ts.len();
        let mut s = 0.5 * (integrand(self.ts[0]) + integrand(self.ts[n - 1]));
        for &t in &self.ts[1..n - 1] {
            s += integrand(t);
        }
        s *= self.step;
        let t0 = self.ts[0];
        let t1 = self.ts[n - 1];
        let s1: f64 = nz.iter().map(|&(x2, m)| x2 * m * m).sum();
        let s0: f64 = nz.iter().map(|&(x2, _)| x2).sum();
        s += s1.powf(half) * t0.powf(q * (1.0 - th)) / (q * (1.0 - th));
        s += s0.powf(half) * t1.powf(-th * q) / (th * q);
        s.powf(1.0 / q)
    }
}

/// One-shot version of [`InterpNorm::norm`].
pub fn real_interp_norm(x: &[f64], theta: f64, q: f64, scale: &HilbertScale) -> Result<f64> {
    Ok(InterpNorm::new(scale, theta, q)?.norm(x))
}

/// K-functional `inf_{x = x0 + x1} |x0|_0 + t |x1|_{1+γ*}` of the diagonal
/// couple. Minimisers are of the form `x1_i = x_i / (1 + ρ μ_i^2)`, so a
/// log-spaced scan over `ρ` suffices. Used to check the quadratic surrogate:
/// `K_2 <= K <= sqrt(2) K_2`.
pub fn k_functional_bruteforce(x: &[f64], t: f64, scale: &HilbertScale) -> f64 {
    let e = 1.0 + scale.gamma_star();
    let mu: Vec<f64> = scale.eigenvalues().iter().map(|l| l.powf(e)).collect();
    let cost = |rho: f64| -> f64 {
        let mut n0 = 0.0;
        let mut n1 = 0.0;
        for (xi, m) in x.iter().zip(&mu) {
            let c = 1.0 / (1.0 + rho * m * m);
            let x0 = (1.0 - c) * xi;
            let x1 = c * xi;
            n0 += x0 * x0;
            n1 += (m * x1) * (m * x1);
        }
        n0.sqrt() + t * n1.sqrt()
    };
    // include the trivial splittings
    let mut best = cost(0.0).min(cost(1e300));
    let mut rho = 1e-30;
    while rho < 1e30 {
        best = best.min(cost(rho));
        rho *= 1.005;
    }
    best
}
