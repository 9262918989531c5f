use serde::{Deserialize, Serialize};

use crate::error::{invalid, parameter, Result};

/// Diagonal Hilbert scale: `X_γ` is `R^n` with `|x|_γ = |(λ_i^γ x_i)|_2`.
///
/// Eigenvalues are sorted ascending and bounded below by one, so the levels
/// are nested with `|x|_α <= |x|_β` for `α <= β`. `gamma_star` is the
/// highest fractional level above `X_1` that the scale is used with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HilbertScale {
    eigenvalues: Vec<f64>,
    gamma_star: f64,
}

impl HilbertScale {
    pub fn new(eigenvalues: Vec<f64>, gamma_star: f64) -> Result<Self> {
        if eigenvalues.is_empty() {
            return invalid("scale needs at least one eigenvalue");
        }
        if !(gamma_star > 0.0 && gamma_star <= 1.0) {
            return parameter(format!("gamma_star = {gamma_star} not in (0, 1]"));
        }
        for (i, &l) in eigenvalues.iter().enumerate() {
            if !l.is_finite() {
                return invalid(format!("eigenvalue {i} is not finite"));
            }
            if l < 1.0 {
                return invalid(format!("eigenvalue {i} = {l} is below 1"));
            }
            if i > 0 && l < eigenvalues[i - 1] {
                return invalid("eigenvalues must be sorted ascending");
            }
        }
        Ok(Self { eigenvalues, gamma_star })
    }

    /// Dirichlet Laplacian on (0, 1) shifted by one: `λ_i = 1 + (iπ)^2`.
    pub fn heat(n: usize, gamma_star: f64) -> Result<Self> {
        let pi = std::f64::consts::PI;
        Self::new((1..=n).map(|i| 1.0 + (i as f64 * pi).powi(2)).collect(), gamma_star)
    }

    /// Log-uniform spectrum `λ_i = ratio^i`, `i = 0..n`.
    pub fn geometric(n: usize, ratio: f64, gamma_star: f64) -> Result<Self> {
        if !(ratio >= 1.0) {
            return parameter(format!("ratio = {ratio} must be at least 1"));
        }
        Self::new((0..n).map(|i| ratio.powi(i as i32)).collect(), gamma_star)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn gamma_star(&self) -> f64 {
        self.gamma_star
    }

    /// Per-coordinate factors `λ_i^γ`.
    pub fn level_weights(&self, gamma: f64) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| l.powf(gamma)).collect()
    }

    /// `|x|_{X_γ}`.
    pub fn norm(&self, x: &[f64], gamma: f64) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        if gamma == 0.0 {
            return x.iter().map(|v| v * v).sum::<f64>().sqrt();
        }
        x.iter()
            .zip(&self.eigenvalues)
            .map(|(v, l)| {
                let s = l.powf(gamma) * v;
                s * s
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Levels between 0 and `1 + gamma_star` are the ones the scale defines.
    pub fn check_level(&self, gamma: f64) -> Result<()> {
        if !(gamma >= 0.0 && gamma <= 1.0 + self.gamma_star + 1e-15) {
            return parameter(format!("level {gamma} outside [0, {}]", 1.0 + self.gamma_star));
        }
        Ok(())
    }
}
