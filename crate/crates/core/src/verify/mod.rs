//! Numerical checks of the embeddings and a priori estimates, and the
//! criticality, uniqueness and decomposition experiments.
//!
//! Discrete norms only approximate their continuum counterparts up to
//! equivalence constants, so checks assert that measured ratios are finite
//! and stable under refinement rather than matching exact constants.

mod embeddings;
mod energy;
mod experiments;
pub mod samples;
mod scenario;
pub mod tolerances;

use std::collections::BTreeMap;
use std::fmt::Display;

use serde::{Deserialize, Serialize};

pub use embeddings::{check_key_perturbation_estimate, check_mixed_embedding, check_trace_embedding, check_weighted_holder, LevelSet};
pub use energy::{check_energy_estimates, check_spike_stability, EnergyCase, EnergyConfig};
pub use experiments::{criticality_experiment, decomposition_invariance, uniqueness_crosscheck, CriticalityConfig};
pub use scenario::{Scenario, Family};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub params: BTreeMap<String, String>,
    /// Main measured series; `labels[k]` describes `ratios[k]`.
    pub ratios: Vec<f64>,
    pub labels: Vec<String>,
    /// Further named series.
    pub series: BTreeMap<String, Vec<f64>>,
    /// `max/min - 1` over the stability-relevant values.
    pub drift: f64,
    pub stable: bool,
    pub pass: bool,
    pub samples: usize,
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            params: BTreeMap::new(),
            ratios: Vec::new(),
            labels: Vec::new(),
            series: BTreeMap::new(),
            drift: 0.0,
            stable: true,
            pass: false,
            samples: 0,
            notes: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Display) {
        self.params.insert(key.to_string(), value.to_string());
    }

    pub fn push(&mut self, label: String, ratio: f64) {
        self.labels.push(label);
        self.ratios.push(ratio);
    }

    pub fn series_push(&mut self, key: &str, value: f64) {
        self.series.entry(key.to_string()).or_default().push(value);
    }

    pub fn ratios_finite(&self) -> bool {
        self.ratios.iter().chain(self.series.values().flatten()).all(|x| x.is_finite())
    }
}

/// `max/min - 1`; zero for an all-zero list and infinite when a nonzero
/// list touches zero.
pub fn drift(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if values.is_empty() || max == 0.0 {
        return 0.0;
    }
    if !(min > 0.0) {
        return f64::INFINITY;
    }
    max / min - 1.0
}

/// Whether the sequence never decreases.
pub fn nondecreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] >= w[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_edge_cases() {
        assert_eq!(drift(&[]), 0.0);
        assert_eq!(drift(&[0.0, 0.0]), 0.0);
        assert!(drift(&[0.0, 1.0]).is_infinite());
        assert!((drift(&[2.0, 2.2]) - 0.1).abs() < 1e-12);
    }
}
