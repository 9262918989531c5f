//! Thresholds used by the checks and the acceptance suite.

/// Largest allowed `max/min - 1` of embedding ratios across refinement
/// levels and horizons.
pub const EMBEDDING_DRIFT: f64 = 0.10;
/// Largest allowed drift of energy-estimate constants across spectral
/// truncations, grid levels and sample draws.
pub const ENERGY_DRIFT: f64 = 0.15;
/// Largest allowed drift of the perturbation ratio across the end time `t`.
pub const KEY_ESTIMATE_T_DRIFT: f64 = 0.15;
/// Quadrature slack in the weighted Hölder inequality.
pub const HOLDER_SLACK: f64 = 1e-8;
/// Lower limit of the ratio on the Hölder equality family.
pub const HOLDER_EQUALITY: f64 = 0.999;
/// Schemes agree when trajectories differ by at most this many `tol`.
pub const UNIQUENESS_FACTOR: f64 = 10.0;
/// Relative `L^p(w_κ; X_1)` agreement with the 4x refined reference solve.
pub const ORACLE_RELATIVE: f64 = 1e-4;
/// Absolute node error against scalar closed forms.
pub const CLOSED_FORM_ABS: f64 = 1e-4;
/// Largest allowed ratio of successive Picard distances after iteration 2.
pub const DISTANCE_RATIO_CAP: f64 = 0.8;
