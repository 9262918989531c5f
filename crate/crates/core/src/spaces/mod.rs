//! Discrete Hilbert scale, graded time grids and the time-weighted norms
//! built on them.

mod grid;
mod interp;
mod norms;
pub mod quad;
mod scale;

pub use grid::{GridFunction, TimeGrid};
pub use interp::{k_functional_bruteforce, real_interp_norm, InterpNorm, POINTS_PER_DECADE};
pub use norms::{
    check_weight, derivative_lp_norm, function_lp_norm, mr_norm, rung_norm, sum_norm_upper, trace_sup_norm,
    weighted_lp_norm, Span, SumComponent, TraceNorm, TraceSpace,
};
pub use scale::HilbertScale;
