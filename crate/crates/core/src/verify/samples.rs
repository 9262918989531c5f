//! Test functions for the embedding and estimate checks.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::problems::{Profile, TimeFunction};
use crate::spaces::{GridFunction, TimeGrid};

/// `ψ(t/ℓ)` with `ψ(s) = s e^{-s²}`: vanishes at 0, peaks near `ℓ`.
pub fn bump(t: f64, ell: f64) -> f64 {
    let s = t / ell;
    s * (-s * s).exp()
}

/// `ψ(t/ℓ) e_i` for every mode `i`.
pub fn mode_bumps(grid: &Arc<TimeGrid>, dim: usize, ell: f64) -> Result<Vec<GridFunction>> {
    (0..dim)
        .map(|i| {
            GridFunction::from_fn(grid.clone(), dim, |t| {
                let mut v = vec![0.0; dim];
                v[i] = bump(t, ell);
                v
            })
        })
        .collect()
}

/// Sums of three bumps with random modes, widths `ℓ/2, ℓ, 2ℓ` and normal
/// amplitudes.
pub fn random_bumps(grid: &Arc<TimeGrid>, dim: usize, ell: f64, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<GridFunction>> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let terms: Vec<(usize, f64, f64)> = (0..3)
            .map(|_| {
                let i = rng.random_range(0..dim);
                let w = ell * [0.5, 1.0, 2.0][rng.random_range(0..3)];
                let a: f64 = StandardNormal.sample(rng);
                (i, w, a)
            })
            .collect();
        out.push(GridFunction::from_fn(grid.clone(), dim, |t| {
            let mut v = vec![0.0; dim];
            for &(i, w, a) in &terms {
                v[i] += a * bump(t, w);
            }
            v
        })?);
    }
    Ok(out)
}

/// Smooth profile `1 + sin(2π t)/2` used as the time shape of data.
pub fn smooth_shape() -> Profile {
    Profile::Sine { mean: 1.0, amp: 0.5, freq: 1.0 }
}

/// Sum of three `Sine` profiles with random frequencies, offsets and
/// coefficients in `[-1, 1)`.
pub fn smooth_forcing(dim: usize, rng: &mut ChaCha8Rng) -> Result<TimeFunction> {
    let mut f = TimeFunction::zero(dim);
    for _ in 0..3 {
        let freq = rng.random_range(0.2..3.0);
        let mean = rng.random_range(-1.0..1.0);
        let coeffs = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        f = f.plus(TimeFunction::term(Profile::Sine { mean, amp: 1.0, freq }, coeffs))?;
    }
    Ok(f)
}

/// Initial value `z_i / (1+i)^2` with standard normal `z` and `slots`
/// smooth forcings, all drawn from `seed`.
pub fn seeded_data(dim: usize, slots: usize, seed: u64) -> Result<(Vec<f64>, Vec<TimeFunction>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u0 = (0..dim)
        .map(|i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z / (1.0 + i as f64).powi(2)
        })
        .collect();
    let f = (0..slots).map(|_| smooth_forcing(dim, &mut rng)).collect::<Result<_>>()?;
    Ok((u0, f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_vanishes_at_zero_and_peaks_at_width_over_root_two() {
        assert_eq!(bump(0.0, 0.1), 0.0);
        let ell = 0.1;
        let peak = ell / 2f64.sqrt();
        let top = bump(peak, ell);
        assert!((top - (-0.5f64).exp() / 2f64.sqrt()).abs() < 1e-15);
        assert!(bump(peak * 0.99, ell) < top && bump(peak * 1.01, ell) < top);
    }

    #[test]
    fn seeded_data_is_reproducible() {
        let (u0, f) = seeded_data(5, 2, 9).unwrap();
        let (v0, g) = seeded_data(5, 2, 9).unwrap();
        assert_eq!(u0, v0);
        assert_eq!(f, g);
        assert_eq!(f.len(), 2);
        assert_ne!(seeded_data(5, 2, 10).unwrap().0, u0);
    }

    #[test]
    fn mode_bumps_occupy_one_mode_each() {
        let grid = Arc::new(TimeGrid::graded(1.0, 16, 1.0).unwrap());
        let set = mode_bumps(&grid, 3, 0.25).unwrap();
        for (i, v) in set.iter().enumerate() {
            let x = v.node(4);
            assert!((x[i] - bump(0.25, 0.25)).abs() < 1e-15);
            assert_eq!(x.iter().filter(|y| **y != 0.0).count(), 1);
        }
    }
}
