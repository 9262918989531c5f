//! Implicit Euler stepping with cell-averaged coefficients and forcing:
//! `(u_{j+1} - u_j)/h_j + (α_j A_base + E_j) u_{j+1} = r_j`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problems::Op;

/// Per-cell data of one implicit operator `α_j base + diag(E_j)`.
pub(crate) struct Implicit<'a> {
    pub base: &'a Op,
    pub alpha: &'a [f64],
    /// Cell-major, `dim` entries per cell; `None` for no extra diagonal.
    pub extra: Option<&'a [f64]>,
}

fn solve_dense(base: &DMatrix<f64>, h: f64, alpha: f64, extra: Option<&[f64]>, y: &mut [f64], t: f64) -> Result<()> {
    let n = y.len();
    let mut m = base * (h * alpha);
    for i in 0..n {
        m[(i, i)] += 1.0 + extra.map_or(0.0, |e| h * e[i]);
    }
    let lu = m.lu();
    let x = lu.solve(&DVector::from_column_slice(y)).ok_or(Error::Singular { t })?;
    y.copy_from_slice(x.as_slice());
    Ok(())
}

/// Marches from node `first` (value `start`) to node `last`. `rhs(j, buf)`
/// adds the forcing mean of cell `j` into the zeroed `buf`. Returns the
/// values at nodes `first..=last`, node-major.
pub(crate) fn march(
    op: &Implicit<'_>,
    nodes: &[f64],
    first: usize,
    last: usize,
    start: &[f64],
    rhs: &mut dyn FnMut(usize, &mut [f64]),
) -> Result<Vec<f64>> {
    let dim = start.len();
    let mut out = Vec::with_capacity(dim * (last - first + 1));
    out.extend_from_slice(start);
    let mut r = vec![0.0; dim];
    for j in first..last {
        let h = nodes[j + 1] - nodes[j];
        r.iter_mut().for_each(|x| *x = 0.0);
        rhs(j, &mut r);
        let prev = &out[out.len() - dim..];
        let mut y: Vec<f64> = prev.iter().zip(&r).map(|(u, f)| u + h * f).collect();
        let extra = op.extra.map(|e| &e[j * dim..(j + 1) * dim]);
        let a = op.alpha[j];
        match op.base {
            Op::Diagonal(d) => {
                for i in 0..dim {
                    let den = 1.0 + h * (a * d[i] + extra.map_or(0.0, |e| e[i]));
                    if den == 0.0 || !den.is_finite() {
                        return Err(Error::Singular { t: nodes[j + 1] });
                    }
                    y[i] /= den;
                }
            }
            Op::Dense(m) => solve_dense(m, h, a, extra, &mut y, nodes[j + 1])?,
        }
        out.extend_from_slice(&y);
    }
    Ok(out)
}

/// `(1 - e^{-z})/z` and `(1 - e^{-z}(1+z))/z^2`, accurate for small `z`.
pub(crate) fn phi12(z: f64) -> (f64, f64) {
    if z.abs() < 0.1 {
        let mut e1 = 0.0;
        let mut e2 = 0.0;
        let mut term = 1.0; // (-z)^k / k!
        for k in 0..20 {
            e1 += term / (k + 1) as f64;
            e2 += term / (k + 2) as f64;
            term *= -z / (k + 1) as f64;
        }
        (e1, e2)
    } else {
        let em = (-z).exp();
        ((-(-z).exp_m1()) / z, (-(-z).exp_m1() - z * em) / (z * z))
    }
}

/// Exact exponential step of `u' + λu = g` for `g` linear on the cell with
/// the given mean and slope.
pub(crate) fn exp_step(lambda: f64, h: f64, u: f64, mean: f64, slope: f64) -> f64 {
    let z = lambda * h;
    let (e1, e2) = phi12(z);
    (-z).exp() * u + (mean - 0.5 * slope * h) * h * e1 + slope * h * h * (e1 - e2)
}
