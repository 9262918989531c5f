//! Per-grid precomputation shared by all solvers: cell means of the operator
//! profile, of each envelope and of each inhomogeneity slot.

use crate::error::{Error, Result};
use crate::problems::{Problem, TimeFunction};
use crate::spaces::quad::{pow_integral, weighted_gauss3, GAUSS3_X};
use crate::spaces::TimeGrid;

pub(crate) struct LevelData<'p> {
    pub problem: &'p Problem,
    pub nodes: Vec<f64>,
    pub dim: usize,
    pub a_alpha: Vec<f64>,
    pub lambdas: Vec<Vec<f64>>,
    /// Signed envelope mean per component and cell.
    pub b_mean: Vec<Vec<f64>>,
    /// Signed envelope moments about the cell midpoint.
    pub b_mom: Vec<Vec<[f64; 3]>>,
    /// `Σ_i b̄_i Λ_i`, cell-major.
    pub b_diag: Vec<f64>,
    pub slot_mean: Vec<Vec<f64>>,
    pub slot_slope: Vec<Vec<f64>>,
    /// Product weights for `t^κ` on each cell.
    pub qw: Vec<[f64; 3]>,
    /// `X_1` level weights.
    pub top: Vec<f64>,
}

pub(crate) fn function_means(f: &TimeFunction, nodes: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let dim = f.dim;
    let cells = nodes.len() - 1;
    let mut mean = vec![0.0; dim * cells];
    let mut slope = vec![0.0; dim * cells];
    let mut m1 = vec![0.0; dim];
    for j in 0..cells {
        let (a, b) = (nodes[j], nodes[j + 1]);
        let h = b - a;
        m1.iter_mut().for_each(|x| *x = 0.0);
        let m0 = &mut mean[j * dim..(j + 1) * dim];
        f.add_moments(a, b, m0, &mut m1)?;
        for i in 0..dim {
            m0[i] /= h;
            slope[j * dim + i] = 12.0 * m1[i] / (h * h * h);
        }
    }
    Ok((mean, slope))
}

impl<'p> LevelData<'p> {
    pub fn new(problem: &'p Problem, grid: &TimeGrid) -> Result<Self> {
        let nodes = grid.nodes().to_vec();
        let dim = problem.scale.dim();
        let cells = nodes.len() - 1;
        let a_alpha: Vec<f64> = (0..cells).map(|j| problem.a.profile_mean(nodes[j], nodes[j + 1])).collect();
        let mut lambdas = Vec::new();
        let mut b_mean = Vec::new();
        let mut b_mom = Vec::new();
        let mut b_diag = vec![0.0; dim * cells];
        for c in &problem.b.components {
            let lam = c.lambda(&problem.scale);
            let mut means = Vec::with_capacity(cells);
            let mut moms = Vec::with_capacity(cells);
            for j in 0..cells {
                let (a, b) = (nodes[j], nodes[j + 1]);
                let m = c.envelope.moments(a, b, 0.5 * (a + b));
                if !m.iter().all(|x| x.is_finite()) {
                    return Err(Error::NotIntegrable {
                        a,
                        b,
                        detail: "envelope is not integrable on a grid cell; refine or change the envelope".into(),
                    });
                }
                let m = m.map(|x| c.sign * x);
                let mean = m[0] / (b - a);
                for i in 0..dim {
                    b_diag[j * dim + i] += mean * lam[i];
                }
                means.push(mean);
                moms.push(m);
            }
            lambdas.push(lam);
            b_mean.push(means);
            b_mom.push(moms);
        }
        let mut slot_mean = Vec::new();
        let mut slot_slope = Vec::new();
        for s in &problem.f {
            let (m, sl) = function_means(&s.f, &nodes)?;
            slot_mean.push(m);
            slot_slope.push(sl);
        }
        let qw = (0..cells).map(|j| weighted_gauss3(nodes[j], nodes[j + 1], problem.kappa)).collect();
        let top = problem.scale.level_weights(1.0);
        Ok(Self { problem, nodes, dim, a_alpha, lambdas, b_mean, b_mom, b_diag, slot_mean, slot_slope, qw, top })
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Adds the mean of every slot on cell `j`.
    pub fn add_forcing(&self, j: usize, buf: &mut [f64]) {
        for m in &self.slot_mean {
            for i in 0..self.dim {
                buf[i] += m[j * self.dim + i];
            }
        }
    }

    /// `|v|_{L^p(w_κ; X_1)}` over nodes `first..=last`; `v` holds exactly
    /// those nodes.
    pub fn lp_top(&self, first: usize, last: usize, v: &[f64]) -> f64 {
        self.lp_slice(first, last, v, &self.top)
    }

    pub fn lp_slice(&self, first: usize, last: usize, v: &[f64], w: &[f64]) -> f64 {
        let p = self.problem.p;
        let dim = self.dim;
        let mut sum = 0.0;
        for j in first..last {
            let k0 = (j - first) * dim;
            let (ua, ub) = (&v[k0..k0 + dim], &v[k0 + dim..k0 + 2 * dim]);
            for k in 0..3 {
                let s = 0.5 * (1.0 + GAUSS3_X[k]);
                let mut n2 = 0.0;
                for i in 0..dim {
                    let x = (ua[i] + s * (ub[i] - ua[i])) * w[i];
                    n2 += x * x;
                }
                sum += self.qw[j][k] * if p == 2.0 { n2 } else { n2.powf(0.5 * p) };
            }
        }
        sum.max(0.0).powf(1.0 / p)
    }

    /// Relative defect of the implicit Euler equation of the full problem
    /// for node values `u` on the whole grid, in `L^p(w_κ; X_0)`.
    pub fn residual(&self, u: &[f64]) -> f64 {
        let dim = self.dim;
        let p = self.problem.p;
        let kappa = self.problem.kappa;
        let mut res = 0.0;
        let mut scale_sum = 0.0;
        let mut r = vec![0.0; dim];
        let mut f = vec![0.0; dim];
        for j in 0..self.cells() {
            let h = self.nodes[j + 1] - self.nodes[j];
            let (ua, ub) = (&u[j * dim..(j + 1) * dim], &u[(j + 1) * dim..(j + 2) * dim]);
            f.iter_mut().for_each(|x| *x = 0.0);
            self.add_forcing(j, &mut f);
            r.iter_mut().for_each(|x| *x = 0.0);
            self.problem.a.base.apply_add(self.a_alpha[j], ub, &mut r);
            let mut d2 = 0.0;
            let mut f2 = 0.0;
            for i in 0..dim {
                let du = (ub[i] - ua[i]) / h;
                r[i] += du + self.b_diag[j * dim + i] * ub[i] - f[i];
                d2 += du * du;
                f2 += f[i] * f[i];
            }
            let n2: f64 = r.iter().map(|x| x * x).sum();
            let w = pow_integral(self.nodes[j], self.nodes[j + 1], kappa);
            res += w * n2.powf(0.5 * p);
            scale_sum += w * d2.max(f2).powf(0.5 * p);
        }
        if scale_sum == 0.0 {
            return 0.0;
        }
        (res / scale_sum).powf(1.0 / p)
    }
}

/// `2 u_fine(t_j) - u_coarse(t_j)` at the coarse nodes.
pub(crate) fn richardson(coarse: &[f64], fine: &[f64], dim: usize) -> Vec<f64> {
    let nodes = coarse.len() / dim;
    let mut out = Vec::with_capacity(coarse.len());
    for j in 0..nodes {
        for i in 0..dim {
            out.push(2.0 * fine[2 * j * dim + i] - coarse[j * dim + i]);
        }
    }
    // the initial value is reproduced exactly
    out[..dim].copy_from_slice(&coarse[..dim]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Profile;

    #[test]
    fn richardson_removes_first_order_error() {
        // exact values t², error h on the coarse grid and h/2 on the fine one
        let exact = |t: f64| t * t;
        let coarse: Vec<f64> = (0..3).map(|j| exact(j as f64) + if j > 0 { 1.0 } else { 0.0 }).collect();
        let fine: Vec<f64> = (0..5).map(|j| exact(0.5 * j as f64) + if j > 0 { 0.5 } else { 0.0 }).collect();
        let out = richardson(&coarse, &fine, 1);
        for (j, x) in out.iter().enumerate() {
            assert!((x - exact(j as f64)).abs() < 1e-14);
        }
    }

    #[test]
    fn cell_means_and_slopes_of_a_step() {
        let f = TimeFunction::term(Profile::Steps { breaks: vec![0.0, 0.5, 1.0], values: vec![0.0, 1.0] }, vec![2.0]);
        let (mean, slope) = function_means(&f, &[0.0, 1.0]).unwrap();
        // mean 2·1/2; slope 12 ∫ (t - 1/2) f / h³ = 12·2/8
        assert!((mean[0] - 1.0).abs() < 1e-14);
        assert!((slope[0] - 3.0).abs() < 1e-14);
    }
}
