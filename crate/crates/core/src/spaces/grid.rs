use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, parameter, Result};

/// Strictly increasing time nodes starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return invalid("a grid needs at least two nodes");
        }
        if nodes[0] != 0.0 {
            return invalid("grids start at t = 0");
        }
        for w in nodes.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return invalid("grid nodes must be finite and strictly increasing");
            }
        }
        Ok(Self { nodes })
    }

    /// `t_j = T (j/m)^g`, `j = 0..=m`. Grading `g > 1` clusters nodes at 0.
    pub fn graded(horizon: f64, cells: usize, grading: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return parameter(format!("horizon T = {horizon} must be positive"));
        }
        if cells == 0 {
            return parameter("grid needs at least one cell");
        }
        if !(grading >= 1.0) {
            return parameter(format!("grading = {grading} must be at least 1"));
        }
        let m = cells as f64;
        let mut nodes: Vec<f64> = (0..=cells).map(|j| horizon * (j as f64 / m).powf(grading)).collect();
        nodes[cells] = horizon;
        Self::from_nodes(nodes)
    }

    /// Geometric grid: `per_octave` cells in each of the `octaves` octaves
    /// below `T`, plus the first cell `[0, T 2^-octaves]`. Doubling
    /// `per_octave` nests the grids, and `T = 2^k T'` shares the nodes of
    /// the `T'` grid on their common range when both use the same
    /// `per_octave`.
    pub fn log_graded(horizon: f64, per_octave: usize, octaves: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) || per_octave == 0 || octaves == 0 {
            return invalid("log-graded grid needs T > 0 and positive counts");
        }
        let total = per_octave * octaves;
        let mut nodes = Vec::with_capacity(total + 2);
        nodes.push(0.0);
        for k in 0..=total {
            let e = k as f64 / per_octave as f64 - octaves as f64;
            nodes.push(horizon * e.exp2());
        }
        nodes[total + 1] = horizon;
        Self::from_nodes(nodes)
    }

    /// Each cell split into `k` equal cells. Node `j` becomes node `k j`.
    pub fn refine(&self, k: usize) -> Self {
        let k = k.max(1);
        let mut nodes = Vec::with_capacity((self.nodes.len() - 1) * k + 1);
        for w in self.nodes.windows(2) {
            let h = (w[1] - w[0]) / k as f64;
            for i in 0..k {
                nodes.push(w[0] + h * i as f64);
            }
        }
        nodes.push(*self.nodes.last().unwrap());
        Self { nodes }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn width(&self, j: usize) -> f64 {
        self.nodes[j + 1] - self.nodes[j]
    }

    /// Largest node index with `t_j <= t`.
    pub fn floor_index(&self, t: f64) -> usize {
        match self.nodes.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
    }
}

/// Vector-valued function sampled at the nodes of a grid. Between nodes it is
/// read as the piecewise-linear interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<TimeGrid>,
    dim: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: Arc<TimeGrid>, dim: usize) -> Self {
        let values = vec![0.0; dim * grid.nodes.len()];
        Self { grid, dim, values }
    }

    /// Node-major values, `dim` entries per node.
    pub fn from_values(grid: Arc<TimeGrid>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != dim * grid.nodes.len() {
            return invalid(format!(
                "expected {} values for {} nodes of dimension {dim}, got {}",
                dim * grid.nodes.len(),
                grid.nodes.len(),
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("grid function values must be finite");
        }
        Ok(Self { grid, dim, values })
    }

    pub fn from_fn(grid: Arc<TimeGrid>, dim: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(dim * grid.nodes.len());
        for &t in &grid.nodes {
            let v = f(t);
            if v.len() != dim {
                return invalid("sampled vector has the wrong dimension");
            }
            values.extend_from_slice(&v);
        }
        Self::from_values(grid, dim, values)
    }

    /// Like [`GridFunction::from_fn`] for functions singular at 0: the value
    /// at `t = 0` is copied from the first positive node.
    pub fn from_fn_open(grid: Arc<TimeGrid>, dim: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let t1 = grid.nodes[1];
        Self::from_fn(grid, dim, |t| if t == 0.0 { f(t1) } else { f(t) })
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn node_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.dim..(j + 1) * self.dim]
    }

    /// Piecewise-linear value at `t` in `[0, T]`.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let g = &self.grid;
        let j = g.floor_index(t).min(g.cells() - 1);
        let s = ((t - g.nodes[j]) / g.width(j)).clamp(0.0, 1.0);
        let (a, b) = (self.node(j), self.node(j + 1));
        a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect()
    }

    /// `self - other`; both must live on the same grid.
    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Self { grid: self.grid.clone(), dim: self.dim, values }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Self { grid: self.grid.clone(), dim: self.dim, values }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { grid: self.grid.clone(), dim: self.dim, values: self.values.iter().map(|v| c * v).collect() }
    }

    /// Values at every `k`-th node, on `coarse`, which must be the grid this
    /// one was refined from by a factor `k`.
    pub fn restrict(&self, coarse: Arc<TimeGrid>, k: usize) -> Result<Self> {
        if (coarse.nodes.len() - 1) * k != self.grid.nodes.len() - 1 {
            return invalid("grid is not a k-fold refinement of the coarse grid");
        }
        let mut values = Vec::with_capacity(self.dim * coarse.nodes.len());
        for j in 0..coarse.nodes.len() {
            values.extend_from_slice(self.node(j * k));
        }
        Ok(Self { grid: coarse, dim: self.dim, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_nodes() {
        let g = TimeGrid::graded(2.0, 4, 3.0).unwrap();
        assert_eq!(g.nodes()[0], 0.0);
        assert!((g.nodes()[1] - 2.0 / 64.0).abs() < 1e-15);
        assert_eq!(g.horizon(), 2.0);
        assert!(TimeGrid::graded(1.0, 4, 0.5).is_err());
    }

    #[test]
    fn refinement_keeps_old_nodes() {
        let g = TimeGrid::graded(1.0, 5, 2.0).unwrap();
        let r = g.refine(4);
        assert_eq!(r.cells(), 20);
        for j in 0..=5 {
            assert_eq!(r.nodes()[4 * j], g.nodes()[j]);
        }
    }

    #[test]
    fn floor_index_and_eval() {
        let g = Arc::new(TimeGrid::from_nodes(vec![0.0, 1.0, 3.0]).unwrap());
        assert_eq!(g.floor_index(2.0), 1);
        assert_eq!(g.floor_index(3.0), 2);
        let u = GridFunction::from_fn(g, 1, |t| vec![t * t]).unwrap();
        assert!((u.eval(2.0)[0] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite_values() {
        let g = Arc::new(TimeGrid::graded(1.0, 2, 1.0).unwrap());
        assert!(GridFunction::from_fn(g.clone(), 1, |t| vec![1.0 / t]).is_err());
        assert!(GridFunction::from_fn_open(g, 1, |t| vec![1.0 / t]).is_ok());
    }
}
