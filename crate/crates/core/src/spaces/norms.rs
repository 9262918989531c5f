use super::grid::{GridFunction, TimeGrid};
use super::interp::InterpNorm;
use super::quad::{gauss3_points, pow_integral, weighted_gauss3, GAUSS3_X};
use super::scale::HilbertScale;
use crate::error::{parameter, Result};

/// Node range `[first, last]` of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub first: usize,
    pub last: usize,
}

impl Span {
    pub fn new(first: usize, last: usize) -> Self {
        Self { first, last }
    }

    pub fn full(grid: &TimeGrid) -> Self {
        Self { first: 0, last: grid.cells() }
    }
}

/// Exponent data `(p, κ)` must give a locally integrable weight; near 0 the
/// weight `t^κ` must also stay in the Muckenhoupt range `κ < p - 1`.
pub fn check_weight(p: f64, kappa: f64, touches_zero: bool) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return parameter(format!("p = {p} must be finite and at least 1"));
    }
    if !(kappa > -1.0 && kappa.is_finite()) {
        return parameter(format!("weight exponent {kappa} must exceed -1"));
    }
    if touches_zero && kappa >= p - 1.0 {
        return parameter(format!("weight exponent κ = {kappa} must satisfy κ < p - 1 = {}", p - 1.0));
    }
    Ok(())
}

fn check_span(grid: &TimeGrid, span: Span) -> Result<()> {
    if span.first >= span.last || span.last > grid.cells() {
        return parameter(format!("span [{}, {}] invalid for {} cells", span.first, span.last, grid.cells()));
    }
    Ok(())
}

fn level_norm_pow(x: &[f64], w: &[f64], p: f64) -> f64 {
    let s: f64 = x.iter().zip(w).map(|(v, l)| (v * l) * (v * l)).sum();
    if p == 2.0 {
        s
    } else {
        s.powf(0.5 * p)
    }
}

/// `|u|_{L^p(w_κ; X_γ)}` over `span` for the piecewise-linear interpolant.
/// Each cell uses three Gauss points with product-integration weights that
/// absorb `t^κ` exactly.
pub fn weighted_lp_norm(u: &GridFunction, p: f64, kappa: f64, level: f64, scale: &HilbertScale, span: Span) -> Result<f64> {
    let grid = u.grid();
    check_span(grid, span)?;
    check_weight(p, kappa, grid.nodes()[span.first] == 0.0)?;
    scale.check_level(level)?;
    let w = scale.level_weights(level);
    let dim = u.dim();
    let mut buf = vec![0.0; dim];
    let mut sum = 0.0;
    let nodes = grid.nodes();
    for j in span.first..span.last {
        let (a, b) = (nodes[j], nodes[j + 1]);
        let qw = weighted_gauss3(a, b, kappa);
        let (ua, ub) = (u.node(j), u.node(j + 1));
        for k in 0..3 {
            let s = 0.5 * (1.0 + GAUSS3_X[k]);
            for i in 0..dim {
                buf[i] = ua[i] + s * (ub[i] - ua[i]);
            }
            sum += qw[k] * level_norm_pow(&buf, &w, p);
        }
    }
    Ok(sum.max(0.0).powf(1.0 / p))
}

/// `|u'|_{L^p(w_κ; X_γ)}` for the backward-difference derivative, constant
/// on each cell.
pub fn derivative_lp_norm(u: &GridFunction, p: f64, kappa: f64, level: f64, scale: &HilbertScale, span: Span) -> Result<f64> {
    let grid = u.grid();
    check_span(grid, span)?;
    check_weight(p, kappa, grid.nodes()[span.first] == 0.0)?;
    scale.check_level(level)?;
    let w = scale.level_weights(level);
    let dim = u.dim();
    let mut d = vec![0.0; dim];
    let mut sum = 0.0;
    let nodes = grid.nodes();
    for j in span.first..span.last {
        let h = nodes[j + 1] - nodes[j];
        let (ua, ub) = (u.node(j), u.node(j + 1));
        for i in 0..dim {
            d[i] = (ub[i] - ua[i]) / h;
        }
        sum += pow_integral(nodes[j], nodes[j + 1], kappa) * level_norm_pow(&d, &w, p);
    }
    Ok(sum.powf(1.0 / p))
}

/// Norm of `L^p(w_κ; X_{1+γ}) ∩ W^{1,p}(w_κ; X_γ)`: the largest of the three
/// component norms. `γ = 0` is the maximal-regularity norm.
pub fn rung_norm(u: &GridFunction, p: f64, kappa: f64, gamma: f64, scale: &HilbertScale, span: Span) -> Result<f64> {
    let top = weighted_lp_norm(u, p, kappa, 1.0 + gamma, scale, span)?;
    let low = weighted_lp_norm(u, p, kappa, gamma, scale, span)?;
    let der = derivative_lp_norm(u, p, kappa, gamma, scale, span)?;
    Ok(top.max(low).max(der))
}

/// `|u|_{MR^p(w_κ)} = max(|u|_{L^p(w_κ;X_1)}, |u|_{W^{1,p}(w_κ;X_0)})`.
pub fn mr_norm(u: &GridFunction, p: f64, kappa: f64, scale: &HilbertScale, span: Span) -> Result<f64> {
    rung_norm(u, p, kappa, 0.0, scale, span)
}

/// How the space of pointwise values is normed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceSpace {
    /// `X_s`, the fractional level `s` of the scale.
    Fractional { level: f64 },
    /// Real interpolation space `X_{s,q}` via [`InterpNorm`].
    RealInterp { level: f64, q: f64 },
}

/// Vector norm of a trace space, prepared once for repeated use.
#[derive(Debug, Clone)]
pub enum TraceNorm {
    Fractional(Vec<f64>),
    RealInterp(InterpNorm),
}

impl TraceNorm {
    pub fn new(space: TraceSpace, scale: &HilbertScale) -> Result<Self> {
        match space {
            TraceSpace::Fractional { level } => {
                scale.check_level(level)?;
                Ok(Self::Fractional(scale.level_weights(level)))
            }
            TraceSpace::RealInterp { level, q } => Ok(Self::RealInterp(InterpNorm::for_level(scale, level, q)?)),
        }
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        match self {
            Self::Fractional(w) => x.iter().zip(w).map(|(v, l)| (v * l) * (v * l)).sum::<f64>().sqrt(),
            Self::RealInterp(n) => n.norm(x),
        }
    }
}

/// `max_j t_j^e |u(t_j)|` over the nodes of `span`. The node `t = 0` only
/// counts when `e = 0`.
pub fn trace_sup_norm(u: &GridFunction, weight_exp: f64, norm: &TraceNorm, span: Span) -> f64 {
    let nodes = u.grid().nodes();
    let mut best = 0.0f64;
    for j in span.first..=span.last {
        let t = nodes[j];
        if t == 0.0 && weight_exp != 0.0 {
            continue;
        }
        let w = if weight_exp == 0.0 { 1.0 } else { t.powf(weight_exp) };
        best = best.max(w * norm.norm(u.node(j)));
    }
    best
}

/// One summand of a sum space `Σ L^{p_i}(w_{ν_i}; X_{γ_i})`.
#[derive(Debug, Clone, Copy)]
pub struct SumComponent<'a> {
    pub f: &'a GridFunction,
    pub p: f64,
    pub nu: f64,
    pub gamma: f64,
}

/// Sum of the component norms. This bounds the sum-space norm from above;
/// the infimum over other decompositions is not searched.
pub fn sum_norm_upper(parts: &[SumComponent<'_>], scale: &HilbertScale, span: Span) -> Result<f64> {
    parts
        .iter()
        .map(|c| weighted_lp_norm(c.f, c.p, c.nu, c.gamma, scale, span))
        .sum()
}

/// `|f|_{L^p(w_κ; X_γ)}` for a function evaluated directly at the interior
/// Gauss points of each cell, so integrable singularities at 0 are allowed.
pub fn function_lp_norm(
    f: &dyn Fn(f64) -> Vec<f64>,
    grid: &TimeGrid,
    p: f64,
    kappa: f64,
    level: f64,
    scale: &HilbertScale,
    span: Span,
) -> Result<f64> {
    check_span(grid, span)?;
    check_weight(p, kappa, grid.nodes()[span.first] == 0.0)?;
    scale.check_level(level)?;
    let w = scale.level_weights(level);
    let nodes = grid.nodes();
    let mut sum = 0.0;
    for j in span.first..span.last {
        let (a, b) = (nodes[j], nodes[j + 1]);
        let qw = weighted_gauss3(a, b, kappa);
        for (k, t) in gauss3_points(a, b).into_iter().enumerate() {
            sum += qw[k] * level_norm_pow(&f(t), &w, p);
        }
    }
    Ok(sum.max(0.0).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn scalar_scale() -> HilbertScale {
        HilbertScale::new(vec![1.0], 1.0).unwrap()
    }

    #[test]
    fn linear_function_mr_norm_is_one() {
        let g = Arc::new(TimeGrid::graded(1.0, 64, 3.0).unwrap());
        let u = GridFunction::from_fn(g.clone(), 1, |t| vec![t]).unwrap();
        let s = scalar_scale();
        let span = Span::full(&g);
        let l = weighted_lp_norm(&u, 2.0, 0.0, 1.0, &s, span).unwrap();
        assert!((l - (1.0f64 / 3.0).sqrt()).abs() < 1e-14);
        assert!((mr_norm(&u, 2.0, 0.0, &s, span).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn weighted_norm_of_linear_function_is_exact() {
        // ∫_0^1 t^{1/2} t^2 dt = 2/7
        let g = Arc::new(TimeGrid::graded(1.0, 16, 2.0).unwrap());
        let u = GridFunction::from_fn(g.clone(), 1, |t| vec![t]).unwrap();
        let v = weighted_lp_norm(&u, 2.0, 0.5, 0.0, &scalar_scale(), Span::full(&g)).unwrap();
        assert!((v * v - 2.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_weight_at_zero() {
        let g = Arc::new(TimeGrid::graded(1.0, 4, 1.0).unwrap());
        let u = GridFunction::zeros(g.clone(), 1);
        assert!(weighted_lp_norm(&u, 2.0, 1.0, 0.0, &scalar_scale(), Span::full(&g)).is_err());
        assert!(weighted_lp_norm(&u, 2.0, 1.0, 0.0, &scalar_scale(), Span::new(1, 4)).is_ok());
    }

    #[test]
    fn trace_sup_skips_origin_for_weights() {
        let g = Arc::new(TimeGrid::from_nodes(vec![0.0, 1.0, 2.0]).unwrap());
        let u = GridFunction::from_values(g.clone(), 1, vec![5.0, 1.0, 1.0]).unwrap();
        let s = scalar_scale();
        let n = TraceNorm::new(TraceSpace::Fractional { level: 0.0 }, &s).unwrap();
        assert_eq!(trace_sup_norm(&u, 0.0, &n, Span::full(&g)), 5.0);
        assert_eq!(trace_sup_norm(&u, 0.5, &n, Span::full(&g)), 2f64.sqrt());
    }
}
