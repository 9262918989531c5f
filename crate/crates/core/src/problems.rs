//! Operator families `A(t)`, perturbations `B(t) = Σ ± b_i(t) Λ_i` and
//! inhomogeneities, all evaluable cell by cell through exact time moments.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::admissibility::{holder_exponents, to_f64, HolderExponents, Triple, Q};
use crate::error::{invalid, parameter, Error, Result};
use crate::spaces::quad::{gauss8, pow_integral, power_moments};
use crate::spaces::HilbertScale;

/// Scalar function of time. Envelopes use the forms with closed-form
/// moments (`Zero`, `Constant`, `Power`, `Steps`, `Window`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Zero,
    Constant { value: f64 },
    /// `coef * t^(-alpha)`.
    Power { coef: f64, alpha: f64 },
    /// `values[k]` on `(breaks[k], breaks[k+1]]`; zero outside.
    Steps { breaks: Vec<f64>, values: Vec<f64> },
    /// `inner` restricted to `(a, b]`.
    Window { a: f64, b: f64, inner: Box<Profile> },
    /// `mean + amp * sin(2π freq t)`.
    Sine { mean: f64, amp: f64, freq: f64 },
}

/// Time moments `(∫φ, ∫(s-c)φ, ∫(s-c)^2 φ)` of a profile over a cell,
/// taken about a given centre `c`.
pub type Moments = [f64; 3];

fn shift_moments(m: Moments, from: f64, to: f64) -> Moments {
    let d = from - to;
    [m[0], m[1] + d * m[0], m[2] + 2.0 * d * m[1] + d * d * m[0]]
}

fn poly_moments(a: f64, b: f64, center: f64) -> Moments {
    let (x0, x1) = (a - center, b - center);
    [x1 - x0, 0.5 * (x1 * x1 - x0 * x0), (x1.powi(3) - x0.powi(3)) / 3.0]
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn power(coef: f64, alpha: f64) -> Self {
        Profile::Power { coef, alpha }
    }

    /// `mass / width` on `(0, width]`.
    pub fn spike(mass: f64, width: f64) -> Self {
        Profile::Window { a: 0.0, b: width, inner: Box::new(Profile::constant(mass / width)) }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Profile::Zero => Ok(()),
            Profile::Constant { value } if value.is_finite() => Ok(()),
            Profile::Power { coef, alpha } if coef.is_finite() && alpha.is_finite() => Ok(()),
            Profile::Steps { breaks, values } => {
                if breaks.len() != values.len() + 1 || values.is_empty() {
                    return invalid("steps need one more break than values");
                }
                if breaks.windows(2).any(|w| !(w[1] > w[0])) || values.iter().any(|v| !v.is_finite()) {
                    return invalid("step breaks must increase and values be finite");
                }
                Ok(())
            }
            Profile::Window { a, b, inner } => {
                if !(b > a && *a >= 0.0) {
                    return invalid("window needs 0 <= a < b");
                }
                inner.validate()
            }
            Profile::Sine { mean, amp, freq } if mean.is_finite() && amp.is_finite() && freq.is_finite() => Ok(()),
            _ => invalid(format!("profile has non-finite parameters: {self:?}")),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => *value,
            Profile::Power { coef, alpha } => {
                if *alpha == 0.0 {
                    *coef
                } else {
                    coef * t.powf(-alpha)
                }
            }
            Profile::Steps { breaks, values } => {
                if t <= breaks[0] || t > breaks[breaks.len() - 1] {
                    return 0.0;
                }
                let k = breaks.partition_point(|&x| x < t);
                values[k - 1]
            }
            Profile::Window { a, b, inner } => {
                if t > *a && t <= *b {
                    inner.eval(t)
                } else {
                    0.0
                }
            }
            Profile::Sine { mean, amp, freq } => mean + amp * (2.0 * std::f64::consts::PI * freq * t).sin(),
        }
    }

    /// Moments over `[a, b]` about `center`; infinite if not integrable.
    pub fn moments(&self, a: f64, b: f64, center: f64) -> Moments {
        if b <= a {
            return [0.0; 3];
        }
        match self {
            Profile::Zero => [0.0; 3],
            Profile::Constant { value } => poly_moments(a, b, center).map(|m| m * value),
            Profile::Power { coef, alpha } => {
                let m = power_moments(a, b, -alpha);
                let s = 0.5 * (b - a);
                let own = [s * m[0], s * s * m[1], s * s * s * m[2]];
                shift_moments(own, 0.5 * (a + b), center).map(|v| v * coef)
            }
            Profile::Steps { breaks, values } => {
                let mut out = [0.0; 3];
                for k in 0..values.len() {
                    let lo = breaks[k].max(a);
                    let hi = breaks[k + 1].min(b);
                    if hi > lo {
                        let m = poly_moments(lo, hi, center);
                        for i in 0..3 {
                            out[i] += values[k] * m[i];
                        }
                    }
                }
                out
            }
            Profile::Window { a: wa, b: wb, inner } => {
                let lo = a.max(*wa);
                let hi = b.min(*wb);
                if hi > lo {
                    inner.moments(lo, hi, center)
                } else {
                    [0.0; 3]
                }
            }
            Profile::Sine { .. } => {
                let mut out = [0.0; 3];
                for (i, slot) in out.iter_mut().enumerate() {
                    *slot = gauss8(a, b, 4, |t| self.eval(t) * (t - center).powi(i as i32));
                }
                out
            }
        }
    }

    /// Cell average over `[a, b]`.
    pub fn mean(&self, a: f64, b: f64) -> f64 {
        self.moments(a, b, 0.5 * (a + b))[0] / (b - a)
    }

    /// `∫_a^b t^μ |φ(t)|^q dt`, infinite when not integrable.
    pub fn weighted_power_integral(&self, a: f64, b: f64, q: f64, mu: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => {
                if *value == 0.0 {
                    0.0
                } else {
                    value.abs().powf(q) * pow_integral(a, b, mu)
                }
            }
            Profile::Power { coef, alpha } => {
                if *coef == 0.0 {
                    0.0
                } else {
                    coef.abs().powf(q) * pow_integral(a, b, mu - alpha * q)
                }
            }
            Profile::Steps { breaks, values } => {
                let mut s = 0.0;
                for k in 0..values.len() {
                    let lo = breaks[k].max(a);
                    let hi = breaks[k + 1].min(b);
                    if hi > lo && values[k] != 0.0 {
                        s += values[k].abs().powf(q) * pow_integral(lo, hi, mu);
                    }
                }
                s
            }
            Profile::Window { a: wa, b: wb, inner } => inner.weighted_power_integral(a.max(*wa), b.min(*wb), q, mu),
            Profile::Sine { .. } => {
                let f = |t: f64| t.powf(mu) * self.eval(t).abs().powf(q);
                if a == 0.0 && mu < 0.0 {
                    // t = b s^4 smooths the weight singularity
                    gauss8(0.0, 1.0, 32, |s| f(b * s.powi(4)) * 4.0 * b * s.powi(3))
                } else {
                    gauss8(a, b, 32, f)
                }
            }
        }
    }

    /// `|φ|_{L^q(w_μ; a, b)}`, or an error when the integral diverges.
    pub fn weighted_norm(&self, a: f64, b: f64, q: f64, mu: f64) -> Result<f64> {
        if !(q >= 1.0 && q.is_finite()) {
            return parameter(format!("envelope exponent q = {q} must be finite and at least 1"));
        }
        let v = self.weighted_power_integral(a, b, q, mu);
        if !v.is_finite() {
            return Err(Error::NotIntegrable { a, b, detail: format!("|b|^{q} t^{mu} diverges at 0") });
        }
        Ok(v.powf(1.0 / q))
    }

    /// Largest `σ <= t_max` with `∫_τ^σ t^μ |φ|^q = target`; `t_max` if the
    /// whole remaining integral is below `target`. Closed form for constant
    /// and power profiles, bisection otherwise.
    pub fn invert_power_integral(&self, tau: f64, target: f64, q: f64, mu: f64, t_max: f64) -> f64 {
        let rest = self.weighted_power_integral(tau, t_max, q, mu);
        if rest <= target {
            return t_max;
        }
        let closed = match self {
            Profile::Constant { value } => Some((value.abs().powf(q), mu)),
            Profile::Power { coef, alpha } => Some((coef.abs().powf(q), mu - alpha * q)),
            _ => None,
        };
        if let Some((c, e)) = closed {
            let i = target / c;
            let e1 = e + 1.0;
            let sigma = if e1 == 0.0 {
                tau * i.exp()
            } else {
                let base = if tau == 0.0 { 0.0 } else { tau.powf(e1) };
                let v = base + e1 * i;
                if v <= 0.0 {
                    f64::INFINITY
                } else {
                    v.powf(1.0 / e1)
                }
            };
            if sigma.is_finite() && sigma > tau {
                return sigma.min(t_max);
            }
        }
        let (mut lo, mut hi) = (tau, t_max);
        let tol = 1e-12 * target;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let v = self.weighted_power_integral(tau, mid, q, mu);
            if (v - target).abs() <= tol || hi - lo <= 1e-15 * hi {
                return mid;
            }
            if v < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Lower bound of the profile on `[0, t_max]` when one is cheap to get.
    pub fn lower_bound(&self, t_max: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => *value,
            Profile::Power { coef, alpha } => {
                if *coef >= 0.0 && *alpha <= 0.0 {
                    if *alpha == 0.0 {
                        *coef
                    } else {
                        0.0
                    }
                } else if *coef >= 0.0 {
                    coef * t_max.powf(-alpha)
                } else {
                    f64::NEG_INFINITY
                }
            }
            Profile::Steps { breaks, values } => {
                let covers = breaks[0] <= 0.0 && breaks[breaks.len() - 1] >= t_max;
                let m = values.iter().cloned().fold(f64::INFINITY, f64::min);
                if covers {
                    m
                } else {
                    m.min(0.0)
                }
            }
            Profile::Window { inner, .. } => inner.lower_bound(t_max).min(0.0),
            Profile::Sine { mean, amp, .. } => mean - amp.abs(),
        }
    }
}

/// Vector-valued function of time: a sum of `profile × vector` terms plus
/// optional piecewise-constant cell data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeFunction {
    pub dim: usize,
    pub terms: Vec<(Profile, Vec<f64>)>,
    pub cells: Option<CellData>,
}

/// Value `values[k*dim..(k+1)*dim]` on `(breaks[k], breaks[k+1]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellData {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeFunction {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: Vec::new(), cells: None }
    }

    pub fn term(profile: Profile, coeffs: Vec<f64>) -> Self {
        Self { dim: coeffs.len(), terms: vec![(profile, coeffs)], cells: None }
    }

    pub fn cells(dim: usize, breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.len() < 2 || values.len() != dim * (breaks.len() - 1) {
            return invalid("cell data size does not match breaks and dimension");
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("cell breaks must increase");
        }
        Ok(Self { dim, terms: Vec::new(), cells: Some(CellData { breaks, values }) })
    }

    pub fn plus(mut self, other: TimeFunction) -> Result<Self> {
        if other.dim != self.dim {
            return invalid("dimension mismatch in sum of time functions");
        }
        self.terms.extend(other.terms);
        match (&mut self.cells, other.cells) {
            (_, None) => {}
            (None, Some(c)) => self.cells = Some(c),
            (Some(_), Some(_)) => return invalid("at most one block of cell data per function"),
        }
        Ok(self)
    }

    pub fn scaled(mut self, c: f64) -> Self {
        for (_, v) in &mut self.terms {
            v.iter_mut().for_each(|x| *x *= c);
        }
        if let Some(cd) = &mut self.cells {
            cd.values.iter_mut().for_each(|x| *x *= c);
        }
        self
    }

    /// Restriction to `(a, b]`, zero elsewhere.
    pub fn windowed(&self, a: f64, b: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(p, v)| (Profile::Window { a, b, inner: Box::new(p.clone()) }, v.clone()))
            .collect();
        let cells = self.cells.as_ref().map(|cd| {
            let mut values = cd.values.clone();
            for k in 0..cd.breaks.len() - 1 {
                if cd.breaks[k + 1] <= a || cd.breaks[k] >= b {
                    values[k * self.dim..(k + 1) * self.dim].iter_mut().for_each(|x| *x = 0.0);
                }
            }
            CellData { breaks: cd.breaks.clone(), values }
        });
        // cell data is only cut at its own breaks
        Self { dim: self.dim, terms, cells }
    }

    /// Coordinates `modes` only.
    pub fn restrict(&self, modes: &[usize]) -> TimeFunction {
        let pick = |v: &[f64]| modes.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let terms = self.terms.iter().map(|(p, c)| (p.clone(), pick(c))).collect();
        let cells = self.cells.as_ref().map(|c| {
            let n = c.breaks.len() - 1;
            let mut values = Vec::with_capacity(n * modes.len());
            for k in 0..n {
                values.extend(pick(&c.values[k * self.dim..(k + 1) * self.dim]));
            }
            CellData { breaks: c.breaks.clone(), values }
        });
        TimeFunction { dim: modes.len(), terms, cells }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(p, v)| matches!(p, Profile::Zero) || v.iter().all(|x| *x == 0.0))
            && self.cells.as_ref().is_none_or(|c| c.values.iter().all(|x| *x == 0.0))
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (p, v) in &self.terms {
            let s = p.eval(t);
            if s != 0.0 {
                for (o, c) in out.iter_mut().zip(v) {
                    *o += s * c;
                }
            }
        }
        if let Some(cd) = &self.cells {
            let nb = cd.breaks.len();
            if t > cd.breaks[0] && t <= cd.breaks[nb - 1] {
                let k = cd.breaks.partition_point(|&x| x < t) - 1;
                for (o, c) in out.iter_mut().zip(&cd.values[k * self.dim..(k + 1) * self.dim]) {
                    *o += c;
                }
            }
        }
        out
    }

    /// Adds `∫_a^b f` and `∫_a^b (s - c) f`, `c` the cell midpoint, to `m0`
    /// and `m1`.
    pub fn add_moments(&self, a: f64, b: f64, m0: &mut [f64], m1: &mut [f64]) -> Result<()> {
        let c = 0.5 * (a + b);
        for (p, v) in &self.terms {
            let m = p.moments(a, b, c);
            if !(m[0].is_finite() && m[1].is_finite()) {
                return Err(Error::NotIntegrable { a, b, detail: format!("{p:?} on a cell") });
            }
            for i in 0..self.dim {
                m0[i] += m[0] * v[i];
                m1[i] += m[1] * v[i];
            }
        }
        if let Some(cd) = &self.cells {
            let nb = cd.breaks.len();
            let mut k = cd.breaks.partition_point(|&x| x <= a).saturating_sub(1);
            while k + 1 < nb && cd.breaks[k] < b {
                let lo = cd.breaks[k].max(a);
                let hi = cd.breaks[k + 1].min(b);
                if hi > lo {
                    let pm = poly_moments(lo, hi, c);
                    let vals = &cd.values[k * self.dim..(k + 1) * self.dim];
                    for i in 0..self.dim {
                        m0[i] += pm[0] * vals[i];
                        m1[i] += pm[1] * vals[i];
                    }
                }
                k += 1;
            }
        }
        Ok(())
    }

    /// `|f|_{L^r(w_ν; X_γ)(a, b)}`: exact for a single term or pure cell data,
    /// otherwise by three Gauss points on each of `fallback_cells` graded cells.
    pub fn weighted_norm(&self, a: f64, b: f64, r: f64, nu: f64, gamma: f64, scale: &HilbertScale) -> Result<f64> {
        if !(r >= 1.0 && r.is_finite()) {
            return parameter(format!("exponent r = {r} must be finite and at least 1"));
        }
        let nonzero: Vec<&(Profile, Vec<f64>)> =
            self.terms.iter().filter(|(p, v)| !matches!(p, Profile::Zero) && v.iter().any(|x| *x != 0.0)).collect();
        if nonzero.is_empty() && self.cells.is_none() {
            return Ok(0.0);
        }
        if nonzero.len() == 1 && self.cells.is_none() {
            let (p, v) = nonzero[0];
            let c = scale.norm(v, gamma);
            return Ok(c * p.weighted_norm(a, b, r, nu)?);
        }
        if nonzero.is_empty() {
            let cd = self.cells.as_ref().unwrap();
            let mut s = 0.0;
            for k in 0..cd.breaks.len() - 1 {
                let lo = cd.breaks[k].max(a);
                let hi = cd.breaks[k + 1].min(b);
                if hi > lo {
                    let n = scale.norm(&cd.values[k * self.dim..(k + 1) * self.dim], gamma);
                    if n > 0.0 {
                        s += n.powf(r) * pow_integral(lo, hi, nu);
                    }
                }
            }
            return Ok(s.powf(1.0 / r));
        }
        // fallback: graded cells on (a, b], weights t^ν in absolute time
        let rel = crate::spaces::TimeGrid::graded(b - a, 4096, 3.0)?;
        let w = scale.level_weights(gamma);
        let nodes = rel.nodes();
        let mut s = 0.0;
        for j in 0..rel.cells() {
            let (lo, hi) = (nodes[j] + a, nodes[j + 1] + a);
            let qw = crate::spaces::quad::weighted_gauss3(lo, hi, nu);
            for (k, t) in crate::spaces::quad::gauss3_points(lo, hi).into_iter().enumerate() {
                let v = self.eval(t);
                let n2: f64 = v.iter().zip(&w).map(|(x, l)| (x * l) * (x * l)).sum();
                s += qw[k] * n2.powf(0.5 * r);
            }
        }
        Ok(s.max(0.0).powf(1.0 / r))
    }
}

/// Matrix shape of an operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Op {
    Diagonal(Vec<f64>),
    Dense(DMatrix<f64>),
}

impl Op {
    pub fn dim(&self) -> usize {
        match self {
            Op::Diagonal(d) => d.len(),
            Op::Dense(m) => m.nrows(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, Op::Diagonal(_))
    }

    /// `y += c * Op x`.
    pub fn apply_add(&self, c: f64, x: &[f64], y: &mut [f64]) {
        match self {
            Op::Diagonal(d) => {
                for i in 0..d.len() {
                    y[i] += c * d[i] * x[i];
                }
            }
            Op::Dense(m) => {
                for i in 0..m.nrows() {
                    let mut s = 0.0;
                    for j in 0..m.ncols() {
                        s += m[(i, j)] * x[j];
                    }
                    y[i] += c * s;
                }
            }
        }
    }
}

/// `A(t) = a(t) A_base` with a scalar profile `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorFamily {
    pub base: Op,
    pub profile: Profile,
}

impl OperatorFamily {
    pub fn autonomous(base: Op) -> Self {
        Self { base, profile: Profile::constant(1.0) }
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn is_autonomous(&self) -> bool {
        matches!(self.profile, Profile::Constant { .. })
    }

    pub fn is_diagonal(&self) -> bool {
        self.base.is_diagonal()
    }

    /// Cell average of `a(t)`.
    pub fn profile_mean(&self, a: f64, b: f64) -> f64 {
        self.profile.mean(a, b)
    }

    /// `A(t)` as a dense matrix.
    pub fn matrix_at(&self, t: f64) -> DMatrix<f64> {
        let s = self.profile.eval(t);
        match &self.base {
            Op::Diagonal(d) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)) * s,
            Op::Dense(m) => m * s,
        }
    }

    /// The autonomous operator `ā A_base` with `ā` the mean of `a` on
    /// `[0, horizon]`.
    pub fn time_average(&self, horizon: f64) -> Self {
        let m = self.profile.mean(0.0, horizon);
        Self { base: self.base.clone(), profile: Profile::constant(m) }
    }
}

/// Diagonal heat model on the first `n` modes: `A = diag(1 + (iπ)^2)`.
pub fn make_diagonal_heat(n: usize, gamma_star: f64) -> Result<(OperatorFamily, HilbertScale)> {
    let scale = HilbertScale::heat(n, gamma_star)?;
    let a = OperatorFamily::autonomous(Op::Diagonal(scale.eigenvalues().to_vec()));
    Ok((a, scale))
}

/// `a(t) A` for a profile with a positive lower bound on `[0, horizon]`.
pub fn make_nonautonomous(base: &OperatorFamily, profile: Profile, horizon: f64) -> Result<OperatorFamily> {
    profile.validate()?;
    let lb = profile.lower_bound(horizon);
    if !(lb > 0.0) {
        return parameter(format!("profile lower bound {lb} on [0, {horizon}] must be positive"));
    }
    Ok(OperatorFamily { base: base.base.clone(), profile })
}

/// Diagonal operator of the scale with one upper Jordan-type coupling
/// `coupling * λ_1` between the first two modes.
pub fn make_jordan_block(scale: &HilbertScale, coupling: f64) -> Result<OperatorFamily> {
    let n = scale.dim();
    if n < 2 {
        return invalid("a coupled block needs at least two modes");
    }
    let mut m = DMatrix::zeros(n, n);
    for (i, l) in scale.eigenvalues().iter().enumerate() {
        m[(i, i)] = *l;
    }
    m[(0, 1)] = coupling * scale.eigenvalues()[0];
    Ok(OperatorFamily::autonomous(Op::Dense(m)))
}

/// Which integrability class a perturbation component is measured in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationClass {
    /// Maps `X_{1-1/q}` into `X_0`; envelope in `L^q`.
    LowerOrder { q: f64 },
    /// Maps `X_β` (default `β = 1`) into `X_γ`; exponents from the triple.
    Mixed { triple: Triple },
    /// Maps `X_1` into the trace level `X_{1-1/p}`; envelope in `L^{p'}`.
    TraceValued { p: f64 },
}

/// One summand `sign * b(t) Λ` of the perturbation. `Λ = diag(λ^{β-γ})`
/// has norm one from `X_β` to `X_γ`, so `b` is the envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationComponent {
    pub envelope: Profile,
    pub sign: f64,
    pub domain_level: f64,
    pub target_level: f64,
    pub class: PerturbationClass,
}

impl PerturbationComponent {
    pub fn lower_order(q: f64, envelope: Profile, sign: f64) -> Result<Self> {
        if !(q > 1.0 && q.is_finite()) {
            return parameter(format!("q = {q} must be finite and exceed 1"));
        }
        Self::checked(envelope, sign, 1.0 - 1.0 / q, 0.0, PerturbationClass::LowerOrder { q })
    }

    pub fn mixed(triple: Triple, envelope: Profile, sign: f64) -> Result<Self> {
        let g = to_f64(&triple.gamma);
        Self::checked(envelope, sign, 1.0, g, PerturbationClass::Mixed { triple })
    }

    /// Mixed component bounded only on `X_β`.
    pub fn mixed_from(triple: Triple, beta: f64, envelope: Profile, sign: f64) -> Result<Self> {
        let g = to_f64(&triple.gamma);
        Self::checked(envelope, sign, beta, g, PerturbationClass::Mixed { triple })
    }

    pub fn trace_valued(p: f64, envelope: Profile, sign: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return parameter(format!("p = {p} must be finite and exceed 1"));
        }
        Self::checked(envelope, sign, 1.0, 1.0 - 1.0 / p, PerturbationClass::TraceValued { p })
    }

    fn checked(envelope: Profile, sign: f64, domain_level: f64, target_level: f64, class: PerturbationClass) -> Result<Self> {
        envelope.validate()?;
        if sign != 1.0 && sign != -1.0 {
            return parameter(format!("sign = {sign} must be +1 or -1"));
        }
        Ok(Self { envelope, sign, domain_level, target_level, class })
    }

    /// Diagonal of `Λ` on the given scale.
    pub fn lambda(&self, scale: &HilbertScale) -> Vec<f64> {
        scale.level_weights(self.domain_level - self.target_level)
    }

    /// Exponents `(q_b, μ_b)` of the envelope space for base pair `(p, κ)`.
    /// `None` when only the zero envelope is allowed.
    pub fn envelope_exponents(&self, p: &Q, kappa: &Q) -> Result<Option<(f64, f64)>> {
        match &self.class {
            PerturbationClass::LowerOrder { q } => Ok(Some((*q, 0.0))),
            PerturbationClass::TraceValued { p } => Ok(Some((p / (p - 1.0), 0.0))),
            PerturbationClass::Mixed { triple } => {
                if self.domain_level != 1.0 {
                    let g = crate::admissibility::generalized_b_params(
                        p,
                        kappa,
                        &triple.r,
                        &triple.nu,
                        &f64_to_q(self.domain_level)?,
                    )?;
                    return Ok(match g.exponents {
                        HolderExponents::Finite { q, mu } => Some((to_f64(&q), to_f64(&mu))),
                        HolderExponents::ZeroEnvelope => None,
                    });
                }
                Ok(match holder_exponents(p, kappa, &triple.r, &triple.nu)? {
                    HolderExponents::Finite { q, mu } => Some((to_f64(&q), to_f64(&mu))),
                    HolderExponents::ZeroEnvelope => None,
                })
            }
        }
    }
}

pub(crate) fn f64_to_q(x: f64) -> Result<Q> {
    // levels are short decimals or simple fractions in practice
    for d in 1..=1_000_000i128 {
        let n = (x * d as f64).round();
        if ((n / d as f64) - x).abs() <= 1e-15 * x.abs().max(1.0) {
            return Ok(Q::new(n as i128, d));
        }
        if d > 64 {
            break;
        }
    }
    invalid(format!("level {x} is not a simple fraction"))
}

/// Perturbation `B(t) = Σ_i sign_i b_i(t) Λ_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub components: Vec<PerturbationComponent>,
}

impl Perturbation {
    pub fn none() -> Self {
        Self { components: Vec::new() }
    }

    pub fn single(c: PerturbationComponent) -> Self {
        Self { components: vec![c] }
    }

    /// Largest `|B(t) x|_{target} / (b(t) |x|_{domain})` over unit vectors,
    /// per component; equals one by construction.
    pub fn envelope_ratio(&self, scale: &HilbertScale) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                let l = c.lambda(scale);
                scale
                    .eigenvalues()
                    .iter()
                    .zip(&l)
                    .map(|(e, li)| e.powf(c.target_level) * li / e.powf(c.domain_level))
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// `B(t)` as a dense matrix.
    pub fn matrix_at(&self, t: f64, scale: &HilbertScale) -> DMatrix<f64> {
        let n = scale.dim();
        let mut m = DMatrix::zeros(n, n);
        for c in &self.components {
            let b = c.sign * c.envelope.eval(t);
            for (i, l) in c.lambda(scale).iter().enumerate() {
                m[(i, i)] += b * l;
            }
        }
        m
    }
}

/// A complete linear problem `u' + A(t)u + B(t)u = Σ f_k`, `u(0) = u0`,
/// posed in `L^p(w_κ; X_0)`.
///
/// Slot conventions: for mixed-scale solves slot 0 is the `X_0`-valued part
/// and slot `i >= 1` belongs to perturbation component `i - 1`; for
/// trace-valued solves slot 0 is the `L^p(X_0)` part and slot 1 the
/// `L^1`-in-time trace-valued part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub scale: HilbertScale,
    pub a: OperatorFamily,
    pub b: Perturbation,
    pub f: Vec<Slot>,
    pub u0: Vec<f64>,
    pub p: f64,
    pub kappa: f64,
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        let n = self.scale.dim();
        if self.a.dim() != n || self.u0.len() != n {
            return invalid("operator, initial value and scale dimensions differ");
        }
        if self.f.iter().any(|s| s.f.dim != n) {
            return invalid("inhomogeneity dimension differs from the scale");
        }
        if self.u0.iter().any(|x| !x.is_finite()) {
            return invalid("initial value must be finite");
        }
        crate::spaces::check_weight(self.p, self.kappa, true)?;
        self.a.profile.validate()?;
        for c in &self.b.components {
            c.envelope.validate()?;
        }
        Ok(())
    }

    /// The same problem on the coordinates `modes` (ascending) of a
    /// diagonal model; the modes decouple, so this is exact.
    pub fn restrict(&self, modes: &[usize]) -> Result<Problem> {
        let d = match &self.a.base {
            Op::Diagonal(d) => d,
            Op::Dense(_) => return invalid("only diagonal problems split into modes"),
        };
        if modes.is_empty() || modes.windows(2).any(|w| w[0] >= w[1]) || *modes.last().unwrap() >= d.len() {
            return invalid("modes must be ascending, distinct and in range");
        }
        let pick = |v: &[f64]| modes.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let scale = HilbertScale::new(pick(self.scale.eigenvalues()), self.scale.gamma_star())?;
        let a = OperatorFamily { base: Op::Diagonal(pick(d)), profile: self.a.profile.clone() };
        let f = self.f.iter().map(|s| Slot { f: s.f.restrict(modes), ..s.clone() }).collect();
        Ok(Problem { scale, a, b: self.b.clone(), f, u0: pick(&self.u0), p: self.p, kappa: self.kappa })
    }

    /// Sum of all slots.
    pub fn total_forcing(&self) -> TimeFunction {
        let mut out = TimeFunction::zero(self.scale.dim());
        for s in &self.f {
            out.terms.extend(s.f.terms.iter().cloned());
        }
        let cells: Vec<&CellData> = self.f.iter().filter_map(|s| s.f.cells.as_ref()).collect();
        if cells.len() == 1 {
            out.cells = Some(cells[0].clone());
        } else if cells.len() > 1 {
            out.cells = Some(merge_cells(&cells, self.scale.dim()));
        }
        out
    }
}

fn merge_cells(cells: &[&CellData], dim: usize) -> CellData {
    let mut breaks: Vec<f64> = cells.iter().flat_map(|c| c.breaks.iter().cloned()).collect();
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let mut values = vec![0.0; dim * (breaks.len() - 1)];
    for k in 0..breaks.len() - 1 {
        let mid = 0.5 * (breaks[k] + breaks[k + 1]);
        for c in cells {
            let nb = c.breaks.len();
            if mid > c.breaks[0] && mid <= c.breaks[nb - 1] {
                let i = c.breaks.partition_point(|&x| x < mid) - 1;
                for d in 0..dim {
                    values[k * dim + d] += c.values[i * dim + d];
                }
            }
        }
    }
    CellData { breaks, values }
}

/// One slot of an inhomogeneity with the space it is measured in,
/// `L^r(w_ν; X_γ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub f: TimeFunction,
    pub r: f64,
    pub nu: f64,
    pub gamma: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_norm_closed_form() {
        // |c t^{-α}|_{L^q(τ, σ)} with weight t^μ
        let p = Profile::power(2.0, 0.25);
        let v = p.weighted_norm(0.0, 1.0, 2.0, 0.0).unwrap();
        // ∫_0^1 4 t^{-1/2} = 8
        assert!((v - 8f64.sqrt()).abs() < 1e-14);
        assert!(Profile::power(1.0, 0.5).weighted_norm(0.0, 1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn inversion_is_exact_for_constants() {
        let p = Profile::constant(1.0);
        let s = p.invert_power_integral(0.25, 1.0 / 16.0, 2.0, 0.0, 1.0);
        assert!((s - 0.3125).abs() < 1e-15);
        assert_eq!(p.invert_power_integral(0.9, 1.0, 2.0, 0.0, 1.0), 1.0);
        let w = Profile::Steps { breaks: vec![0.0, 0.5, 1.0], values: vec![1.0, 2.0] };
        let s = w.invert_power_integral(0.0, 0.5 + 0.4, 2.0, 0.0, 1.0);
        assert!((s - 0.6).abs() < 1e-11);
    }

    #[test]
    fn moments_of_power_profile() {
        let p = Profile::power(1.0, 0.5);
        let m = p.moments(0.0, 1.0, 0.0);
        assert!((m[0] - 2.0).abs() < 1e-13);
        assert!((m[1] - 2.0 / 3.0).abs() < 1e-13);
        assert!((m[2] - 0.4).abs() < 1e-13);
        let m = p.moments(4.0, 9.0, 4.0);
        // ∫_4^9 (t-4) t^{-1/2} = [2/3 t^{3/2} - 8 t^{1/2}]_4^9 = (18 - 24) - (16/3 - 16)
        assert!((m[1] - (-6.0 + 32.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn window_and_steps_eval() {
        let w = Profile::spike(1.0, 0.1);
        assert_eq!(w.eval(0.0), 0.0);
        assert!((w.eval(0.05) - 10.0).abs() < 1e-14);
        assert!((w.moments(0.0, 1.0, 0.5)[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn envelope_is_exact_operator_norm() {
        let s = HilbertScale::heat(6, 1.0).unwrap();
        let t = Triple::new(Q::new(4, 3), Q::new(0, 1), Q::new(1, 2));
        let b = Perturbation::single(PerturbationComponent::mixed(t, Profile::power(1.0, 0.25), 1.0).unwrap());
        for r in b.envelope_ratio(&s) {
            assert!((r - 1.0).abs() < 1e-12);
        }
        // |B x|_{1/2} = b |x|_1 exactly for the γ = 1/2 component
        let x = [0.3, -1.0, 2.0, 0.0, 0.1, 0.7];
        let m = b.matrix_at(0.5, &s);
        let bx: Vec<f64> = (0..6).map(|i| m[(i, i)] * x[i]).collect();
        let lhs = s.norm(&bx, 0.5);
        let rhs = 0.5f64.powf(-0.25) * s.norm(&x, 1.0);
        assert!((lhs - rhs).abs() < 1e-12 * rhs);
    }

    #[test]
    fn cell_data_moments() {
        let f = TimeFunction::cells(1, vec![0.0, 1.0, 2.0], vec![1.0, 3.0]).unwrap();
        let mut m0 = [0.0];
        let mut m1 = [0.0];
        f.add_moments(0.5, 1.5, &mut m0, &mut m1).unwrap();
        assert!((m0[0] - 2.0).abs() < 1e-15);
        // ∫_{0.5}^{1} (s-1) ds + 3 ∫_1^{1.5} (s-1) ds = -1/8 + 3/8
        assert!((m1[0] - 0.25).abs() < 1e-15);
        let s = HilbertScale::new(vec![1.0], 1.0).unwrap();
        assert!((f.weighted_norm(0.0, 2.0, 2.0, 0.0, 0.0, &s).unwrap() - 10f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn nonautonomous_needs_positive_profile() {
        let (a, _) = make_diagonal_heat(3, 1.0).unwrap();
        assert!(make_nonautonomous(&a, Profile::Sine { mean: 1.0, amp: 0.5, freq: 1.0 }, 1.0).is_ok());
        assert!(make_nonautonomous(&a, Profile::Sine { mean: 1.0, amp: 1.5, freq: 1.0 }, 1.0).is_err());
    }
}
