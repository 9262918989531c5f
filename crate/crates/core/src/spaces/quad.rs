//! Closed-form weight moments and small fixed quadrature rules.

/// Gauss-Legendre abscissae on [-1, 1], three points.
pub const GAUSS3_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
/// Matching weights.
pub const GAUSS3_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Eight-point Gauss-Legendre rule on [-1, 1].
pub const GAUSS8_X: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
pub const GAUSS8_W: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// `∫_a^b t^e dt`, infinite when `a == 0` and `e <= -1`.
pub fn pow_integral(a: f64, b: f64, e: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let e1 = e + 1.0;
    if a == 0.0 {
        if e1 <= 0.0 {
            return f64::INFINITY;
        }
        return b.powf(e1) / e1;
    }
    let l = ((b - a) / a).ln_1p();
    if e1 == 0.0 {
        return l;
    }
    a.powf(e1) * (e1 * l).exp_m1() / e1
}

/// Moments `∫_{-1}^{1} (c + h x / 2)^e x^j dx` for `j = 0, 1, 2`, where
/// `c` and `h` are the midpoint and width of `[a, b]`. Entries are infinite
/// when the power is not integrable at `a = 0`.
pub fn power_moments(a: f64, b: f64, e: f64) -> [f64; 3] {
    let h = b - a;
    if h <= 0.0 {
        return [0.0; 3];
    }
    let c = 0.5 * (a + b);
    if e == 0.0 {
        return [2.0, 0.0, 2.0 / 3.0];
    }
    if a < h {
        let p0 = pow_integral(a, b, e);
        if !p0.is_finite() {
            return [f64::INFINITY; 3];
        }
        let p1 = pow_integral(a, b, e + 1.0);
        let p2 = pow_integral(a, b, e + 2.0);
        let s = 2.0 / h;
        return [
            s * p0,
            s * s * (p1 - c * p0),
            s * s * s * (p2 - 2.0 * c * p1 + c * c * p0),
        ];
    }
    // binomial series in rho = h / (2c) <= 1/3
    let rho = h / (2.0 * c);
    let mut out = [0.0; 3];
    for (j, slot) in out.iter_mut().enumerate() {
        let mut coef = 1.0;
        let mut rk = 1.0;
        let mut sum = 0.0;
        let mut small = 0;
        for k in 0..400usize {
            if (k + j) % 2 == 0 {
                let term = coef * rk * 2.0 / ((k + j + 1) as f64);
                sum += term;
                if term.abs() <= 1e-17 * sum.abs() {
                    small += 1;
                    if small >= 2 {
                        break;
                    }
                } else {
                    small = 0;
                }
            }
            coef *= (e - k as f64) / ((k + 1) as f64);
            rk *= rho;
            if coef == 0.0 {
                break;
            }
        }
        *slot = c.powf(e) * sum;
    }
    out
}

/// Product-integration weights for `∫_a^b t^κ g(t) dt ≈ Σ_k W_k g(t_k)` with
/// `t_k` the three Gauss points of the cell. The weights integrate the
/// quadratic interpolant of `g` against the exact weight.
pub fn weighted_gauss3(a: f64, b: f64, kappa: f64) -> [f64; 3] {
    let h = b - a;
    if kappa == 0.0 {
        return [0.5 * h * GAUSS3_W[0], 0.5 * h * GAUSS3_W[1], 0.5 * h * GAUSS3_W[2]];
    }
    let m = power_moments(a, b, kappa);
    let g = GAUSS3_X[2];
    let g2 = g * g;
    // Lagrange basis at (-g, 0, g) in monomial coefficients
    let basis = [
        [0.0, -0.5 / g, 0.5 / g2],
        [1.0, 0.0, -1.0 / g2],
        [0.0, 0.5 / g, 0.5 / g2],
    ];
    let mut w = [0.0; 3];
    for k in 0..3 {
        w[k] = 0.5 * h * (basis[k][0] * m[0] + basis[k][1] * m[1] + basis[k][2] * m[2]);
    }
    w
}

/// Gauss points of `[a, b]`.
pub fn gauss3_points(a: f64, b: f64) -> [f64; 3] {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    [c + r * GAUSS3_X[0], c, c + r * GAUSS3_X[2]]
}

/// `∫_a^b f` by the eight-point rule on `pieces` equal subintervals.
pub fn gauss8(a: f64, b: f64, pieces: usize, f: impl Fn(f64) -> f64) -> f64 {
    let n = pieces.max(1);
    let w = (b - a) / n as f64;
    let mut s = 0.0;
    for i in 0..n {
        let lo = a + w * i as f64;
        let c = lo + 0.5 * w;
        for k in 0..8 {
            s += GAUSS8_W[k] * f(c + 0.5 * w * GAUSS8_X[k]);
        }
    }
    0.5 * w * s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(a: f64, b: f64, e: f64, j: i32) -> f64 {
        let h = b - a;
        let c = 0.5 * (a + b);
        if a > h {
            return gauss8(-1.0, 1.0, 400, |x| (c + 0.5 * h * x).powf(e) * x.powi(j));
        }
        // substitution t = a + h s^4 removes the endpoint singularity
        let integral = gauss8(0.0, 1.0, 400, |s| {
            let t = a + h * s.powi(4);
            t.powf(e) * (t - c).powi(j) * 4.0 * h * s.powi(3)
        });
        (2.0 / h).powi(j + 1) * integral
    }

    #[test]
    fn pow_integral_matches_antiderivative() {
        assert!((pow_integral(0.0, 2.0, 0.5) - 2f64.powf(1.5) / 1.5).abs() < 1e-14);
        assert!((pow_integral(1.0, 3.0, -1.0) - 3f64.ln()).abs() < 1e-14);
        assert!(pow_integral(0.0, 1.0, -1.0).is_infinite());
        let near = pow_integral(1.0, 1.0 + 1e-9, 2.0);
        assert!((near - 1e-9).abs() < 1e-15);
    }

    #[test]
    fn moments_agree_with_quadrature_near_and_far() {
        for &(a, b, e) in &[
            (0.0, 0.1, 0.7),
            (0.05, 0.1, 2.5),
            (10.0, 10.5, 1.3),
            (3.0, 4.0, -0.25),
            (100.0, 100.001, 3.0),
        ] {
            let m = power_moments(a, b, e);
            for j in 0..3 {
                let r = brute(a, b, e, j as i32);
                assert!((m[j] - r).abs() <= 1e-10 * r.abs().max(1e-300) + 1e-14 * m[0].abs(), "{a} {b} {e} {j}: {} vs {r}", m[j]);
            }
        }
    }

    #[test]
    fn product_weights_reduce_to_gauss_without_weight() {
        let w = weighted_gauss3(0.0, 2.0, 0.0);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
        let w = weighted_gauss3(1.0, 3.0, 1e-300);
        assert!((w[0] - 5.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn product_weights_are_exact_for_quadratics() {
        let (a, b, k) = (0.0, 0.3, 1.5);
        let w = weighted_gauss3(a, b, k);
        let x = gauss3_points(a, b);
        let g = |t: f64| 1.0 + 2.0 * t - 3.0 * t * t;
        let q: f64 = (0..3).map(|i| w[i] * g(x[i])).sum();
        let exact = pow_integral(a, b, k) + 2.0 * pow_integral(a, b, k + 1.0) - 3.0 * pow_integral(a, b, k + 2.0);
        assert!((q - exact).abs() < 1e-14);
    }
}
