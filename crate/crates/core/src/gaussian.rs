//! Standard normal CDF, its antiderivative and the scaled complementary
//! error function.
//!
//! `libm::erfc` is accurate to about one ulp, which puts Φ within
//! `PHI_ABS_ERR` of the true value everywhere.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

/// Absolute error budget for [`phi_cdf`] and [`phi_sf`].
pub const PHI_ABS_ERR: f64 = 1e-15;

pub fn phi_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Φ(x).
pub fn phi_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// 1 − Φ(x) without cancellation.
pub fn phi_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Ψ(z) = ∫_{-∞}^z Φ(t) dt = zΦ(z) + φ(z).
pub fn phi_integral(z: f64) -> f64 {
    if z < -1.0 {
        // Φ(z) = ½ e^{-z²/2} erfcx(-z/√2); factor e^{-z²/2} out
        let e = (-0.5 * z * z).exp();
        e * (0.5 * z * erfcx(-z * FRAC_1_SQRT_2) + 1.0 / (2.0 * PI).sqrt())
    } else {
        z * phi_cdf(z) + phi_pdf(z)
    }
}

/// e^{x²} erfc(x).
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        if x < -26.0 {
            return f64::INFINITY;
        }
        return 2.0 * exp_sq(x) - erfcx(-x);
    }
    if x < 5.0 {
        return exp_sq(x) * libm::erfc(x);
    }
    // continued fraction erfc(x) = e^{-x²}/√π · 1/(x + ½/(x + 1/(x + 3/2/(x + …))))
    let mut t = x;
    for k in (1..=60).rev() {
        t = x + (k as f64 * 0.5) / t;
    }
    1.0 / (t * PI.sqrt())
}

/// e^{x²} with the rounding error of x² compensated.
fn exp_sq(x: f64) -> f64 {
    let s = x * x;
    let err = x.mul_add(x, -s);
    s.exp() * (1.0 + err)
}

/// Φ^{-1}(p) for p in (0, 1); ±∞ at the ends.
pub fn phi_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    // Acklam's rational approximation, then Halley steps
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549671010029720e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let plow = 0.02425;
    let mut x = if p < plow {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - plow {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    for _ in 0..3 {
        // residual on the side with no cancellation
        let e = if x < 0.0 { phi_cdf(x) - p } else { (1.0 - p) - phi_sf(x) };
        let d = phi_pdf(x);
        if d == 0.0 {
            break;
        }
        let u = e / d;
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

pub const SQRT_2PI_OVER_4: f64 = 0.626_657_068_657_750_1;

/// √(2/π) = E|N|.
pub fn sqrt_2_over_pi() -> f64 {
    SQRT_2 / PI.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn cdf_reference_values() {
        assert_eq!(phi_cdf(0.0), 0.5);
        assert!((phi_cdf(1.0) - 0.841_344_746_068_542_9).abs() < PHI_ABS_ERR);
        assert!((phi_cdf(-3.0) / 0.001_349_898_031_630_094_5 - 1.0).abs() < 1e-14);
        assert!((phi_sf(8.0) / 6.220_960_574_271_784e-16 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn erfcx_is_continuous_and_matches() {
        for &x in &[0.0f64, 0.3, 1.0, 2.5, 4.9] {
            let direct = (x * x).exp() * libm::erfc(x);
            assert!((erfcx(x) - direct).abs() < 1e-14 * direct);
        }
        let below = erfcx(5.0 - 1e-12);
        let above = erfcx(5.0);
        assert!((below - above).abs() < 1e-13);
        // asymptote 1/(x√π)
        assert!((erfcx(1e6) * 1e6 * PI.sqrt() - 1.0).abs() < 1e-11);
        assert!((erfcx(-1.0) - (2.0 * 1f64.exp() - erfcx(1.0))).abs() < 1e-14);
    }

    #[test]
    fn psi_is_antiderivative() {
        for &(a, b) in &[(-9.0, -2.0), (-2.0, 0.5), (0.5, 6.0)] {
            let q = simpson(phi_cdf, a, b, 20_000);
            assert!((phi_integral(b) - phi_integral(a) - q).abs() < 1e-12);
        }
        assert!((phi_integral(0.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-16);
        // tail: Ψ(z) ~ φ(z)/z² for z → -∞
        let z = -30.0;
        assert!(phi_integral(z) > 0.0 && phi_integral(z) < phi_pdf(z) / (z * z));
    }

    #[test]
    fn quantile_inverts() {
        for &p in &[1e-300, 1e-12, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-12] {
            let x = phi_quantile(p);
            let back = if x < 0.0 { phi_cdf(x) } else { 1.0 - phi_sf(x) };
            assert!((back - p).abs() <= 1e-15 * p.max(1e-3), "p = {p}");
        }
    }
}
