//! Numeric utilities shared by the estimators and the test pipeline.
//!
//! The normal CDF is evaluated through the complementary error function
//! (`Φ(x) = erfc(-x/√2)/2`), which keeps full relative precision in the lower
//! tail where rejection decisions are made. The quantile starts from Acklam's
//! rational approximation (relative error ~1e-9) and is polished with two
//! Halley steps against that CDF.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Inverse of the standard normal CDF.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!(
            "normal quantile requires p in (0,1), got {p}"
        )));
    }
    if p > 0.5 {
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

// p in (0, 0.5]
fn lower_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
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
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };

    // Halley refinement; the residual is computed relative to the density so
    // the step stays well-conditioned deep in the tail.
    for _ in 0..2 {
        let e = normal_cdf(x) - p;
        let u = e / normal_pdf(x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Gamma function (Lanczos approximation, relative error ~1e-15).
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Jump scale `c` of the tempered-stable Lévy density
/// `c·e^{-λ|x|}/|x|^{α+1}` that makes the jump second moment equal to
/// `0.2` per unit of spot variance: `c = 0.1·λ^{2-α}/Γ(2-α)`.
pub fn jump_scale_from(alpha: f64, lambda: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::domain(format!(
            "jump activity index must lie in (0,2), got {alpha}"
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!(
            "tempering rate must be positive, got {lambda}"
        )));
    }
    Ok(0.1 * lambda.powf(2.0 - alpha) / gamma(2.0 - alpha))
}

/// Second moment `∫x²ν(dx)` per unit variance of the symmetric tempered-stable
/// measure with scale `c`: `2c·Γ(2-α)/λ^{2-α}`.
pub fn jump_second_moment(alpha: f64, lambda: f64, c: f64) -> f64 {
    2.0 * c * gamma(2.0 - alpha) / lambda.powf(2.0 - alpha)
}

/// Characteristic-exponent scale `θ = √(-2 ln 𝔏)` for a target modulus `𝔏`.
pub fn theta_from_modulus(frak_l: f64) -> Result<f64> {
    if !(frak_l > 0.0 && frak_l < 1.0) {
        return Err(Error::domain(format!(
            "target ECF modulus must lie in (0,1), got {frak_l}"
        )));
    }
    Ok((-2.0 * frak_l.ln()).sqrt())
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..(order + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// Adaptive Gauss–Legendre quadrature of a smooth integrand on `[a, b]`.
///
/// Panels are bisected until the 16-point rule on the panel agrees with the
/// sum over its two halves to `rel_tol`. Fails if the recursion depth is
/// exhausted before convergence.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    let (nodes, weights) = gauss_legendre(16);
    let rule = |lo: f64, hi: f64| {
        let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        h * nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| w * f(c + h * x))
            .sum::<f64>()
    };
    // Coarse first pass supplies a global scale for the absolute floor.
    let coarse: f64 = (0..8)
        .map(|i| {
            let w = (b - a) / 8.0;
            rule(a + i as f64 * w, a + (i + 1) as f64 * w)
        })
        .sum();
    let floor = coarse.abs() * rel_tol * 1e-3;

    let mut total = 0.0;
    let mut stack = vec![(a, b, rule(a, b), 0u32)];
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let (left, right) = (rule(lo, mid), rule(mid, hi));
        let halves = left + right;
        let err = (halves - whole).abs();
        if err <= rel_tol * halves.abs() || err <= floor {
            total += halves;
        } else if depth >= 60 {
            return Err(Error::Numeric(format!(
                "quadrature did not converge on [{lo:e}, {hi:e}] (error {err:e})"
            )));
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    if !total.is_finite() {
        return Err(Error::Numeric(format!(
            "quadrature produced a non-finite value on [{a:e}, {b:e}]"
        )));
    }
    Ok(total)
}
