//! Block-level spot variance estimators and model-free roughness measures.

use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Spot variance estimates at or below this value are treated as degenerate
/// and excluded from the log transform.
pub const C_FLOOR: f64 = 1e-10;
/// ECF moduli below this are treated as degenerate.
pub const MODULUS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EcfEstimate {
    pub l_hat: Complex64,
    /// `-(2/u²)·ln|L̂|`, clamped at zero.
    pub c_hat: f64,
    /// `ln ĉ`; `None` when the block is degenerate.
    pub frak_c: Option<f64>,
    pub u: f64,
    pub degenerate: bool,
    pub block_id: Option<(usize, usize)>,
}

/// Empirical characteristic function of the standardized returns of one block,
/// `L̂ = (1/k)·Σ exp(i·u·r/√Δ)`, and the implied spot variance.
pub fn ecf_block(returns: &[f64], delta_n: f64, u: f64) -> Result<EcfEstimate> {
    if u == 0.0 || !u.is_finite() {
        return Err(Error::domain(format!("ECF exponent must be finite and non-zero, got {u}")));
    }
    if returns.is_empty() {
        return Err(Error::domain("ECF block needs at least one return"));
    }
    let scale = u / delta_n.sqrt();
    let (mut re, mut im) = (0.0, 0.0);
    for &r in returns {
        let (s, c) = (scale * r).sin_cos();
        re += c;
        im += s;
    }
    let k = returns.len() as f64;
    let l_hat = Complex64::new(re / k, im / k);
    let modulus = l_hat.norm();
    let low_modulus = modulus < MODULUS_FLOOR;
    let c_hat = (-2.0 / (u * u) * modulus.max(MODULUS_FLOOR).ln()).max(0.0);
    let degenerate = low_modulus || c_hat <= C_FLOOR;
    Ok(EcfEstimate {
        l_hat,
        c_hat,
        frak_c: (!degenerate).then(|| c_hat.ln()),
        u,
        degenerate,
        block_id: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BipowerEstimate {
    pub c_hat: f64,
    /// Number of adjacent-return products in the sum.
    pub terms: usize,
    /// Set when the block starts at the first return of the day and the sum
    /// was shortened and renormalised.
    pub shortened: bool,
}

/// Bipower spot variance `π/(2·k·Δ)·Σ|r_i||r_{i-1}|` over the returns at
/// `range` (zero-based indices into the day's returns). Predecessors come
/// from the same day only.
pub fn bipower_block(day_returns: &[f64], range: Range<usize>, delta_n: f64) -> Result<BipowerEstimate> {
    if range.end > day_returns.len() || range.is_empty() {
        return Err(Error::domain(format!(
            "bipower block {range:?} outside a day of {} returns",
            day_returns.len()
        )));
    }
    let first = range.start.max(1);
    let terms = range.end.saturating_sub(first);
    if terms == 0 {
        return Err(Error::domain("bipower block has no same-day predecessor pairs"));
    }
    let sum: f64 = (first..range.end)
        .map(|i| (day_returns[i] * day_returns[i - 1]).abs())
        .sum();
    Ok(BipowerEstimate {
        c_hat: PI / (2.0 * terms as f64 * delta_n) * sum,
        terms,
        shortened: range.start == 0,
    })
}

fn increments(path: &[f64]) -> Vec<f64> {
    path.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Ratio of realized variance at twice the step to realized variance at the
/// step, with the path held constant outside its interval and `0/0 = 2`.
pub fn rv_ratio(path: &[f64]) -> Result<f64> {
    let n = path.len().saturating_sub(1);
    if n < 2 {
        return Err(Error::domain(format!("rv_ratio needs n >= 2 steps, got {n}")));
    }
    let at = |i: isize| path[i.clamp(0, n as isize) as usize];
    let mut num = 0.0;
    for i in 0..=n as isize {
        let d = at(i + 1) - at(i - 1);
        num += d * d;
    }
    num *= 0.5;
    let den: f64 = increments(path).iter().map(|d| d * d).sum();
    if den == 0.0 {
        return Ok(if num == 0.0 { 2.0 } else { f64::INFINITY });
    }
    Ok(num / den)
}

/// Sample autocorrelations of the path increments at lags `1..=max_lag`,
/// uncentred and normalised by the increment sum of squares. A zero
/// denominator yields 1 at every lag.
pub fn increment_acf(path: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = path.len().saturating_sub(1);
    if max_lag == 0 || n < max_lag + 2 {
        return Err(Error::domain(format!(
            "increment_acf needs n >= max_lag + 2 (n={n}, max_lag={max_lag})"
        )));
    }
    let d = increments(path);
    let den: f64 = d.iter().map(|x| x * x).sum();
    if den == 0.0 {
        return Ok(vec![1.0; max_lag]);
    }
    Ok((1..=max_lag)
        .map(|lag| d[lag..].iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() / den)
        .collect())
}
