//! Exact fractional Brownian motion on a regular grid.
//!
//! Small grids use the sequential Cholesky factorisation of the Toeplitz
//! covariance of fractional Gaussian noise (Durbin–Levinson recursion, O(n²)
//! per path). Larger grids use circulant embedding (Davies–Harte), which is
//! exact whenever the embedding's eigenvalues are non-negative; otherwise the
//! generator falls back to the Cholesky route and reports it.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Grids up to this size use the Cholesky route.
pub const CHOLESKY_MAX_N: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FbmMethod {
    Cholesky,
    CirculantEmbedding,
}

#[derive(Debug, Clone)]
pub struct FbmPath {
    /// `B^H` at `0, T/n, ..., T`; the first value is 0.
    pub values: Vec<f64>,
    pub method: FbmMethod,
    /// Set when circulant embedding was requested but had a negative eigenvalue.
    pub fell_back: bool,
}

/// Autocovariance of unit-step fractional Gaussian noise.
pub fn fgn_autocovariance(hurst: f64, k: usize) -> f64 {
    let k = k as f64;
    let h2 = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Reusable generator for many paths with the same `(H, n, T)`.
pub struct FbmGenerator {
    hurst: f64,
    n: usize,
    scale: f64,
    method: FbmMethod,
    fell_back: bool,
    circulant: Option<Circulant>,
    acov: Vec<f64>,
}

struct Circulant {
    sqrt_eig: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl FbmGenerator {
    /// Picks the method by grid size.
    pub fn new(hurst: f64, n: usize, horizon: f64) -> Result<Self> {
        let method = if n <= CHOLESKY_MAX_N {
            FbmMethod::Cholesky
        } else {
            FbmMethod::CirculantEmbedding
        };
        Self::with_method(hurst, n, horizon, method)
    }

    pub fn with_method(hurst: f64, n: usize, horizon: f64, method: FbmMethod) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::domain(format!("Hurst parameter must lie in (0,1), got {hurst}")));
        }
        if n < 2 {
            return Err(Error::domain(format!("fBm grid needs n >= 2, got {n}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        let acov: Vec<f64> = (0..=n).map(|k| fgn_autocovariance(hurst, k)).collect();
        let scale = (horizon / n as f64).powf(hurst);
        let mut gen = Self {
            hurst,
            n,
            scale,
            method,
            fell_back: false,
            circulant: None,
            acov,
        };
        if method == FbmMethod::CirculantEmbedding {
            match gen.embed() {
                Some(c) => gen.circulant = Some(c),
                None => {
                    log::warn!(
                        "circulant embedding not non-negative definite for H={hurst}, n={n}; using Cholesky"
                    );
                    gen.method = FbmMethod::Cholesky;
                    gen.fell_back = true;
                }
            }
        }
        Ok(gen)
    }

    fn embed(&self) -> Option<Circulant> {
        let n = self.n;
        let m = 2 * n;
        let mut row: Vec<Complex64> = Vec::with_capacity(m);
        row.extend((0..=n).map(|k| Complex64::new(self.acov[k], 0.0)));
        row.extend((1..n).rev().map(|k| Complex64::new(self.acov[k], 0.0)));
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut row);
        let max = row.iter().map(|z| z.re).fold(0.0_f64, f64::max);
        let mut sqrt_eig = Vec::with_capacity(m);
        for z in &row {
            if z.re < -1e-10 * max {
                return None;
            }
            sqrt_eig.push(z.re.max(0.0).sqrt());
        }
        Some(Circulant { sqrt_eig, fft })
    }

    pub fn method(&self) -> FbmMethod {
        self.method
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// Fractional Gaussian noise: `n` increments of `B^H` on the grid.
    pub fn increments(&self, stream: &mut RandomStream) -> Vec<f64> {
        let mut x = match &self.circulant {
            Some(c) => self.circulant_noise(c, stream),
            None => self.cholesky_noise(stream),
        };
        for v in &mut x {
            *v *= self.scale;
        }
        x
    }

    pub fn sample(&self, stream: &mut RandomStream) -> FbmPath {
        let inc = self.increments(stream);
        let mut values = Vec::with_capacity(self.n + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for d in inc {
            acc += d;
            values.push(acc);
        }
        FbmPath {
            values,
            method: self.method,
            fell_back: self.fell_back,
        }
    }

    fn circulant_noise(&self, c: &Circulant, stream: &mut RandomStream) -> Vec<f64> {
        let n = self.n;
        let m = 2 * n;
        let mut w = vec![Complex64::new(0.0, 0.0); m];
        w[0] = Complex64::new(c.sqrt_eig[0] * stream.normal(), 0.0);
        w[n] = Complex64::new(c.sqrt_eig[n] * stream.normal(), 0.0);
        let half = std::f64::consts::FRAC_1_SQRT_2;
        for k in 1..n {
            let (a, b) = (stream.normal(), stream.normal());
            let z = Complex64::new(a, b) * (c.sqrt_eig[k] * half);
            w[k] = z;
            w[m - k] = z.conj();
        }
        c.fft.process(&mut w);
        let norm = 1.0 / (m as f64).sqrt();
        w[..n].iter().map(|z| z.re * norm).collect()
    }

    fn cholesky_noise(&self, stream: &mut RandomStream) -> Vec<f64> {
        let n = self.n;
        let g = &self.acov;
        let mut x = Vec::with_capacity(n);
        let mut phi = vec![0.0; n];
        let mut prev = vec![0.0; n];
        let mut v = g[0];
        x.push(v.sqrt() * stream.normal());
        for t in 1..n {
            // Durbin–Levinson update of the one-step predictor.
            let mut num = g[t];
            for j in 1..t {
                num -= prev[j] * g[t - j];
            }
            let k = num / v;
            phi[t] = k;
            for j in 1..t {
                phi[j] = prev[j] - k * prev[t - j];
            }
            v *= 1.0 - k * k;
            let mean: f64 = (1..=t).map(|j| phi[j] * x[t - j]).sum();
            x.push(mean + v.max(0.0).sqrt() * stream.normal());
            prev[1..=t].copy_from_slice(&phi[1..=t]);
        }
        x
    }
}

/// Exact-in-law fBm on `{0, T/n, ..., T}`.
pub fn simulate_fbm(hurst: f64, n: usize, horizon: f64, stream: &mut RandomStream) -> Result<FbmPath> {
    Ok(FbmGenerator::new(hurst, n, horizon)?.sample(stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_stream;

    #[test]
    fn method_selection_and_domain() {
        assert_eq!(FbmGenerator::new(0.3, 100, 1.0).unwrap().method(), FbmMethod::Cholesky);
        assert_eq!(
            FbmGenerator::new(0.3, 5000, 1.0).unwrap().method(),
            FbmMethod::CirculantEmbedding
        );
        assert!(simulate_fbm(1.0, 10, 1.0, &mut rng_stream(0, 0, 0)).is_err());
        assert!(simulate_fbm(0.3, 1, 1.0, &mut rng_stream(0, 0, 0)).is_err());
    }

    #[test]
    fn starts_at_zero_and_is_deterministic() {
        let a = simulate_fbm(0.2, 64, 2.0, &mut rng_stream(3, 1, 0)).unwrap();
        let b = simulate_fbm(0.2, 64, 2.0, &mut rng_stream(3, 1, 0)).unwrap();
        assert_eq!(a.values[0], 0.0);
        assert_eq!(a.values.len(), 65);
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn brownian_autocovariance_is_diagonal() {
        assert_eq!(fgn_autocovariance(0.5, 0), 1.0);
        for k in 1..10 {
            assert!(fgn_autocovariance(0.5, k).abs() < 1e-15);
        }
    }

    #[test]
    fn both_routes_agree_in_second_moments() {
        // Empirical lag-0 and lag-1 covariances of unit-step fGn from both routes.
        let h = 0.25;
        let n = 256;
        let reps = 400;
        let chol = FbmGenerator::with_method(h, n, n as f64, FbmMethod::Cholesky).unwrap();
        let circ = FbmGenerator::with_method(h, n, n as f64, FbmMethod::CirculantEmbedding).unwrap();
        assert_eq!(circ.method(), FbmMethod::CirculantEmbedding);
        for gen in [&chol, &circ] {
            let mut s = rng_stream(11, 0, 0);
            let (mut c0, mut c1, mut cnt) = (0.0, 0.0, 0.0);
            for _ in 0..reps {
                let x = gen.increments(&mut s);
                for w in x.windows(2) {
                    c0 += w[0] * w[0];
                    c1 += w[0] * w[1];
                    cnt += 1.0;
                }
            }
            let (c0, c1) = (c0 / cnt, c1 / cnt);
            assert!((c0 - 1.0).abs() < 0.02, "{c0}");
            assert!((c1 - fgn_autocovariance(h, 1)).abs() < 0.02, "{c1}");
        }
    }
}
