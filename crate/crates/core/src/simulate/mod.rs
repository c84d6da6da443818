//! Synthetic price panels under Heston and rough Heston variance, with
//! optional tempered-stable jumps and microstructure noise.
//!
//! Both variance schemes are Euler schemes on the observation grid (optionally
//! sub-stepped). The price is `X_{k+1} = X_k + √V_k⁺·ΔW_k + ΔJ_k` and the
//! variance driver is `ΔB = ρ·ΔW + √(1-ρ²)·ΔZ`. A block of days is simulated
//! as one continuous business-time path; each day then exposes only its
//! retained window (the first `drop_first` returns are discarded).

pub mod fbm;
pub mod jumps;

use crate::error::{Error, Result};
use crate::model::{GridSpec, PricePath, SimScenario, TradingDay, VarianceModel};
use crate::numeric::gamma;
use crate::rng::{tags, RandomStream};

pub use fbm::{simulate_fbm, FbmGenerator, FbmMethod, FbmPath};
pub use jumps::{simulate_jump_increments, CutoffRule, JumpSampler, TemperedStable};

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    /// Observed log-prices (noisy when noise is enabled).
    pub prices: PricePath,
    /// `V⁺` at each observed grid point, per day.
    pub latent_variance: Vec<Vec<f64>>,
    /// Efficient log-price `x` at each observed grid point, per day.
    pub latent_clean_prices: Vec<Vec<f64>>,
    /// Jump part of each observed return, per day.
    pub jump_log: Vec<Vec<f64>>,
}

/// Correlated Brownian increments `(ΔW, ΔB)` with step `dt`.
pub fn draw_drivers(rho: f64, dt: f64, steps: usize, stream: &mut RandomStream) -> (Vec<f64>, Vec<f64>) {
    let sd = dt.sqrt();
    let rc = (1.0 - rho * rho).max(0.0).sqrt();
    let mut dw = Vec::with_capacity(steps);
    let mut db = Vec::with_capacity(steps);
    for _ in 0..steps {
        let z1 = stream.normal();
        let z2 = stream.normal();
        dw.push(sd * z1);
        db.push(sd * (rho * z1 + rc * z2));
    }
    (dw, db)
}

struct FineGrid {
    dt: f64,
    steps: usize,
}

fn fine_grid(grid: &GridSpec, n_days: usize) -> FineGrid {
    FineGrid {
        dt: grid.delta_n() / grid.substeps as f64,
        steps: n_days * grid.steps_per_day * grid.substeps,
    }
}

/// Full-truncation Euler for `dV = κ(θ-V)dt + ν√V⁺ dB`; returns V at all
/// `steps + 1` fine grid points.
fn heston_variance(theta: f64, kappa: f64, nu: f64, v0: f64, dt: f64, db: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(db.len() + 1);
    let mut cur = v0;
    v.push(cur);
    for &b in db {
        let vp = cur.max(0.0);
        cur = (cur + kappa * (theta - cur) * dt + nu * vp.sqrt() * b).max(0.0);
        v.push(cur);
    }
    v
}

// Σ_{m} a[m]·b[m] with eight independent accumulators; deterministic order.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Left-point Volterra–Euler scheme for the rough Heston variance
/// `V_k = V₀ + Σ_{i<k} K(t_k-t_i)·[κ(θ-V_i)dt + ν√V_i⁺ ΔB_i]` with
/// `K(s) = s^{H-1/2}/Γ(H+1/2)`. The raw (possibly negative) V is kept in the
/// drift; only the square root is truncated.
#[allow(clippy::too_many_arguments)]
fn rough_variance(
    hurst: f64,
    theta: f64,
    kappa: f64,
    nu: f64,
    v0: f64,
    dt: f64,
    db: &[f64],
    window: Option<usize>,
) -> Vec<f64> {
    let steps = db.len();
    let g = gamma(hurst + 0.5);
    // kernel[m] = K(m·dt), m = 1..=steps
    let mut kernel = vec![0.0; steps + 1];
    for (m, k) in kernel.iter_mut().enumerate().skip(1) {
        *k = (m as f64 * dt).powf(hurst - 0.5) / g;
    }
    let window = window.unwrap_or(steps).max(1);
    // rev[steps-1-i] holds the i-th increment so that the convolution for
    // step k is a forward dot product over contiguous slices.
    let mut rev = vec![0.0; steps];
    let mut v = Vec::with_capacity(steps + 1);
    v.push(v0);
    for k in 1..=steps {
        let i = k - 1;
        let vi = v[i];
        rev[steps - 1 - i] = kappa * (theta - vi) * dt + nu * vi.max(0.0).sqrt() * db[i];
        let len = k.min(window);
        let conv = dot(&kernel[1..=len], &rev[steps - k..steps - k + len]);
        v.push(v0 + conv);
    }
    v
}

fn jump_sampler(scenario: &SimScenario) -> Result<Option<JumpSampler>> {
    let Some(j) = &scenario.jumps else {
        return Ok(None);
    };
    let c = j.scale()?;
    let params = TemperedStable::new(j.alpha, j.lambda, c)?;
    let (theta, _, _, _, v0) = scenario.variance.params();
    let v_ref = if theta > 0.0 { theta } else { v0 };
    let rule = CutoffRule::new(v_ref, scenario.grid.delta_n() / scenario.grid.substeps as f64);
    Ok(Some(JumpSampler::with_cutoff_rule(params, rule)?))
}

/// Builds the price path from a fine-grid variance path and the drivers, then
/// slices it into observed days.
fn assemble(
    scenario: &SimScenario,
    n_days: usize,
    variance: &[f64],
    dw: &[f64],
    jumps: Option<&JumpSampler>,
    stream: &RandomStream,
) -> SimOutput {
    let grid = &scenario.grid;
    let fg = fine_grid(grid, n_days);
    let mut jump_stream = stream.fork(tags::JUMPS);
    let jump_inc: Vec<f64> = match jumps {
        Some(s) => s.increments(&variance[..fg.steps], fg.dt, &mut jump_stream),
        None => vec![0.0; fg.steps],
    };

    let mut x = Vec::with_capacity(fg.steps + 1);
    let mut cur = 0.0;
    x.push(cur);
    for k in 0..fg.steps {
        cur += variance[k].max(0.0).sqrt() * dw[k] + jump_inc[k];
        x.push(cur);
    }

    let m = grid.substeps;
    let spd = grid.steps_per_day;
    let mut days = Vec::with_capacity(n_days);
    let mut latent_variance = Vec::with_capacity(n_days);
    let mut clean = Vec::with_capacity(n_days);
    let mut jump_log = Vec::with_capacity(n_days);
    for d in 0..n_days {
        let obs: Vec<usize> = (d * spd + grid.drop_first..=(d + 1) * spd).collect();
        let prices: Vec<f64> = obs.iter().map(|&o| x[o * m]).collect();
        latent_variance.push(obs.iter().map(|&o| variance[o * m].max(0.0)).collect());
        jump_log.push(
            obs.windows(2)
                .map(|w| jump_inc[w[0] * m..w[1] * m].iter().sum())
                .collect(),
        );
        clean.push(prices.clone());
        days.push(TradingDay::new(format!("sim-{:04}", d + 1), prices));
    }
    SimOutput {
        prices: PricePath {
            days,
            delta_n: grid.delta_n(),
            meta: String::new(),
        },
        latent_variance,
        latent_clean_prices: clean,
        jump_log,
    }
}

fn finish(scenario: &SimScenario, mut out: SimOutput, stream: &RandomStream, label: &str) -> SimOutput {
    out.prices.meta = format!("{label} seed={} stream={:?}", scenario.seed, stream.key());
    match &scenario.noise {
        Some(n) => {
            let mut noise_stream = stream.fork(tags::NOISE);
            add_noise(out, n.sigma_noise, n.volatility_scaled, &mut noise_stream)
        }
        None => out,
    }
}

/// Heston variance with full-truncation Euler.
pub fn simulate_heston(scenario: &SimScenario, n_days: usize, stream: &RandomStream) -> Result<SimOutput> {
    scenario.validate()?;
    let VarianceModel::Heston {
        theta,
        kappa,
        nu,
        rho,
        v0,
    } = scenario.variance
    else {
        return Err(Error::Scenario("simulate_heston requires a Heston variance model".into()));
    };
    check_days(n_days)?;
    let fg = fine_grid(&scenario.grid, n_days);
    let mut drivers = stream.clone();
    let (dw, db) = draw_drivers(rho, fg.dt, fg.steps, &mut drivers);
    let variance = heston_variance(theta, kappa, nu, v0, fg.dt, &db);
    let sampler = jump_sampler(scenario)?;
    let out = assemble(scenario, n_days, &variance, &dw, sampler.as_ref(), stream);
    Ok(finish(scenario, out, stream, "heston"))
}

/// Rough Heston variance with the left-point Volterra–Euler scheme.
pub fn simulate_rough_heston(scenario: &SimScenario, n_days: usize, stream: &RandomStream) -> Result<SimOutput> {
    scenario.validate()?;
    let VarianceModel::RoughHeston {
        hurst,
        theta,
        kappa,
        nu,
        rho,
        v0,
    } = scenario.variance
    else {
        return Err(Error::Scenario(
            "simulate_rough_heston requires a rough Heston variance model".into(),
        ));
    };
    if !(hurst > 0.0 && hurst < 0.5) {
        return Err(Error::domain(format!(
            "rough Heston requires H in (0, 1/2), got {hurst}"
        )));
    }
    check_days(n_days)?;
    let fg = fine_grid(&scenario.grid, n_days);
    let mut drivers = stream.clone();
    let (dw, db) = draw_drivers(rho, fg.dt, fg.steps, &mut drivers);
    let variance = rough_variance(
        hurst,
        theta,
        kappa,
        nu,
        v0,
        fg.dt,
        &db,
        scenario.grid.kernel_window,
    );
    let sampler = jump_sampler(scenario)?;
    let out = assemble(scenario, n_days, &variance, &dw, sampler.as_ref(), stream);
    Ok(finish(scenario, out, stream, "rough_heston"))
}

/// Dispatches on the variance model. A rough Heston model with `H = 1/2` is
/// simulated as classical Heston.
pub fn simulate(scenario: &SimScenario, n_days: usize, stream: &RandomStream) -> Result<SimOutput> {
    match scenario.variance {
        VarianceModel::Heston { .. } => simulate_heston(scenario, n_days, stream),
        VarianceModel::RoughHeston {
            hurst,
            theta,
            kappa,
            nu,
            rho,
            v0,
        } if hurst == 0.5 => {
            let mut s = scenario.clone();
            s.variance = VarianceModel::Heston {
                theta,
                kappa,
                nu,
                rho,
                v0,
            };
            simulate_heston(&s, n_days, stream)
        }
        VarianceModel::RoughHeston { .. } => simulate_rough_heston(scenario, n_days, stream),
    }
}

fn check_days(n_days: usize) -> Result<()> {
    if n_days == 0 {
        return Err(Error::Scenario("n_days must be positive".into()));
    }
    Ok(())
}

/// Adds i.i.d. Gaussian observation noise: `y = x + σ·√V·ε` when
/// `volatility_scaled`, else `y = x + σ·ε`.
pub fn add_noise(clean: SimOutput, sigma_noise: f64, volatility_scaled: bool, stream: &mut RandomStream) -> SimOutput {
    let mut out = clean;
    if sigma_noise == 0.0 {
        return out;
    }
    for (day, (x, v)) in out
        .prices
        .days
        .iter_mut()
        .zip(out.latent_clean_prices.iter().zip(&out.latent_variance))
    {
        for ((y, &xi), &vi) in day.log_prices.iter_mut().zip(x).zip(v) {
            let scale = if volatility_scaled {
                sigma_noise * vi.max(0.0).sqrt()
            } else {
                sigma_noise
            };
            *y = xi + scale * stream.normal();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{JumpModel, NoiseModel};
    use crate::rng::rng_stream;

    fn heston(nu: f64) -> SimScenario {
        SimScenario {
            variance: VarianceModel::Heston {
                theta: 0.02,
                kappa: 8.0,
                nu,
                rho: -0.7,
                v0: 0.05,
            },
            jumps: None,
            noise: None,
            grid: GridSpec::default(),
            seed: 1,
        }
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..37).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..37).map(|i| (i as f64 * 0.3).cos()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn deterministic_variance_limit() {
        let s = heston(0.0);
        let out = simulate_heston(&s, 2, &rng_stream(1, 0, 0)).unwrap();
        let dn = s.grid.delta_n();
        for (d, day) in out.latent_variance.iter().enumerate() {
            for (i, &v) in day.iter().enumerate() {
                let k = d * s.grid.steps_per_day + s.grid.drop_first + i;
                let t = k as f64 * dn;
                let exact = 0.02 + 0.03 * (-8.0 * t).exp();
                // Euler error is O(κ²·t·Δ)
                assert!((v - exact).abs() < 1e-6, "{v} vs {exact}");
            }
        }
    }

    #[test]
    fn grid_shapes_and_clean_equivalence() {
        let s = heston(0.45);
        let out = simulate(&s, 3, &rng_stream(1, 0, 0)).unwrap();
        assert_eq!(out.prices.days.len(), 3);
        for d in 0..3 {
            assert_eq!(out.prices.days[d].log_prices.len(), 4621);
            assert_eq!(out.latent_variance[d].len(), 4621);
            assert_eq!(out.jump_log[d].len(), 4620);
            assert_eq!(out.prices.days[d].log_prices, out.latent_clean_prices[d]);
            assert!(out.latent_variance[d].iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn rejects_wrong_model() {
        let s = heston(0.45);
        assert!(simulate_rough_heston(&s, 1, &rng_stream(1, 0, 0)).is_err());
        let r = SimScenario::calibrated("V1-J1").unwrap();
        assert!(simulate_heston(&r, 1, &rng_stream(1, 0, 0)).is_err());
    }

    #[test]
    fn rough_constant_variance_limit() {
        let mut s = SimScenario::calibrated("V1-J1").unwrap();
        s.variance = VarianceModel::RoughHeston {
            hurst: 0.1,
            theta: 0.02,
            kappa: 0.0,
            nu: 0.0,
            rho: -0.7,
            v0: 0.03,
        };
        s.jumps = None;
        s.noise = None;
        let out = simulate_rough_heston(&s, 1, &rng_stream(5, 0, 0)).unwrap();
        assert!(out.latent_variance[0].iter().all(|&v| v == 0.03));
    }

    #[test]
    fn rough_kernel_window_truncates_memory() {
        let mut s = SimScenario::calibrated("V1-J1").unwrap();
        s.jumps = None;
        s.noise = None;
        s.grid.steps_per_day = 400;
        s.grid.drop_first = 0;
        let full = simulate_rough_heston(&s, 1, &rng_stream(5, 0, 0)).unwrap();
        s.grid.kernel_window = Some(400);
        let same = simulate_rough_heston(&s, 1, &rng_stream(5, 0, 0)).unwrap();
        assert_eq!(full.latent_variance, same.latent_variance);
        s.grid.kernel_window = Some(50);
        let cut = simulate_rough_heston(&s, 1, &rng_stream(5, 0, 0)).unwrap();
        assert_eq!(full.latent_variance[0][..51], cut.latent_variance[0][..51]);
        assert_ne!(full.latent_variance[0][60..], cut.latent_variance[0][60..]);
    }

    #[test]
    fn noise_zero_is_identity_and_jump_log_sums() {
        let mut s = heston(0.45);
        s.jumps = Some(JumpModel::derived(0.5, 500.0));
        s.noise = Some(NoiseModel {
            sigma_noise: 0.0,
            volatility_scaled: true,
        });
        let out = simulate(&s, 1, &rng_stream(9, 0, 0)).unwrap();
        assert_eq!(out.prices.days[0].log_prices, out.latent_clean_prices[0]);
        assert!(out.jump_log[0].iter().any(|&j| j != 0.0));
    }

    #[test]
    fn substeps_keep_observation_grid() {
        let mut s = heston(0.45);
        s.grid.substeps = 3;
        let out = simulate(&s, 1, &rng_stream(9, 0, 0)).unwrap();
        assert_eq!(out.prices.days[0].log_prices.len(), 4621);
        assert_eq!(out.prices.delta_n, s.grid.delta_n());
    }
}
