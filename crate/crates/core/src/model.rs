//! Domain types and the JSON configuration schema.
//!
//! Time is measured in years of 252 trading days; one trading day is 6.5 hours
//! of business time, i.e. 4680 five-second steps, so the default grid spacing
//! is `1/(252·4680)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;
pub const STEPS_PER_DAY_5S: usize = 4680;
pub const SECONDS_PER_TRADING_DAY: f64 = 23_400.0;

/// Grid spacing of 5-second business-time sampling, in years.
pub fn default_delta_n() -> f64 {
    1.0 / (TRADING_DAYS_PER_YEAR * STEPS_PER_DAY_5S as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradingDay {
    pub date: String,
    pub log_prices: Vec<f64>,
}

impl TradingDay {
    pub fn new(date: impl Into<String>, log_prices: Vec<f64>) -> Self {
        Self {
            date: date.into(),
            log_prices,
        }
    }

    pub fn n_returns(&self) -> usize {
        self.log_prices.len().saturating_sub(1)
    }

    /// Within-day log returns.
    pub fn returns(&self) -> Vec<f64> {
        self.log_prices.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Log-prices on a regular grid, organised by trading day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePath {
    pub days: Vec<TradingDay>,
    /// Grid spacing in years.
    pub delta_n: f64,
    #[serde(default)]
    pub meta: String,
}

impl PricePath {
    pub fn new(days: Vec<TradingDay>, delta_n: f64, meta: impl Into<String>) -> Result<Self> {
        let path = Self {
            days,
            delta_n,
            meta: meta.into(),
        };
        path.validate()?;
        Ok(path)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_n > 0.0 && self.delta_n.is_finite()) {
            return Err(Error::PricePath(format!(
                "grid spacing must be positive, got {}",
                self.delta_n
            )));
        }
        for day in &self.days {
            if day.log_prices.len() < 2 {
                return Err(Error::PricePath(format!(
                    "day {} has fewer than 2 log-prices",
                    day.date
                )));
            }
            if let Some(i) = day.log_prices.iter().position(|p| !p.is_finite()) {
                return Err(Error::PricePath(format!(
                    "day {} has a non-finite log-price at index {i}",
                    day.date
                )));
            }
        }
        Ok(())
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    /// Adds `shift` to every log-price.
    pub fn shifted(&self, shift: f64) -> PricePath {
        let mut out = self.clone();
        for day in &mut out.days {
            for p in &mut day.log_prices {
                *p += shift;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarianceModel {
    Heston {
        theta: f64,
        kappa: f64,
        nu: f64,
        rho: f64,
        v0: f64,
    },
    RoughHeston {
        hurst: f64,
        theta: f64,
        kappa: f64,
        nu: f64,
        rho: f64,
        v0: f64,
    },
}

impl VarianceModel {
    /// `(θ, κ, ν, ρ, V₀)`.
    pub fn params(&self) -> (f64, f64, f64, f64, f64) {
        match *self {
            VarianceModel::Heston {
                theta,
                kappa,
                nu,
                rho,
                v0,
            }
            | VarianceModel::RoughHeston {
                theta,
                kappa,
                nu,
                rho,
                v0,
                ..
            } => (theta, kappa, nu, rho, v0),
        }
    }

    pub fn hurst(&self) -> f64 {
        match *self {
            VarianceModel::Heston { .. } => 0.5,
            VarianceModel::RoughHeston { hurst, .. } => hurst,
        }
    }
}

/// Symmetric tempered-stable jumps with Lévy density
/// `c·e^{-λ|x|}/|x|^{α+1}·V_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpModel {
    /// Blumenthal–Getoor index.
    pub alpha: f64,
    /// Tempering rate.
    pub lambda: f64,
    /// Scale; `None` derives it from `(alpha, lambda)` so that the jump
    /// second moment is `0.2·V`.
    #[serde(default)]
    pub c: Option<f64>,
}

impl JumpModel {
    pub fn derived(alpha: f64, lambda: f64) -> Self {
        Self {
            alpha,
            lambda,
            c: None,
        }
    }

    pub fn scale(&self) -> Result<f64> {
        match self.c {
            Some(c) => Ok(c),
            None => numeric::jump_scale_from(self.alpha, self.lambda),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Noise scale in log-price units.
    pub sigma_noise: f64,
    /// `ε = σ_noise·√V·χ` when set, `ε = σ_noise·χ` otherwise.
    #[serde(default = "default_true")]
    pub volatility_scaled: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    /// Simulated steps per trading day.
    pub steps_per_day: usize,
    /// Returns discarded at the start of each day (60 = five minutes).
    pub drop_first: usize,
    /// Days per independently simulated block.
    pub days_per_block: usize,
    pub days_per_year: f64,
    /// Euler sub-steps per observation step.
    pub substeps: usize,
    /// Optional truncation of the Volterra kernel to the most recent steps
    /// (fine-grid steps). `None` keeps the full memory within a block.
    pub kernel_window: Option<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            steps_per_day: STEPS_PER_DAY_5S,
            drop_first: 60,
            days_per_block: 7,
            days_per_year: TRADING_DAYS_PER_YEAR,
            substeps: 1,
            kernel_window: None,
        }
    }
}

impl GridSpec {
    pub fn delta_n(&self) -> f64 {
        1.0 / (self.days_per_year * self.steps_per_day as f64)
    }

    /// Returns retained per day.
    pub fn observed_returns(&self) -> usize {
        self.steps_per_day - self.drop_first
    }
}

/// Full generative specification of a simulated panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub variance: VarianceModel,
    #[serde(default)]
    pub jumps: Option<JumpModel>,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub seed: u64,
}

/// Noise scale calibrated from a 5s/5min realized-variance ratio of 1.0548.
pub const CALIBRATED_SIGMA_NOISE: f64 = 1.55e-4;

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        let (theta, kappa, nu, rho, v0) = self.variance.params();
        let bad = |m: String| Err(Error::Scenario(m));
        // ν = 0 and κ = 0 are accepted: they give the deterministic limits.
        let nonneg = |x: f64| x >= 0.0 && x.is_finite();
        if !(nonneg(theta) && nonneg(kappa) && nonneg(nu)) {
            return bad(format!(
                "theta, kappa, nu must be non-negative, got ({theta}, {kappa}, {nu})"
            ));
        }
        if !(-1.0..=1.0).contains(&rho) {
            return bad(format!("rho must lie in [-1,1], got {rho}"));
        }
        if !(v0 > 0.0 && v0.is_finite()) {
            return bad(format!("V0 must be positive, got {v0}"));
        }
        if let VarianceModel::RoughHeston { hurst, .. } = self.variance {
            if !(hurst > 0.0 && hurst <= 0.5) {
                return bad(format!("Hurst parameter must lie in (0, 1/2], got {hurst}"));
            }
        }
        if let Some(j) = &self.jumps {
            if !(j.alpha > 0.0 && j.alpha < 2.0) {
                return bad(format!("jump index alpha must lie in (0,2), got {}", j.alpha));
            }
            if !(j.lambda > 0.0) {
                return bad(format!("tempering rate must be positive, got {}", j.lambda));
            }
            if let Some(c) = j.c {
                if !(c >= 0.0 && c.is_finite()) {
                    return bad(format!("jump scale must be non-negative, got {c}"));
                }
            }
        }
        if let Some(n) = &self.noise {
            if !(n.sigma_noise >= 0.0 && n.sigma_noise.is_finite()) {
                return bad(format!("noise scale must be non-negative, got {}", n.sigma_noise));
            }
        }
        let g = &self.grid;
        if g.steps_per_day < 2 || g.drop_first + 2 > g.steps_per_day {
            return bad(format!(
                "grid needs at least 2 retained returns per day (steps {}, drop {})",
                g.steps_per_day, g.drop_first
            ));
        }
        if g.substeps == 0 || g.days_per_block == 0 || !(g.days_per_year > 0.0) {
            return bad("substeps, days_per_block and days_per_year must be positive".into());
        }
        Ok(())
    }

    /// Parameter rows of the reference Monte Carlo design: `V1`–`V3` (H = 0.1,
    /// 0.3, 0.5) crossed with `J1` (α = 0.5) and `J2` (α = 1.5), λ = 500, noise
    /// scale 1.55e-4, and V₀ at the long-run mean.
    pub fn calibrated(label: &str) -> Result<SimScenario> {
        let (vol, jump) = label
            .split_once('-')
            .ok_or_else(|| Error::Scenario(format!("unknown scenario label {label}")))?;
        let (theta, kappa, rho) = (0.02, 8.0, -0.7);
        let variance = match vol {
            "V1" => VarianceModel::RoughHeston {
                hurst: 0.1,
                theta,
                kappa,
                nu: 0.10,
                rho,
                v0: theta,
            },
            "V2" => VarianceModel::RoughHeston {
                hurst: 0.3,
                theta,
                kappa,
                nu: 0.22,
                rho,
                v0: theta,
            },
            "V3" => VarianceModel::Heston {
                theta,
                kappa,
                nu: 0.45,
                rho,
                v0: theta,
            },
            _ => return Err(Error::Scenario(format!("unknown variance row {vol}"))),
        };
        let alpha = match jump {
            "J1" => 0.5,
            "J2" => 1.5,
            _ => return Err(Error::Scenario(format!("unknown jump row {jump}"))),
        };
        Ok(SimScenario {
            variance,
            jumps: Some(JumpModel::derived(alpha, 500.0)),
            noise: Some(NoiseModel {
                sigma_noise: CALIBRATED_SIGMA_NOISE,
                volatility_scaled: true,
            }),
            grid: GridSpec::default(),
            seed: 0,
        })
    }

    pub fn calibrated_labels() -> [&'static str; 6] {
        ["V1-J1", "V1-J2", "V2-J1", "V2-J2", "V3-J1", "V3-J2"]
    }
}

/// Returns per block, returns used per block, and the derived block count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockGrid {
    pub p_n: usize,
    pub k_n: usize,
    pub blocks_per_day: usize,
}

impl BlockGrid {
    pub fn new(p_n: usize, k_n: usize, returns_per_day: usize) -> Result<Self> {
        if !(k_n > 1 && k_n <= p_n) {
            return Err(Error::domain(format!(
                "block layout requires 1 < k_n <= p_n, got k_n={k_n}, p_n={p_n}"
            )));
        }
        let blocks_per_day = returns_per_day / p_n;
        if blocks_per_day < 4 {
            return Err(Error::domain(format!(
                "need at least 4 blocks per day, got {blocks_per_day} ({returns_per_day} returns, p_n={p_n})"
            )));
        }
        Ok(Self {
            p_n,
            k_n,
            blocks_per_day,
        })
    }

    /// Zero-based index range of the returns used by block `b` (1-based).
    pub fn block_range(&self, b: usize) -> std::ops::Range<usize> {
        let start = (b - 1) * self.p_n;
        start..start + self.k_n
    }

    /// Number of complete block pairs `(2p-1, 2p)` in a day.
    pub fn pairs_per_day(&self) -> usize {
        self.blocks_per_day / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EtaScheme {
    /// Mean bipower over blocks `2p-ℓ`, `ℓ ∈ [l1, l2]`, wrapping into earlier days.
    LaggedBlocks { l1: usize, l2: usize },
    /// Mean bipower over the same pair of blocks on the previous `lookback_days` days.
    SameTimeOfDay { lookback_days: usize },
}

impl Default for EtaScheme {
    fn default() -> Self {
        EtaScheme::SameTimeOfDay { lookback_days: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningSpec {
    /// Target modulus of the empirical characteristic function.
    pub frak_l: f64,
    #[serde(default)]
    pub eta_scheme: EtaScheme,
}

impl TuningSpec {
    pub fn new(frak_l: f64, eta_scheme: EtaScheme) -> Result<Self> {
        let t = Self { frak_l, eta_scheme };
        t.validate()?;
        Ok(t)
    }

    pub fn theta(&self) -> f64 {
        (-2.0 * self.frak_l.ln()).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        numeric::theta_from_modulus(self.frak_l)?;
        match self.eta_scheme {
            EtaScheme::LaggedBlocks { l1, l2 } => {
                if l1 < 3 || l1 > l2 {
                    return Err(Error::domain(format!(
                        "lagged-block scheme requires 3 <= l1 <= l2, got ({l1}, {l2})"
                    )));
                }
            }
            EtaScheme::SameTimeOfDay { lookback_days } => {
                if lookback_days == 0 {
                    return Err(Error::domain("lookback_days must be positive"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionDecision {
    pub alpha: f64,
    pub critical_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    /// One-sided `Φ(T)`; only small values are evidence of roughness.
    pub p_value: f64,
    pub reject_at: Vec<RejectionDecision>,
    pub n_summands: usize,
    /// Summands dropped because they touch a degenerate block.
    pub n_dropped: usize,
    /// `Σ P`.
    pub numerator: f64,
    /// `√(Σ P²)`.
    pub denominator: f64,
    /// Pooled lag-ℓ autocovariances of the doubly differenced series, ℓ = 1, 2, ...
    pub lag_acov: Vec<f64>,
    /// The same, normalised by the pooled lag-0 second moment.
    pub lag_acf: Vec<f64>,
    pub theta: f64,
    pub frak_l: f64,
    pub note: String,
}

impl TestReport {
    pub fn rejects(&self, alpha: f64) -> Option<bool> {
        self.reject_at
            .iter()
            .find(|d| (d.alpha - alpha).abs() < 1e-15)
            .map(|d| d.reject)
    }
}
