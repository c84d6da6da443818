//! Size and power experiments.
//!
//! Each replication consists of independent blocks of days. Every block is
//! simulated from its own stream keyed by `(scenario seed, replication,
//! block)`, run through the test pipeline, and only the products from its
//! final day are kept. Summands are pooled across the blocks of a
//! replication before self-normalising, giving one statistic per
//! replication.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EtaScheme, SimScenario, TuningSpec, TRADING_DAYS_PER_YEAR};
use crate::rng::rng_stream;
use crate::roughtest::{build_block_grid, compute_diff_panel, warmup_days, SummandSet, DEFAULT_MAX_LAG};
use crate::simulate::simulate;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McScenario {
    pub label: String,
    pub scenario: SimScenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McPlan {
    pub scenarios: Vec<McScenario>,
    pub frak_l_grid: Vec<f64>,
    pub n_days: usize,
    pub n_reps: usize,
    pub alpha: f64,
    pub base_seed: u64,
    pub p_n: usize,
    pub k_n: usize,
    pub eta_scheme: EtaScheme,
}

impl Default for McPlan {
    fn default() -> Self {
        Self {
            scenarios: Vec::new(),
            frak_l_grid: vec![0.95, 0.75, 0.50],
            n_days: 28,
            n_reps: 200,
            alpha: 0.05,
            base_seed: 20_240_101,
            p_n: 60,
            k_n: 48,
            eta_scheme: EtaScheme::default(),
        }
    }
}

impl McPlan {
    /// All six calibrated scenarios at desk scale.
    pub fn calibrated_default() -> Result<Self> {
        let scenarios = SimScenario::calibrated_labels()
            .iter()
            .map(|l| {
                Ok(McScenario {
                    label: l.to_string(),
                    scenario: SimScenario::calibrated(l)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            scenarios,
            ..Default::default()
        })
    }

    /// Plan restricted to the given labels of the calibrated scenarios.
    pub fn calibrated_subset(labels: &[&str]) -> Result<Self> {
        let scenarios = labels
            .iter()
            .map(|l| {
                Ok(McScenario {
                    label: l.to_string(),
                    scenario: SimScenario::calibrated(l)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            scenarios,
            ..Default::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::Scenario("plan has no scenarios".into()));
        }
        if self.n_reps == 0 {
            return Err(Error::Scenario("n_reps must be at least 1".into()));
        }
        if self.frak_l_grid.is_empty() {
            return Err(Error::Scenario("frak_l grid is empty".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        for &l in &self.frak_l_grid {
            TuningSpec::new(l, self.eta_scheme)?;
        }
        for s in &self.scenarios {
            s.scenario.validate()?;
            let g = &s.scenario.grid;
            let block = g.days_per_block;
            if block == 0 || self.n_days == 0 || self.n_days % block != 0 {
                return Err(Error::Scenario(format!(
                    "{}: n_days = {} is not a positive multiple of the {block}-day block",
                    s.label, self.n_days
                )));
            }
            let bg = crate::model::BlockGrid::new(self.p_n, self.k_n, g.observed_returns())?;
            let w = warmup_days(&bg, &self.eta_scheme);
            if block < w + 2 || (block - w) % 2 != 0 {
                return Err(Error::Scenario(format!(
                    "{}: a {block}-day block with {w} warm-up days does not end on a product day",
                    s.label
                )));
            }
        }
        Ok(())
    }

    /// Seed of a scenario: the base seed mixed with a hash of the label, so
    /// scenarios never share random numbers.
    pub fn scenario_seed(&self, label: &str) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        splitmix(self.base_seed ^ splitmix(h))
    }

    pub fn blocks_per_rep(&self, scenario: &SimScenario) -> usize {
        self.n_days / scenario.grid.days_per_block
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Outcome of one replication at one modulus target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepRecord {
    pub rep: usize,
    pub statistic: Option<f64>,
    pub reject: Option<bool>,
    pub n_summands: usize,
    pub n_dropped: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McCell {
    pub label: String,
    pub frak_l: f64,
    pub n_reps: usize,
    pub n_success: usize,
    pub n_failed: usize,
    pub n_rejections: usize,
    /// `n_rejections / n_success`.
    pub rejection_rate: f64,
    pub mean_statistic: f64,
    pub sd_statistic: f64,
    pub dropped_summands: usize,
    pub reps: Vec<RepRecord>,
}

impl McCell {
    /// Binomial standard error of the rejection rate.
    pub fn standard_error(&self) -> f64 {
        let p = self.rejection_rate;
        (p * (1.0 - p) / self.n_success as f64).sqrt()
    }

    pub fn statistics(&self) -> Vec<f64> {
        self.reps.iter().filter_map(|r| r.statistic).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub plan: McPlan,
    pub cells: Vec<McCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMeta {
    pub workers: usize,
    pub runtime_seconds: f64,
}

impl McReport {
    pub fn cell(&self, label: &str, frak_l: f64) -> Option<&McCell> {
        self.cells.iter().find(|c| c.label == label && c.frak_l == frak_l)
    }

    /// Rejection rates with one row per scenario and one column per modulus.
    pub fn table_csv(&self) -> String {
        let grid = &self.plan.frak_l_grid;
        let mut out = String::from("scenario");
        for l in grid {
            out.push_str(&format!(",L={l}"));
        }
        out.push('\n');
        for s in &self.plan.scenarios {
            out.push_str(&s.label);
            for &l in grid {
                match self.cell(&s.label, l) {
                    Some(c) => out.push_str(&format!(",{}", c.rejection_rate)),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn replicate(plan: &McPlan, mc: &McScenario, seed: u64, rep: usize) -> Vec<std::result::Result<SummandSet, String>> {
    let block_days = mc.scenario.grid.days_per_block;
    let tunings: Vec<TuningSpec> = plan
        .frak_l_grid
        .iter()
        .map(|&l| TuningSpec::new(l, plan.eta_scheme).expect("validated plan"))
        .collect();
    let mut acc: Vec<std::result::Result<SummandSet, String>> =
        vec![Ok(SummandSet::empty(DEFAULT_MAX_LAG)); tunings.len()];
    for block in 0..plan.blocks_per_rep(&mc.scenario) {
        let stream = rng_stream(seed, rep as u32, block as u32);
        let sim = match simulate(&mc.scenario, block_days, &stream) {
            Ok(s) => s,
            Err(e) => {
                let msg = format!("block {block}: simulation failed: {e}");
                return vec![Err(msg); tunings.len()];
            }
        };
        let grid = match build_block_grid(&sim.prices, plan.p_n, plan.k_n) {
            Ok(g) => g,
            Err(e) => return vec![Err(format!("block {block}: {e}")); tunings.len()],
        };
        for (slot, tuning) in acc.iter_mut().zip(&tunings) {
            let Ok(set) = slot else { continue };
            match compute_diff_panel(&sim.prices, &grid, tuning) {
                Ok(mut diff) => {
                    diff.retain_days(|d| d + 1 == block_days);
                    set.merge(&SummandSet::from_diff(&diff, DEFAULT_MAX_LAG));
                }
                Err(e) => *slot = Err(format!("block {block}: {e}")),
            }
        }
    }
    acc
}

/// Runs every scenario and replication; the report does not depend on the
/// worker count.
pub fn run_plan(plan: &McPlan, workers: usize) -> Result<McReport> {
    plan.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Numeric(format!("cannot start worker pool: {e}")))?;
    let jobs: Vec<(usize, usize)> = (0..plan.scenarios.len())
        .flat_map(|s| (0..plan.n_reps).map(move |r| (s, r)))
        .collect();
    let seeds: Vec<u64> = plan.scenarios.iter().map(|s| plan.scenario_seed(&s.label)).collect();
    let results: Vec<Vec<std::result::Result<SummandSet, String>>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(s, r)| replicate(plan, &plan.scenarios[s], seeds[s], r))
            .collect()
    });

    let mut cells = Vec::new();
    for (si, mc) in plan.scenarios.iter().enumerate() {
        for (li, &frak_l) in plan.frak_l_grid.iter().enumerate() {
            let tuning = TuningSpec::new(frak_l, plan.eta_scheme)?;
            let reps: Vec<RepRecord> = (0..plan.n_reps)
                .map(|rep| {
                    let res = &results[si * plan.n_reps + rep][li];
                    let outcome = res
                        .as_ref()
                        .map_err(Clone::clone)
                        .and_then(|set| set.report(&tuning, &[plan.alpha]).map(|r| (set, r)).map_err(|e| e.to_string()));
                    match outcome {
                        Ok((set, r)) => RepRecord {
                            rep,
                            statistic: Some(r.statistic),
                            reject: Some(r.reject_at[0].reject),
                            n_summands: set.count,
                            n_dropped: set.dropped,
                            error: None,
                        },
                        Err(msg) => {
                            log::warn!("{} L={frak_l} rep {rep} failed: {msg}", mc.label);
                            let (n_summands, n_dropped) = res.as_ref().map(|s| (s.count, s.dropped)).unwrap_or((0, 0));
                            RepRecord {
                                rep,
                                statistic: None,
                                reject: None,
                                n_summands,
                                n_dropped,
                                error: Some(msg),
                            }
                        }
                    }
                })
                .collect();
            let stats_ok: Vec<f64> = reps.iter().filter_map(|r| r.statistic).collect();
            let n_success = stats_ok.len();
            let n_rejections = reps.iter().filter(|r| r.reject == Some(true)).count();
            cells.push(McCell {
                label: mc.label.clone(),
                frak_l,
                n_reps: plan.n_reps,
                n_success,
                n_failed: plan.n_reps - n_success,
                n_rejections,
                rejection_rate: if n_success > 0 {
                    n_rejections as f64 / n_success as f64
                } else {
                    f64::NAN
                },
                mean_statistic: stats::mean(&stats_ok),
                sd_statistic: stats::std_dev(&stats_ok),
                dropped_summands: reps.iter().map(|r| r.n_dropped).sum(),
                reps,
            });
        }
    }
    Ok(McReport {
        plan: plan.clone(),
        cells,
    })
}

/// `run_plan` plus wall-clock metadata.
pub fn run_plan_timed(plan: &McPlan, workers: usize) -> Result<(McReport, RunMeta)> {
    let start = Instant::now();
    let report = run_plan(plan, workers)?;
    Ok((
        report,
        RunMeta {
            workers,
            runtime_seconds: start.elapsed().as_secs_f64(),
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseCalibration {
    pub ratio: f64,
    pub variance: f64,
    pub sigma: f64,
    pub note: Option<String>,
}

/// Noise scale matching a ratio `r` of daily realized variance at the fine
/// and coarse sampling frequencies, for volatility-scaled noise:
/// `σ² = (r-1) / (2·days_per_year·(n_fine - n_coarse·r))`.
pub fn calibrate_noise_for(ratio: f64, days_per_year: f64, n_fine: f64, n_coarse: f64) -> Result<NoiseCalibration> {
    if !ratio.is_finite() {
        return Err(Error::domain(format!("ratio must be finite, got {ratio}")));
    }
    if ratio <= 1.0 {
        return Ok(NoiseCalibration {
            ratio,
            variance: 0.0,
            sigma: 0.0,
            note: Some("ratio <= 1: no noise signal".into()),
        });
    }
    let den = n_fine - n_coarse * ratio;
    if den <= 0.0 {
        return Err(Error::domain(format!(
            "ratio {ratio} leaves a non-positive denominator {n_fine} - {n_coarse}·r"
        )));
    }
    let variance = 0.5 / days_per_year * (ratio - 1.0) / den;
    Ok(NoiseCalibration {
        ratio,
        variance,
        sigma: variance.sqrt(),
        note: None,
    })
}

/// Five-second versus five-minute calibration on the 09:35–16:00 session.
pub fn calibrate_noise(ratio: f64) -> Result<NoiseCalibration> {
    calibrate_noise_for(ratio, TRADING_DAYS_PER_YEAR, 4620.0, 77.0)
}
