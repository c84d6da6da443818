//! The roughness test: block layout, data-driven ECF exponents, log spot
//! variance panel, within-day and across-day differencing, and the
//! self-normalised first-order autocovariance statistic.
//!
//! Indexing conventions (all block and pair indices are 1-based within a day):
//!
//! * block `b` of a day uses returns `(b-1)·p_n+1 ..= (b-1)·p_n+k_n`;
//! * pair `p` is blocks `(2p-1, 2p)` and shares one exponent `u(d,p)`;
//! * after the warm-up days, days alternate reference/product: the first
//!   post-warm-up day is a reference day, the next a product day, and so on;
//! * for a product day `d`, `∇(d,p) = [𝔠(d,2p) - 𝔠(d,2p-1)] - [𝔠(d-1,2p) - 𝔠(d-1,2p-1)]`,
//!   each day's bracket evaluated at that day's `u(·,p)`;
//! * summands are `∇(d,p)·∇(d,p-1)` for `p = 2..=⌊B/2⌋`, so no product
//!   reaches across a day boundary and the two factors never share a block.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result, Stage};
use crate::estimators::{bipower_block, ecf_block};
use crate::model::{BlockGrid, EtaScheme, PricePath, RejectionDecision, TestReport, TuningSpec};
use crate::numeric::{normal_cdf, normal_quantile};

pub const DEFAULT_ALPHAS: [f64; 3] = [0.01, 0.05, 0.10];
pub const DEFAULT_MAX_LAG: usize = 7;

/// Lays out `⌊N_d/p_n⌋` blocks per day; all days must have the same length.
pub fn build_block_grid(path: &PricePath, p_n: usize, k_n: usize) -> Result<BlockGrid> {
    let first = path
        .days
        .first()
        .ok_or_else(|| Error::pipeline(Stage::Layout, "price path has no days"))?;
    let n = first.n_returns();
    if let Some(day) = path.days.iter().find(|d| d.n_returns() != n) {
        return Err(Error::pipeline(
            Stage::Layout,
            format!(
                "inconsistent day lengths: {} has {} returns, {} has {n}",
                day.date,
                day.n_returns(),
                first.date
            ),
        ));
    }
    if p_n == 0 || n < 4 * p_n {
        return Err(Error::pipeline(
            Stage::Layout,
            format!("each day needs at least 4·p_n returns (have {n}, p_n={p_n})"),
        ));
    }
    BlockGrid::new(p_n, k_n, n).map_err(|e| Error::pipeline(Stage::Layout, e.to_string()))
}

/// Days consumed before the first exponent can be formed.
pub fn warmup_days(grid: &BlockGrid, scheme: &EtaScheme) -> usize {
    match *scheme {
        EtaScheme::SameTimeOfDay { lookback_days } => lookback_days,
        EtaScheme::LaggedBlocks { l2, .. } => (l2 - 1).div_ceil(grid.blocks_per_day),
    }
}

/// Bipower spot variance for every block of every day, indexed `[day][b-1]`.
pub fn bipower_panel(path: &PricePath, grid: &BlockGrid) -> Result<Vec<Vec<f64>>> {
    path.days
        .iter()
        .map(|day| {
            let r = day.returns();
            (1..=grid.blocks_per_day)
                .map(|b| Ok(bipower_block(&r, grid.block_range(b), path.delta_n)?.c_hat))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentChoice {
    pub eta: f64,
    pub u: f64,
}

/// Exponents `u(d,p) = θ/√η(d,p)`, indexed `[day][p-1]`; `None` during
/// warm-up and for degenerate pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentPanel {
    pub warmup_days: usize,
    pub choices: Vec<Vec<Option<ExponentChoice>>>,
}

/// Chooses `u(d,p)` from bipower estimates that precede pair `p` of day `d`.
pub fn select_exponents(bipower: &[Vec<f64>], grid: &BlockGrid, tuning: &TuningSpec) -> Result<ExponentPanel> {
    tuning
        .validate()
        .map_err(|e| Error::pipeline(Stage::Exponents, e.to_string()))?;
    let warmup = warmup_days(grid, &tuning.eta_scheme);
    let n_days = bipower.len();
    if n_days <= warmup {
        return Err(Error::pipeline(
            Stage::Exponents,
            format!("{n_days} days do not cover the {warmup}-day warm-up"),
        ));
    }
    let bpd = grid.blocks_per_day;
    let theta = tuning.theta();
    let pairs = grid.pairs_per_day();

    let mut choices = vec![vec![None; pairs]; n_days];
    for (d, row) in choices.iter_mut().enumerate().skip(warmup) {
        for (pi, slot) in row.iter_mut().enumerate() {
            let p = pi + 1;
            let refs: Vec<f64> = match tuning.eta_scheme {
                EtaScheme::SameTimeOfDay { lookback_days } => (d - lookback_days..d)
                    .flat_map(|dd| [bipower[dd][2 * p - 2], bipower[dd][2 * p - 1]])
                    .collect(),
                EtaScheme::LaggedBlocks { l1, l2 } => (l1..=l2)
                    .map(|l| {
                        // 1-based global block index, wrapping into earlier days
                        let g = d * bpd + 2 * p - l;
                        bipower[(g - 1) / bpd][(g - 1) % bpd]
                    })
                    .collect(),
            };
            let finite: Vec<f64> = refs.into_iter().filter(|v| v.is_finite()).collect();
            if finite.is_empty() {
                continue;
            }
            let eta = finite.iter().sum::<f64>() / finite.len() as f64;
            if eta > 0.0 {
                *slot = Some(ExponentChoice {
                    eta,
                    u: theta / eta.sqrt(),
                });
            }
        }
    }
    Ok(ExponentPanel {
        warmup_days: warmup,
        choices,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpotEntry {
    /// `ln ĉ(u)`; `None` when degenerate.
    pub frak_c: Option<f64>,
    pub u_used: f64,
    pub eta_used: f64,
    pub degenerate: bool,
}

/// Log spot-variance estimates indexed `[day][b-1]` for blocks `1..=2·⌊B/2⌋`;
/// warm-up days hold `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpotVolPanel {
    pub grid: BlockGrid,
    pub tuning: TuningSpec,
    pub warmup_days: usize,
    pub entries: Vec<Vec<Option<SpotEntry>>>,
}

impl SpotVolPanel {
    /// Panel from given log spot variances (one row per day, `2·⌊B/2⌋` blocks).
    /// The exponent fields are set to `θ` with `η = 1`.
    pub fn from_log_variances(
        grid: BlockGrid,
        tuning: TuningSpec,
        warmup_days: usize,
        values: &[Vec<Option<f64>>],
    ) -> Self {
        let theta = tuning.theta();
        let entries = values
            .iter()
            .enumerate()
            .map(|(d, row)| {
                if d < warmup_days {
                    return vec![None; row.len()];
                }
                row.iter()
                    .map(|v| {
                        Some(SpotEntry {
                            frak_c: *v,
                            u_used: theta,
                            eta_used: 1.0,
                            degenerate: v.is_none(),
                        })
                    })
                    .collect()
            })
            .collect();
        Self {
            grid,
            tuning,
            warmup_days,
            entries,
        }
    }

    fn value(&self, day: usize, block: usize) -> Option<f64> {
        self.entries[day][block - 1].and_then(|e| e.frak_c)
    }
}

/// ECF log spot variance for every post-warm-up block that belongs to a pair.
pub fn spot_vol_panel(path: &PricePath, grid: &BlockGrid, tuning: &TuningSpec) -> Result<SpotVolPanel> {
    let bipower = bipower_panel(path, grid)?;
    let exps = select_exponents(&bipower, grid, tuning)?;
    let paired_blocks = 2 * grid.pairs_per_day();
    let entries: Vec<Vec<Option<SpotEntry>>> = path
        .days
        .par_iter()
        .enumerate()
        .map(|(d, day)| -> Result<Vec<Option<SpotEntry>>> {
            if d < exps.warmup_days {
                return Ok(vec![None; paired_blocks]);
            }
            let r = day.returns();
            (1..=paired_blocks)
                .map(|b| {
                    let Some(choice) = exps.choices[d][(b - 1) / 2] else {
                        return Ok(Some(SpotEntry {
                            frak_c: None,
                            u_used: f64::NAN,
                            eta_used: f64::NAN,
                            degenerate: true,
                        }));
                    };
                    let e = ecf_block(&r[grid.block_range(b)], path.delta_n, choice.u)
                        .map_err(|e| Error::pipeline(Stage::DiffPanel, e.to_string()))?;
                    Ok(Some(SpotEntry {
                        frak_c: e.frak_c,
                        u_used: choice.u,
                        eta_used: choice.eta,
                        degenerate: e.degenerate,
                    }))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(SpotVolPanel {
        grid: *grid,
        tuning: *tuning,
        warmup_days: exps.warmup_days,
        entries,
    })
}

/// Doubly differenced log spot variances for each product day.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffPanel {
    pub tuning: TuningSpec,
    pub pairs_per_day: usize,
    /// Zero-based day index of each product day (its reference day is `d-1`).
    pub product_days: Vec<usize>,
    /// `∇(d,p)` indexed `[product day][p-1]`; `None` where a constituent block
    /// is degenerate.
    pub values: Vec<Vec<Option<f64>>>,
}

impl DiffPanel {
    pub fn from_spot(panel: &SpotVolPanel) -> Result<DiffPanel> {
        let w = panel.warmup_days;
        let n_days = panel.entries.len();
        if n_days < w + 2 {
            return Err(Error::pipeline(
                Stage::DiffPanel,
                format!("need at least 2 days beyond the {w}-day warm-up, have {n_days} days"),
            ));
        }
        let pairs = panel.grid.pairs_per_day();
        let product_days: Vec<usize> = (w + 1..n_days).step_by(2).collect();
        let values = product_days
            .iter()
            .map(|&d| {
                (1..=pairs)
                    .map(|p| {
                        let inc = |day: usize| -> Option<f64> {
                            Some(panel.value(day, 2 * p)? - panel.value(day, 2 * p - 1)?)
                        };
                        Some(inc(d)? - inc(d - 1)?)
                    })
                    .collect()
            })
            .collect();
        Ok(DiffPanel {
            tuning: panel.tuning,
            pairs_per_day: pairs,
            product_days,
            values,
        })
    }

    /// Keeps only the product days accepted by `keep`.
    pub fn retain_days<F: Fn(usize) -> bool>(&mut self, keep: F) {
        let (days, values): (Vec<_>, Vec<_>) = self
            .product_days
            .iter()
            .zip(self.values.drain(..))
            .filter(|(d, _)| keep(**d))
            .map(|(d, v)| (*d, v))
            .unzip();
        self.product_days = days;
        self.values = values;
    }

    /// CSV rows `day,pair,block,value` (empty value when masked).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("day,pair,block,value\n");
        for (d, row) in self.product_days.iter().zip(&self.values) {
            for (pi, v) in row.iter().enumerate() {
                let v = v.map(|x| format!("{x}")).unwrap_or_default();
                out.push_str(&format!("{},{},{},{v}\n", d + 1, pi + 1, 2 * (pi + 1)));
            }
        }
        out
    }
}

pub fn compute_diff_panel(path: &PricePath, grid: &BlockGrid, tuning: &TuningSpec) -> Result<DiffPanel> {
    DiffPanel::from_spot(&spot_vol_panel(path, grid, tuning)?)
}

/// Running sums behind the statistic; merging sets partitions the index set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummandSet {
    pub sum: f64,
    pub sum_sq: f64,
    pub count: usize,
    pub dropped: usize,
    /// `Σ ∇(d,p)∇(d,p-ℓ)` for `ℓ = 0..=max_lag`.
    pub lag_sums: Vec<f64>,
    pub lag_counts: Vec<usize>,
}

impl SummandSet {
    pub fn empty(max_lag: usize) -> Self {
        Self {
            sum: 0.0,
            sum_sq: 0.0,
            count: 0,
            dropped: 0,
            lag_sums: vec![0.0; max_lag + 1],
            lag_counts: vec![0; max_lag + 1],
        }
    }

    pub fn from_diff(diff: &DiffPanel, max_lag: usize) -> Self {
        let mut s = Self::empty(max_lag);
        for row in &diff.values {
            for p in 1..row.len() {
                match (row[p], row[p - 1]) {
                    (Some(a), Some(b)) => {
                        let prod = a * b;
                        s.sum += prod;
                        s.sum_sq += prod * prod;
                        s.count += 1;
                    }
                    _ => s.dropped += 1,
                }
            }
            for lag in 0..=max_lag {
                for p in lag..row.len() {
                    if let (Some(a), Some(b)) = (row[p], row[p - lag]) {
                        s.lag_sums[lag] += a * b;
                        s.lag_counts[lag] += 1;
                    }
                }
            }
        }
        s
    }

    pub fn merge(&mut self, other: &SummandSet) {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.count += other.count;
        self.dropped += other.dropped;
        for (a, b) in self.lag_sums.iter_mut().zip(&other.lag_sums) {
            *a += b;
        }
        for (a, b) in self.lag_counts.iter_mut().zip(&other.lag_counts) {
            *a += b;
        }
    }

    pub fn report(&self, tuning: &TuningSpec, alphas: &[f64]) -> Result<TestReport> {
        if self.count == 0 {
            return Err(Error::DegenerateStatistic(format!(
                "no valid summands ({} dropped)",
                self.dropped
            )));
        }
        if !(self.sum_sq > 0.0) || !self.sum_sq.is_finite() {
            return Err(Error::DegenerateStatistic(format!(
                "sum of squared summands is {} over {} summands",
                self.sum_sq, self.count
            )));
        }
        let denominator = self.sum_sq.sqrt();
        let statistic = self.sum / denominator;
        let reject_at = alphas
            .iter()
            .map(|&alpha| {
                let critical_value = normal_quantile(alpha)
                    .map_err(|e| Error::pipeline(Stage::Statistic, e.to_string()))?;
                Ok(RejectionDecision {
                    alpha,
                    critical_value,
                    reject: statistic < critical_value,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        // lags longer than a day has pairs carry no data and are omitted
        let acov: Vec<f64> = self
            .lag_sums
            .iter()
            .zip(&self.lag_counts)
            .take_while(|(_, &c)| c > 0)
            .map(|(s, &c)| s / c as f64)
            .collect();
        let lag_acf = acov[1..].iter().map(|a| a / acov[0]).collect();
        Ok(TestReport {
            statistic,
            p_value: normal_cdf(statistic),
            reject_at,
            n_summands: self.count,
            n_dropped: self.dropped,
            numerator: self.sum,
            denominator,
            lag_acov: acov[1..].to_vec(),
            lag_acf,
            theta: tuning.theta(),
            frak_l: tuning.frak_l,
            note: "one-sided test: only small statistics reject; large positive values \
                   (smoother than a semimartingale) are reported but never rejected"
                .into(),
        })
    }
}

/// Self-normalised autocovariance statistic of a difference panel.
pub fn test_statistic(diff: &DiffPanel, alphas: &[f64]) -> Result<TestReport> {
    SummandSet::from_diff(diff, DEFAULT_MAX_LAG).report(&diff.tuning, alphas)
}

/// Full pipeline on one price path.
pub fn run_test(path: &PricePath, p_n: usize, k_n: usize, tuning: &TuningSpec, alphas: &[f64]) -> Result<TestReport> {
    path.validate()
        .map_err(|e| Error::pipeline(Stage::Layout, e.to_string()))?;
    let grid = build_block_grid(path, p_n, k_n)?;
    let diff = compute_diff_panel(path, &grid, tuning)?;
    test_statistic(&diff, alphas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TradingDay;
    use crate::rng::rng_stream;

    fn tuning(frak_l: f64) -> TuningSpec {
        TuningSpec::new(frak_l, EtaScheme::SameTimeOfDay { lookback_days: 5 }).unwrap()
    }

    fn gaussian_path(days: usize, returns: usize, c: f64, seed: u64) -> PricePath {
        let dn = 1e-6;
        let mut s = rng_stream(seed, 0, 0);
        let days = (0..days)
            .map(|d| {
                let mut p = vec![0.0];
                for _ in 0..returns {
                    let last = *p.last().unwrap();
                    p.push(last + (c * dn).sqrt() * s.normal());
                }
                TradingDay::new(format!("d{d}"), p)
            })
            .collect();
        PricePath::new(days, dn, "gauss").unwrap()
    }

    #[test]
    fn layout_checks() {
        let p = gaussian_path(2, 4620, 0.02, 1);
        let g = build_block_grid(&p, 60, 48).unwrap();
        assert_eq!(g.blocks_per_day, 77);
        let p2 = gaussian_path(2, 120, 0.02, 1);
        assert!(build_block_grid(&p2, 60, 48).is_err());
        assert!(build_block_grid(&p, 60, 61).is_err());
        let mut bad = p.clone();
        bad.days[1].log_prices.pop();
        assert!(matches!(
            build_block_grid(&bad, 60, 48),
            Err(Error::Pipeline { stage: Stage::Layout, .. })
        ));
    }

    #[test]
    fn theta_constants() {
        let want = [(0.95, 0.32), (0.75, 0.76), (0.50, 1.18)];
        for (l, t) in want {
            assert!((tuning(l).theta() - t).abs() < 0.005);
        }
    }

    #[test]
    fn exponents_hit_target_modulus() {
        let path = gaussian_path(7, 4620, 0.02, 2);
        let t = tuning(0.95);
        let grid = build_block_grid(&path, 60, 48).unwrap();
        let bp = bipower_panel(&path, &grid).unwrap();
        let ex = select_exponents(&bp, &grid, &t).unwrap();
        let (mut us, mut mods) = (Vec::new(), Vec::new());
        for d in 5..7 {
            let r = path.days[d].returns();
            for (pi, c) in ex.choices[d].iter().enumerate() {
                let c = c.unwrap();
                us.push(c.u);
                for b in [2 * pi + 1, 2 * pi + 2] {
                    let e = ecf_block(&r[grid.block_range(b)], path.delta_n, c.u).unwrap();
                    mods.push(e.l_hat.norm());
                }
            }
        }
        let mean_u = us.iter().sum::<f64>() / us.len() as f64;
        let mean_mod = mods.iter().sum::<f64>() / mods.len() as f64;
        assert!((mean_u - 0.3203 / 0.02f64.sqrt()).abs() < 0.05, "{mean_u}");
        assert!((mean_mod - 0.95).abs() < 0.01, "{mean_mod}");
    }

    #[test]
    fn same_time_of_day_identical_days() {
        let grid = BlockGrid::new(10, 8, 80).unwrap();
        let row: Vec<f64> = (0..8).map(|b| 0.01 + b as f64 * 0.001).collect();
        let bp = vec![row.clone(); 6];
        let ex = select_exponents(&bp, &grid, &tuning(0.75)).unwrap();
        for p in 1..=4 {
            let c = ex.choices[5][p - 1].unwrap();
            let want = 0.5 * (row[2 * p - 2] + row[2 * p - 1]);
            assert!((c.eta - want).abs() < 1e-15);
            assert!((c.u - tuning(0.75).theta() / want.sqrt()).abs() < 1e-12);
        }
        assert!(ex.choices[4].iter().all(Option::is_none));
    }

    #[test]
    fn lagged_blocks_wrap_into_previous_day() {
        let grid = BlockGrid::new(10, 8, 80).unwrap();
        let bp: Vec<Vec<f64>> = (0..3)
            .map(|d| (0..8).map(|b| 1.0 + (d * 8 + b) as f64).collect())
            .collect();
        let t = TuningSpec::new(0.75, EtaScheme::LaggedBlocks { l1: 3, l2: 4 }).unwrap();
        let ex = select_exponents(&bp, &grid, &t).unwrap();
        assert_eq!(ex.warmup_days, 1);
        // day 1, pair 1: blocks 2-3 = -1 and 2-4 = -2 wrap to day 0 blocks 7 and 6
        let c = ex.choices[1][0].unwrap();
        assert!((c.eta - 0.5 * (bp[0][6] + bp[0][5])).abs() < 1e-15);
        // day 1, pair 3: blocks 3 and 2 of day 1
        let c = ex.choices[1][2].unwrap();
        assert!((c.eta - 0.5 * (bp[1][2] + bp[1][1])).abs() < 1e-15);
    }

    #[test]
    fn degenerate_reference_marks_pair() {
        let grid = BlockGrid::new(10, 8, 80).unwrap();
        let bp = vec![vec![0.0; 8]; 6];
        let ex = select_exponents(&bp, &grid, &tuning(0.75)).unwrap();
        assert!(ex.choices[5].iter().all(Option::is_none));
    }

    fn small_grid() -> BlockGrid {
        BlockGrid::new(10, 8, 80).unwrap()
    }

    #[test]
    fn separable_panel_differences_vanish() {
        let grid = small_grid();
        let vals: Vec<Vec<Option<f64>>> = (0..9)
            .map(|d| (1..=8).map(|b| Some((b as f64).sin() + 0.3 * d as f64)).collect())
            .collect();
        let panel = SpotVolPanel::from_log_variances(grid, tuning(0.75), 5, &vals);
        let diff = DiffPanel::from_spot(&panel).unwrap();
        assert_eq!(diff.product_days, vec![6, 8]);
        for row in &diff.values {
            for v in row {
                assert!(v.unwrap().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identical_days_give_zero_differences() {
        let one = gaussian_path(1, 480, 0.02, 3).days[0].clone();
        let days = (0..8).map(|d| TradingDay::new(format!("d{d}"), one.log_prices.clone())).collect();
        let path = PricePath::new(days, 1e-6, "").unwrap();
        let grid = build_block_grid(&path, 60, 48).unwrap();
        let diff = compute_diff_panel(&path, &grid, &tuning(0.75)).unwrap();
        assert!(diff.values.iter().flatten().all(|v| *v == Some(0.0)));
        assert!(matches!(
            test_statistic(&diff, &DEFAULT_ALPHAS),
            Err(Error::DegenerateStatistic(_))
        ));
    }

    fn diff_from(rows: Vec<Vec<Option<f64>>>) -> DiffPanel {
        DiffPanel {
            tuning: tuning(0.75),
            pairs_per_day: rows[0].len(),
            product_days: (0..rows.len()).collect(),
            values: rows,
        }
    }

    #[test]
    fn single_summand_is_unit_sign() {
        let r = test_statistic(&diff_from(vec![vec![Some(2.0), Some(-3.0)]]), &DEFAULT_ALPHAS).unwrap();
        assert_eq!(r.statistic, -1.0);
        assert_eq!(r.n_summands, 1);
        let r = test_statistic(&diff_from(vec![vec![Some(2.0), Some(3.0)]]), &DEFAULT_ALPHAS).unwrap();
        assert_eq!(r.statistic, 1.0);
    }

    #[test]
    fn alternating_series_hits_lower_bound() {
        let rows: Vec<Vec<Option<f64>>> = (0..5)
            .map(|_| (1..=38).map(|p| Some(if p % 2 == 0 { 1.0 } else { -1.0 })).collect())
            .collect();
        let r = test_statistic(&diff_from(rows), &DEFAULT_ALPHAS).unwrap();
        assert_eq!(r.n_summands, 5 * 37);
        assert!((r.statistic + (r.n_summands as f64).sqrt()).abs() < 1e-12);
        assert!(r.reject_at.iter().all(|d| d.reject));
        assert!((r.lag_acf[0] + 1.0).abs() < 1e-12);
        assert!((r.lag_acf[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn masked_entries_drop_summands() {
        let rows = vec![vec![Some(1.0), None, Some(2.0), Some(-1.0)]];
        let r = test_statistic(&diff_from(rows), &DEFAULT_ALPHAS).unwrap();
        assert_eq!(r.n_summands, 1);
        assert_eq!(r.n_dropped, 2);
        assert_eq!(r.statistic, -1.0);
    }

    #[test]
    fn retain_days_filters() {
        let mut d = diff_from(vec![vec![Some(1.0), Some(1.0)], vec![Some(2.0), Some(2.0)]]);
        d.retain_days(|day| day == 1);
        assert_eq!(d.product_days, vec![1]);
        assert_eq!(d.values, vec![vec![Some(2.0), Some(2.0)]]);
    }

    #[test]
    fn run_test_is_deterministic_and_bounded() {
        let path = gaussian_path(9, 600, 0.02, 4);
        let t = tuning(0.75);
        let a = run_test(&path, 60, 48, &t, &DEFAULT_ALPHAS).unwrap();
        let b = run_test(&path, 60, 48, &t, &DEFAULT_ALPHAS).unwrap();
        assert_eq!(a, b);
        assert!(a.statistic.abs() <= (a.n_summands as f64).sqrt());
        assert!((0.0..=1.0).contains(&a.p_value));
        // 2 product days x 4 summands (5 pairs per day)
        assert_eq!(a.n_summands + a.n_dropped, 8);
        for d in &a.reject_at {
            assert_eq!(d.reject, a.statistic < d.critical_value);
        }
    }

    #[test]
    fn insufficient_days_is_pipeline_error() {
        let path = gaussian_path(6, 600, 0.02, 4);
        let err = run_test(&path, 60, 48, &tuning(0.75), &DEFAULT_ALPHAS).unwrap_err();
        assert!(matches!(err, Error::Pipeline { stage: Stage::DiffPanel, .. }), "{err}");
        let path = gaussian_path(4, 600, 0.02, 4);
        let err = run_test(&path, 60, 48, &tuning(0.75), &DEFAULT_ALPHAS).unwrap_err();
        assert!(matches!(err, Error::Pipeline { stage: Stage::Exponents, .. }), "{err}");
    }
}
