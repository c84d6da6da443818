//! Tick files to regular-grid price paths.
//!
//! Input CSV has the header `timestamp,price`. The timestamp column is either
//! epoch seconds (integer or fractional, UTC) or ISO-8601. The format is
//! detected from the first row and must not change within a file. Epoch
//! times and ISO times carrying an offset are converted to the exchange-local
//! clock with a fixed UTC offset; ISO times without an offset are taken as
//! exchange-local already. No daylight-saving inference is done.
//!
//! Tick cleaning (outliers, bounce-backs) is expected to happen upstream.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, NaiveTime, TimeDelta};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PricePath, TradingDay, TRADING_DAYS_PER_YEAR};

/// Length of the regular session used for the business-time clock.
pub const SESSION_SECONDS: f64 = 23_400.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tick {
    /// Exchange-local wall-clock time.
    pub time: NaiveDateTime,
    pub price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestampFormat {
    EpochSeconds,
    Iso8601,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTickFile {
    pub source: String,
    pub format: TimestampFormat,
    pub ticks: Vec<Tick>,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    timestamp: String,
    price: f64,
}

fn detect(ts: &str) -> TimestampFormat {
    if ts.parse::<f64>().is_ok() {
        TimestampFormat::EpochSeconds
    } else {
        TimestampFormat::Iso8601
    }
}

fn parse_time(ts: &str, format: TimestampFormat, utc_offset: TimeDelta) -> Option<NaiveDateTime> {
    match format {
        TimestampFormat::EpochSeconds => {
            let secs: f64 = ts.parse().ok()?;
            if !secs.is_finite() {
                return None;
            }
            let whole = secs.floor();
            let nanos = ((secs - whole) * 1e9).round().min(999_999_999.0) as u32;
            let utc = DateTime::from_timestamp(whole as i64, nanos)?.naive_utc();
            Some(utc + utc_offset)
        }
        TimestampFormat::Iso8601 => {
            if let Ok(dt) = DateTime::parse_from_rfc3339(ts) {
                return Some(dt.naive_utc() + utc_offset);
            }
            ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
                .iter()
                .find_map(|f| NaiveDateTime::parse_from_str(ts, f).ok())
        }
    }
}

impl RawTickFile {
    pub fn from_reader<R: Read>(reader: R, source: &str, utc_offset_seconds: i32) -> Result<Self> {
        let offset = TimeDelta::seconds(utc_offset_seconds as i64);
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut format = None;
        let mut ticks: Vec<Tick> = Vec::new();
        for (i, row) in rdr.deserialize::<RawRow>().enumerate() {
            let line = i + 2;
            let row = row?;
            let fmt = *format.get_or_insert_with(|| detect(&row.timestamp));
            if detect(&row.timestamp) != fmt {
                return Err(Error::Ingest(format!("{source}:{line}: timestamp format changed mid-file")));
            }
            let time = parse_time(&row.timestamp, fmt, offset).ok_or_else(|| {
                Error::Ingest(format!("{source}:{line}: cannot parse timestamp {:?}", row.timestamp))
            })?;
            if !(row.price > 0.0 && row.price.is_finite()) {
                return Err(Error::Ingest(format!("{source}:{line}: price must be positive, got {}", row.price)));
            }
            if ticks.last().is_some_and(|t| t.time > time) {
                return Err(Error::Ingest(format!("{source}:{line}: timestamps decrease")));
            }
            ticks.push(Tick { time, price: row.price });
        }
        Ok(Self {
            source: source.to_string(),
            format: format.unwrap_or(TimestampFormat::Iso8601),
            ticks,
        })
    }

    pub fn read_csv(path: &Path, utc_offset_seconds: i32) -> Result<Self> {
        let f = fs::File::open(path)?;
        Self::from_reader(f, &path.display().to_string(), utc_offset_seconds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Session {
    pub open: NaiveTime,
    pub close: NaiveTime,
}

impl Default for Session {
    fn default() -> Self {
        Self {
            open: NaiveTime::from_hms_opt(9, 35, 0).expect("valid time"),
            close: NaiveTime::from_hms_opt(16, 0, 0).expect("valid time"),
        }
    }
}

impl Session {
    pub fn new(open: NaiveTime, close: NaiveTime) -> Result<Self> {
        let s = Self { open, close };
        s.validate()?;
        Ok(s)
    }

    /// Parses `HH:MM-HH:MM` (seconds optional).
    pub fn parse(spec: &str) -> Result<Self> {
        let (a, b) = spec
            .split_once('-')
            .ok_or_else(|| Error::domain(format!("session must look like 09:35-16:00, got {spec:?}")))?;
        let t = |s: &str| {
            NaiveTime::parse_from_str(s.trim(), "%H:%M:%S")
                .or_else(|_| NaiveTime::parse_from_str(s.trim(), "%H:%M"))
                .map_err(|_| Error::domain(format!("bad session time {s:?}")))
        };
        Self::new(t(a)?, t(b)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.open >= self.close {
            return Err(Error::domain(format!(
                "session open {} must precede close {}",
                self.open, self.close
            )));
        }
        Ok(())
    }

    pub fn seconds(&self) -> i64 {
        (self.close - self.open).num_seconds()
    }
}

/// One day's regular grid of log-prices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DayGrid {
    pub date: NaiveDate,
    pub log_prices: Vec<f64>,
    /// Grid points before the first in-session tick were back-filled.
    pub leading_fill: bool,
    /// Every grid point carries the same price.
    pub flat: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedDay {
    pub date: NaiveDate,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resampled {
    pub step_seconds: u32,
    pub days: Vec<DayGrid>,
    pub dropped: Vec<DroppedDay>,
}

impl Resampled {
    /// Grid spacing in years on the business-time clock.
    pub fn delta_n(&self) -> f64 {
        self.step_seconds as f64 / (SESSION_SECONDS * TRADING_DAYS_PER_YEAR)
    }
}

/// Previous-tick sampling onto `open, open+step, ..., close` for each
/// calendar day that has ticks.
pub fn resample(raw: &RawTickFile, session: Session, step_seconds: u32) -> Result<Resampled> {
    session.validate()?;
    if step_seconds == 0 || session.seconds() % step_seconds as i64 != 0 {
        return Err(Error::domain(format!(
            "step of {step_seconds}s must divide the {}s session",
            session.seconds()
        )));
    }
    let mut by_day: BTreeMap<NaiveDate, Vec<Tick>> = BTreeMap::new();
    for t in &raw.ticks {
        by_day.entry(t.time.date()).or_default().push(*t);
    }
    let n_points = (session.seconds() / step_seconds as i64) as usize + 1;
    let step = TimeDelta::seconds(step_seconds as i64);
    let results: Vec<std::result::Result<DayGrid, DroppedDay>> = by_day
        .into_par_iter()
        .map(|(date, ticks)| {
            let open = date.and_time(session.open);
            let close = date.and_time(session.close);
            let inside: Vec<&Tick> = ticks.iter().filter(|t| t.time >= open && t.time <= close).collect();
            let Some(first) = inside.first() else {
                return Err(DroppedDay {
                    date,
                    reason: "no ticks inside the session".into(),
                });
            };
            let mut prices = Vec::with_capacity(n_points);
            let mut j = 0usize;
            let mut leading_fill = false;
            for k in 0..n_points {
                let t = open + step * k as i32;
                while j < inside.len() && inside[j].time <= t {
                    j += 1;
                }
                let price = if j == 0 {
                    leading_fill = true;
                    first.price
                } else {
                    inside[j - 1].price
                };
                prices.push(price.ln());
            }
            let flat = prices.iter().all(|p| *p == prices[0]);
            Ok(DayGrid {
                date,
                log_prices: prices,
                leading_fill,
                flat,
            })
        })
        .collect();
    let mut days = Vec::new();
    let mut dropped = Vec::new();
    for r in results {
        match r {
            Ok(d) => days.push(d),
            Err(d) => {
                log::warn!("dropping {}: {}", d.date, d.reason);
                dropped.push(d)
            }
        }
    }
    Ok(Resampled {
        step_seconds,
        days,
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DayFilterConfig {
    pub zero_return_threshold: f64,
    pub exclusion_dates: Vec<NaiveDate>,
    pub session: Session,
}

impl Default for DayFilterConfig {
    fn default() -> Self {
        Self {
            zero_return_threshold: 0.2,
            exclusion_dates: Vec::new(),
            session: Session::default(),
        }
    }
}

impl DayFilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.zero_return_threshold > 0.0 && self.zero_return_threshold <= 1.0) {
            return Err(Error::domain(format!(
                "zero-return threshold must lie in (0,1], got {}",
                self.zero_return_threshold
            )));
        }
        self.session.validate()
    }
}

/// One ISO date per line; blank lines and `#` comments are ignored.
pub fn read_exclusion_dates(path: &Path) -> Result<Vec<NaiveDate>> {
    fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            NaiveDate::parse_from_str(l, "%Y-%m-%d")
                .map_err(|_| Error::Ingest(format!("{}: bad date {l:?}", path.display())))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterLogEntry {
    pub date: NaiveDate,
    pub kept: bool,
    pub zero_fraction: f64,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub path: PricePath,
    pub log: Vec<FilterLogEntry>,
}

/// Fraction of exactly-zero five-minute returns of a day grid.
pub fn zero_return_fraction(log_prices: &[f64], stride: usize) -> f64 {
    let coarse: Vec<f64> = log_prices.iter().step_by(stride).copied().collect();
    let n = coarse.len().saturating_sub(1);
    if n == 0 {
        return 1.0;
    }
    coarse.windows(2).filter(|w| w[1] == w[0]).count() as f64 / n as f64
}

/// Applies the zero-return and exclusion-date filters, preserving order.
pub fn filter_days(grids: &Resampled, config: &DayFilterConfig) -> Result<FilterOutcome> {
    config.validate()?;
    if grids.days.is_empty() {
        return Err(Error::Ingest("no days to filter".into()));
    }
    if 300 % grids.step_seconds != 0 {
        return Err(Error::domain(format!(
            "step of {}s does not divide five minutes",
            grids.step_seconds
        )));
    }
    let stride = (300 / grids.step_seconds) as usize;
    let excluded: HashSet<NaiveDate> = config.exclusion_dates.iter().copied().collect();
    let mut log = Vec::with_capacity(grids.days.len());
    let mut kept = Vec::new();
    for day in &grids.days {
        let zf = zero_return_fraction(&day.log_prices, stride);
        let reason = if excluded.contains(&day.date) {
            Some("on the exclusion list".to_string())
        } else if zf > config.zero_return_threshold {
            Some(format!(
                "zero five-minute return fraction {zf:.4} exceeds {}",
                config.zero_return_threshold
            ))
        } else {
            None
        };
        if reason.is_none() {
            kept.push(TradingDay::new(day.date.to_string(), day.log_prices.clone()));
        }
        log.push(FilterLogEntry {
            date: day.date,
            kept: reason.is_none(),
            zero_fraction: zf,
            reason,
        });
    }
    if kept.is_empty() {
        return Err(Error::Ingest("every day was filtered out".into()));
    }
    let path = PricePath::new(kept, grids.delta_n(), "ingested")?;
    Ok(FilterOutcome { path, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_stream;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 3, 2).unwrap()
    }

    fn csv_ticks(rows: &[(String, f64)]) -> RawTickFile {
        let mut s = String::from("timestamp,price\n");
        for (t, p) in rows {
            s.push_str(&format!("{t},{p}\n"));
        }
        RawTickFile::from_reader(s.as_bytes(), "mem", 0).unwrap()
    }

    fn iso(t: NaiveDateTime) -> String {
        t.format("%Y-%m-%dT%H:%M:%S%.f").to_string()
    }

    #[test]
    fn detects_formats_and_offsets() {
        let f = csv_ticks(&[("1583159700".into(), 100.0)]);
        assert_eq!(f.format, TimestampFormat::EpochSeconds);
        assert_eq!(f.ticks[0].time, date().and_hms_opt(14, 35, 0).unwrap());
        let f = RawTickFile::from_reader(
            "timestamp,price\n1583159700.5,1\n".as_bytes(),
            "mem",
            -5 * 3600,
        )
        .unwrap();
        assert_eq!(f.ticks[0].time, date().and_hms_milli_opt(9, 35, 0, 500).unwrap());
        let f = RawTickFile::from_reader(
            "timestamp,price\n2020-03-02T14:35:00Z,1\n2020-03-02T09:40:00,2\n".as_bytes(),
            "mem",
            -5 * 3600,
        );
        // an explicit offset is converted, a naive time is kept
        let f = f.unwrap();
        assert_eq!(f.ticks[0].time, date().and_hms_opt(9, 35, 0).unwrap());
        assert_eq!(f.ticks[1].time, date().and_hms_opt(9, 40, 0).unwrap());
    }

    #[test]
    fn rejects_bad_rows() {
        for body in [
            "timestamp,price\n10,1\n5,1\n",
            "timestamp,price\n10,-1\n",
            "timestamp,price\n10,1\n2020-03-02T09:40:00,1\n",
            "timestamp,price\nyesterday,1\n",
        ] {
            assert!(RawTickFile::from_reader(body.as_bytes(), "mem", 0).is_err(), "{body}");
        }
    }

    #[test]
    fn ticks_on_grid_reproduce_prices() {
        let s = Session::default();
        let rows: Vec<(String, f64)> = (0..4621)
            .map(|k| {
                let t = date().and_time(s.open) + TimeDelta::seconds(5 * k);
                (iso(t), 100.0 + k as f64 * 0.01)
            })
            .collect();
        let r = resample(&csv_ticks(&rows), s, 5).unwrap();
        assert_eq!(r.days.len(), 1);
        let d = &r.days[0];
        assert_eq!(d.log_prices.len(), 4621);
        assert!(!d.leading_fill && !d.flat);
        for (k, p) in d.log_prices.iter().enumerate() {
            assert_eq!(*p, (100.0 + k as f64 * 0.01).ln());
        }
        assert!((r.delta_n() - 1.0 / (252.0 * 4680.0)).abs() < 1e-20);
    }

    #[test]
    fn resample_is_idempotent_on_grid_input() {
        let s = Session::parse("10:00-10:30").unwrap();
        let mut st = rng_stream(9, 0, 0);
        let mut p = 100.0f64;
        let rows: Vec<(String, f64)> = (0..200)
            .map(|k| {
                p *= (0.001 * st.normal()).exp();
                (iso(date().and_time(s.open) + TimeDelta::milliseconds(9_137 * k)), p)
            })
            .collect();
        let once = resample(&csv_ticks(&rows), s, 5).unwrap();
        let regrid: Vec<(String, f64)> = once.days[0]
            .log_prices
            .iter()
            .enumerate()
            .map(|(k, lp)| (iso(date().and_time(s.open) + TimeDelta::seconds(5 * k as i64)), lp.exp()))
            .collect();
        let twice = resample(&csv_ticks(&regrid), s, 5).unwrap();
        for (a, b) in once.days[0].log_prices.iter().zip(&twice.days[0].log_prices) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_tick_gives_flat_day() {
        let s = Session::parse("09:30-16:00").unwrap();
        let rows = vec![(iso(date().and_time(s.open)), 50.0)];
        let r = resample(&csv_ticks(&rows), s, 5).unwrap();
        let d = &r.days[0];
        // 4680 five-second intervals
        assert_eq!(d.log_prices.len() - 1, 4680);
        assert!(d.flat);
        assert!(!d.leading_fill);
    }

    #[test]
    fn late_first_tick_is_back_filled_and_empty_day_dropped() {
        let s = Session::default();
        let d2 = date().succ_opt().unwrap();
        let rows = vec![
            (iso(date().and_hms_opt(10, 0, 0).unwrap()), 10.0),
            (iso(date().and_hms_opt(11, 0, 0).unwrap()), 11.0),
            (iso(d2.and_hms_opt(8, 0, 0).unwrap()), 12.0),
        ];
        let r = resample(&csv_ticks(&rows), s, 5).unwrap();
        assert_eq!(r.days.len(), 1);
        assert!(r.days[0].leading_fill);
        assert_eq!(r.days[0].log_prices[0], 10f64.ln());
        assert_eq!(r.dropped.len(), 1);
        assert_eq!(r.dropped[0].date, d2);
    }

    #[test]
    fn poisson_ticks_track_the_true_path() {
        // True path on a one-second clock; ticks at Poisson times read it.
        let s = Session::parse("09:35-10:35").unwrap();
        let secs = s.seconds() as usize;
        let mut st = rng_stream(21, 0, 0);
        let mut truth = vec![4.0f64];
        for _ in 0..secs {
            let l = *truth.last().unwrap();
            truth.push(l + 1e-4 * st.normal());
        }
        let mut t = 0.0f64;
        let mut tick_secs = Vec::new();
        let mut rows = Vec::new();
        loop {
            t += -3.0 * st.uniform_open0().ln();
            let sec = t.floor() as usize;
            if sec > secs {
                break;
            }
            tick_secs.push(sec);
            rows.push((iso(date().and_time(s.open) + TimeDelta::seconds(sec as i64)), truth[sec].exp()));
        }
        let r = resample(&csv_ticks(&rows), s, 5).unwrap();
        let first = tick_secs[0];
        for (k, lp) in r.days[0].log_prices.iter().enumerate() {
            let g = 5 * k;
            let last = tick_secs.iter().rev().find(|&&x| x <= g).copied().unwrap_or(first);
            let (lo, hi) = (last.min(g), last.max(g));
            let swing = truth[lo..=hi].iter().map(|v| (v - truth[g]).abs()).fold(0.0, f64::max);
            assert!((lp - truth[g]).abs() <= swing + 1e-12);
        }
    }

    fn grids(days: Vec<(NaiveDate, Vec<f64>)>) -> Resampled {
        Resampled {
            step_seconds: 5,
            days: days
                .into_iter()
                .map(|(date, log_prices)| DayGrid {
                    date,
                    log_prices,
                    leading_fill: false,
                    flat: false,
                })
                .collect(),
            dropped: vec![],
        }
    }

    #[test]
    fn filters_flat_and_excluded_days() {
        let mut st = rng_stream(4, 0, 0);
        let mut walk = |n: usize| {
            let mut p = vec![4.0];
            for _ in 0..n {
                let l = *p.last().unwrap();
                p.push(l + 1e-4 * st.normal());
            }
            p
        };
        let d = |k: u64| date().checked_add_days(chrono::Days::new(k)).unwrap();
        let g = grids(vec![
            (d(0), walk(4620)),
            (d(1), vec![4.0; 4621]),
            (d(2), walk(4620)),
            (d(3), walk(4620)),
        ]);
        let cfg = DayFilterConfig {
            exclusion_dates: vec![d(2)],
            ..Default::default()
        };
        let out = filter_days(&g, &cfg).unwrap();
        assert_eq!(out.path.days.len(), 2);
        assert_eq!(out.path.days[0].date, d(0).to_string());
        assert_eq!(out.path.days[1].date, d(3).to_string());
        assert_eq!(out.path.days[1].log_prices, g.days[3].log_prices);
        assert_eq!(out.log.len(), 4);
        assert_eq!(out.log.iter().filter(|e| e.kept).count(), 2);
        assert_eq!(out.log[1].zero_fraction, 1.0);
        assert!(out.log[2].reason.as_deref().unwrap().contains("exclusion"));

        let all_flat = grids(vec![(d(0), vec![1.0; 4621])]);
        assert!(filter_days(&all_flat, &DayFilterConfig::default()).is_err());
    }

    #[test]
    fn exclusion_file_and_config_validation() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("x.txt");
        fs::write(&f, "# fomc\n2020-03-03\n\n2020-03-15\n").unwrap();
        assert_eq!(read_exclusion_dates(&f).unwrap().len(), 2);
        fs::write(&f, "03/03/2020\n").unwrap();
        assert!(read_exclusion_dates(&f).is_err());
        let cfg = DayFilterConfig {
            zero_return_threshold: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!(Session::parse("16:00-09:35").is_err());
    }
}
