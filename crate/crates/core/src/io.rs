//! Price-path CSV and JSON sidecar files.
//!
//! The CSV layout is `day,step,log_price` with an optional
//! `latent_variance` column. Floats are written with Rust's shortest
//! round-trip formatting so files are byte-stable. Grid spacing and the
//! meta label live in a sidecar `<file>.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PricePath, TradingDay};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSidecar {
    pub delta_n: f64,
    pub meta: String,
    pub n_days: usize,
    /// Resolved configuration of the run that produced the file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Renders a path as CSV text.
pub fn price_path_csv(path: &PricePath, latent_variance: Option<&[Vec<f64>]>) -> Result<String> {
    if let Some(lv) = latent_variance {
        let ok = lv.len() == path.days.len()
            && lv.iter().zip(&path.days).all(|(v, d)| v.len() == d.log_prices.len());
        if !ok {
            return Err(Error::PricePath("latent variance shape does not match the price path".into()));
        }
    }
    let mut out = String::new();
    out.push_str(if latent_variance.is_some() {
        "day,step,log_price,latent_variance\n"
    } else {
        "day,step,log_price\n"
    });
    for (d, day) in path.days.iter().enumerate() {
        if day.date.contains([',', '"', '\n']) {
            return Err(Error::PricePath(format!("day label {:?} cannot be written to CSV", day.date)));
        }
        for (i, p) in day.log_prices.iter().enumerate() {
            match latent_variance {
                Some(lv) => out.push_str(&format!("{},{i},{p},{}\n", day.date, lv[d][i])),
                None => out.push_str(&format!("{},{i},{p}\n", day.date)),
            }
        }
    }
    Ok(out)
}

/// Writes the CSV and its sidecar.
pub fn write_price_path(file: &Path, path: &PricePath, latent_variance: Option<&[Vec<f64>]>) -> Result<()> {
    write_price_path_with_config(file, path, latent_variance, None)
}

pub fn write_price_path_with_config(
    file: &Path,
    path: &PricePath,
    latent_variance: Option<&[Vec<f64>]>,
    config: Option<serde_json::Value>,
) -> Result<()> {
    let csv = price_path_csv(path, latent_variance)?;
    let side = PathSidecar {
        delta_n: path.delta_n,
        meta: path.meta.clone(),
        n_days: path.days.len(),
        config,
    };
    fs::write(file, csv)?;
    fs::write(sidecar_path(file), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct Row {
    day: String,
    step: usize,
    log_price: f64,
}

/// Reads a path CSV. Grid spacing comes from the sidecar when present,
/// otherwise `default_delta_n`. Rows of a day must be contiguous with steps
/// `0, 1, 2, ...`.
pub fn read_price_path(file: &Path, default_delta_n: f64) -> Result<PricePath> {
    let mut reader = csv::Reader::from_path(file)?;
    let mut days: Vec<TradingDay> = Vec::new();
    for (line, row) in reader.deserialize::<Row>().enumerate() {
        let row = row?;
        let fresh = days.last().is_none_or(|d| d.date != row.day);
        if fresh {
            if days.iter().any(|d| d.date == row.day) {
                return Err(Error::PricePath(format!("rows for day {} are not contiguous", row.day)));
            }
            days.push(TradingDay::new(row.day.clone(), Vec::new()));
        }
        let day = days.last_mut().expect("day pushed above");
        if row.step != day.log_prices.len() {
            return Err(Error::PricePath(format!(
                "row {}: day {} expected step {}, found {}",
                line + 2,
                row.day,
                day.log_prices.len(),
                row.step
            )));
        }
        day.log_prices.push(row.log_price);
    }
    let side = sidecar_path(file);
    let (delta_n, meta) = if side.exists() {
        let s: PathSidecar = serde_json::from_str(&fs::read_to_string(&side)?)?;
        (s.delta_n, s.meta)
    } else {
        (default_delta_n, file.display().to_string())
    };
    PricePath::new(days, delta_n, meta)
}

/// Pretty JSON for any serialisable artifact.
pub fn write_json<T: Serialize>(file: &Path, value: &T) -> Result<()> {
    fs::write(file, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
