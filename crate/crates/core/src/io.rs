//! CSV ingestion and emission, and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dgp::Dataset;
use crate::error::{Error, Result};
use crate::montecarlo::{SweepConfig, SweepRow};

pub const DATASET_HEADER: [&str; 3] = ["model", "year", "tokens"];
pub const FIT_HEADER: [&str; 4] = ["model", "year", "tokens", "lnL"];
pub const SWEEP_HEADER: &str = "rho,implied_corr,mean_beta_hat,sd_beta_hat,plim_beta,\
mean_beta_year_hat,sd_beta_year_hat,plim_beta_year,mean_ratio,median_ratio,sd_ratio,\
plim_ratio,n_degenerate,sign_ok";

pub const MIN_ROWS: usize = 5;
pub const YEAR_WINDOW: (f64, f64) = (1950.0, 2100.0);

/// One row of an input dataset. Loss is not part of the input; it is simulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestRecord {
    pub model: String,
    pub year: f64,
    pub tokens: f64,
}

struct Table {
    records: Vec<IngestRecord>,
    lnl: Vec<f64>,
}

fn read_table(path: &Path, header: &[&str]) -> Result<Table> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes.as_slice());

    let format_err = |row: usize, msg: String| Error::Format {
        path: path.to_path_buf(),
        row,
        msg,
    };
    let value_err = |row: usize, msg: String| Error::Value {
        path: path.to_path_buf(),
        row,
        msg,
    };

    let mut table = Table { records: Vec::new(), lnl: Vec::new() };
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| format_err(i + 1, e.to_string()))?;
        let fields: Vec<&str> = rec.iter().map(str::trim).collect();
        if i == 0 {
            if fields != header {
                return Err(format_err(
                    1,
                    format!("expected header `{}`, found `{}`", header.join(","), fields.join(",")),
                ));
            }
            continue;
        }
        // rows are numbered from 1 at the first data line
        let row = i;
        if fields.len() != header.len() {
            return Err(format_err(
                row,
                format!("expected {} columns, found {}", header.len(), fields.len()),
            ));
        }
        let num = |idx: usize| -> Result<f64> {
            fields[idx]
                .parse::<f64>()
                .map_err(|_| value_err(row, format!("{} `{}` is not a number", header[idx], fields[idx])))
        };
        let (year, tokens) = (num(1)?, num(2)?);
        if !(YEAR_WINDOW.0..=YEAR_WINDOW.1).contains(&year) {
            return Err(value_err(row, format!("year {year} outside [1950, 2100]")));
        }
        if !(tokens > 0.0 && tokens.is_finite()) {
            return Err(value_err(row, format!("tokens must be positive, got {}", fields[2])));
        }
        if header.len() == 4 {
            let l = num(3)?;
            if !l.is_finite() {
                return Err(value_err(row, "lnL must be finite".into()));
            }
            table.lnl.push(l);
        }
        table.records.push(IngestRecord { model: fields[0].to_string(), year, tokens });
    }

    if table.records.len() < MIN_ROWS {
        return Err(Error::InsufficientData {
            path: path.to_path_buf(),
            need: MIN_ROWS,
            found: table.records.len(),
        });
    }
    Ok(table)
}

fn to_dataset(records: &[IngestRecord], y0: Option<f64>) -> Result<Dataset> {
    let years: Vec<f64> = records.iter().map(|r| r.year).collect();
    let lnd = records.iter().map(|r| r.tokens.ln()).collect();
    let y0 = y0.unwrap_or_else(|| years.iter().copied().fold(f64::INFINITY, f64::min).floor());
    Dataset::new(years, lnd, y0)
}

/// Reads a `model,year,tokens` file. `y0` defaults to the floor of the
/// earliest year.
pub fn ingest_csv(path: &Path, y0: Option<f64>) -> Result<Dataset> {
    let t = read_table(path, &DATASET_HEADER)?;
    to_dataset(&t.records, y0)
}

pub fn ingest_records(path: &Path) -> Result<Vec<IngestRecord>> {
    Ok(read_table(path, &DATASET_HEADER)?.records)
}

/// Reads a `model,year,tokens,lnL` file for a single fit.
pub fn ingest_fit_csv(path: &Path, y0: Option<f64>) -> Result<(Dataset, Vec<f64>)> {
    let t = read_table(path, &FIT_HEADER)?;
    Ok((to_dataset(&t.records, y0)?, t.lnl))
}

/// Shortest round-trip decimal; exponent form outside `[1e-5, 1e16)`.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if x.is_finite() && a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NaN".to_string(), fmt_num)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes a dataset as `model,year,tokens[,lnL]` with synthetic model labels.
pub fn write_dataset_csv(path: &Path, data: &Dataset, lnl: Option<&[f64]>) -> Result<()> {
    let mut out = String::new();
    out.push_str(if lnl.is_some() { "model,year,tokens,lnL\n" } else { "model,year,tokens\n" });
    for (i, (y, d)) in data.years().iter().zip(data.lnd()).enumerate() {
        let _ = write!(out, "m{:04},{},{}", i, fmt_num(*y), fmt_num(d.exp()));
        if let Some(l) = lnl {
            let _ = write!(out, ",{}", fmt_num(l[i]));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn sweep_csv_string(rows: &[SweepRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Config("no sweep rows to write".into()));
    }
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_num(r.rho),
            fmt_num(r.implied_corr),
            fmt_num(r.mean_beta_hat),
            fmt_num(r.sd_beta_hat),
            fmt_num(r.plim_beta),
            fmt_num(r.mean_beta_year_hat),
            fmt_num(r.sd_beta_year_hat),
            fmt_num(r.plim_beta_year),
            fmt_opt(r.mean_ratio),
            fmt_opt(r.median_ratio),
            fmt_opt(r.sd_ratio),
            fmt_opt(r.plim_ratio),
            r.n_degenerate,
            r.sign_ok
        );
    }
    Ok(out)
}

pub fn emit_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    write_file(path, &sweep_csv_string(rows)?)
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRef {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to rerun a sweep and regenerate its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    pub seed: u64,
    pub beta_prime: f64,
    pub svg_width: u32,
    pub svg_height: u32,
    pub config: SweepConfig,
    pub input: Option<InputRef>,
    /// Unix seconds from `SOURCE_DATE_EPOCH`, when set.
    pub timestamp: Option<u64>,
}

impl RunManifest {
    pub fn new(config: SweepConfig, beta_prime: f64, svg_size: (u32, u32), input: Option<InputRef>) -> Self {
        Self {
            artifact: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            beta_prime,
            svg_width: svg_size.0,
            svg_height: svg_size.1,
            config,
            input,
            timestamp: std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_json())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::Manifest(e.to_string()))?;
        if m.seed != m.config.seed {
            return Err(Error::Manifest("seed does not match config.seed".into()));
        }
        Ok(m)
    }
}
