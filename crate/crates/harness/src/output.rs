//! Result files: CSV tables, per-cell histograms and time series, JSON mirror.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::sweep::RunRecord;

pub const RESULTS_CSV: &str = "results.csv";
pub const RECORD_JSON: &str = "record.json";
pub const CONFIG_ECHO: &str = "config.toml";
pub const FITS_JSON: &str = "fits.json";
pub const EQUILIBRIUM_CSV: &str = "equilibrium.csv";

/// One line of `results.csv`; field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub gamma: f64,
    pub t_a: f64,
    pub n_traj: u64,
    pub seed: u64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub ratio21: f64,
    pub ratio31: f64,
    pub err21: f64,
    pub err31: f64,
    pub density: f64,
    pub density_err: f64,
}

pub const RESULTS_HEADER: &str =
    "gamma,t_a,n_traj,seed,kappa1,kappa2,kappa3,ratio21,ratio31,err21,err31,density,density_err";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HistogramRow {
    n: u64,
    count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SeriesRow {
    t: f64,
    mz_mean: f64,
    kinks_mean: f64,
}

/// Create `dir` and prove it is writable before any computation starts.
pub fn preflight(dir: &Path) -> Result<()> {
    let fail = |e: std::io::Error| HarnessError::Io(format!("output directory {} is not writable: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(fail)?;
    let probe = dir.join(".svl-write-probe");
    fs::write(&probe, b"ok").map_err(fail)?;
    fs::remove_file(&probe).map_err(fail)?;
    Ok(())
}

pub fn result_rows(record: &RunRecord) -> Vec<ResultRow> {
    record
        .cells
        .iter()
        .filter_map(|c| {
            let s = c.stats.as_ref()?;
            Some(ResultRow {
                gamma: c.cell.gamma,
                t_a: c.cell.t_a,
                n_traj: s.n_samples,
                seed: c.seed,
                kappa1: s.kappa[0],
                kappa2: s.kappa[1],
                kappa3: s.kappa[2],
                ratio21: s.ratios[0],
                ratio31: s.ratios[1],
                err21: s.ratio_err[0],
                err31: s.ratio_err[1],
                density: s.mean_density,
                density_err: s.density_err,
            })
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let header: Vec<&str> = RESULTS_HEADER.split(',').collect();
    write_csv(path, &header, rows)
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != RESULTS_HEADER {
        return Err(HarnessError::Io(format!("{} does not have the results header", path.display())));
    }
    let rows: std::result::Result<Vec<ResultRow>, csv::Error> = r.deserialize().collect();
    Ok(rows?)
}

/// Write every output file for `record` into `dir`; returns the paths written.
pub fn emit_results(record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    preflight(dir)?;
    let mut written = Vec::new();

    let results = dir.join(RESULTS_CSV);
    write_results_csv(&results, &result_rows(record))?;
    written.push(results);

    for c in &record.cells {
        let tag = format!("g{:03}_t{:03}", c.cell.gamma_index, c.cell.ta_index);
        if let (Some(s), true) = (&c.stats, record.config.output.histograms) {
            let hist_dir = dir.join("histograms");
            fs::create_dir_all(&hist_dir)?;
            let rows: Vec<HistogramRow> = s.histogram.iter().map(|(&n, &count)| HistogramRow { n, count }).collect();
            let path = hist_dir.join(format!("{tag}.csv"));
            write_csv(&path, &["n", "count"], &rows)?;
            written.push(path);
        }
        if !c.time_series.is_empty() {
            let ts_dir = dir.join("timeseries");
            fs::create_dir_all(&ts_dir)?;
            let rows: Vec<SeriesRow> = c
                .time_series
                .iter()
                .map(|p| SeriesRow {
                    t: p.t,
                    mz_mean: p.mz_mean,
                    kinks_mean: p.kinks_mean,
                })
                .collect();
            let path = ts_dir.join(format!("{tag}.csv"));
            write_csv(&path, &["t", "mz_mean", "kinks_mean"], &rows)?;
            written.push(path);
        }
    }

    let json = dir.join(RECORD_JSON);
    fs::write(&json, serde_json::to_vec_pretty(record)?)?;
    written.push(json);
    Ok(written)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(value)?)?;
    Ok(())
}
