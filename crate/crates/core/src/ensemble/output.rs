//! CSV and JSON writers.
//!
//! Every CSV has a header row whose first column is `time`, `delay` or
//! `detuning`, followed by `mean`, `std_error` and `n_trajectories`. Complex
//! series split mean and error into `_re` and `_im` columns. Numbers use the
//! shortest representation that round-trips, so files are byte-stable.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::tasks::SweepTable;
use crate::correlations::{CorrelationSeries, SpectrumSeries};
use crate::observables::{EnsembleSeries, WtdHistogram};
use crate::{Error, Result};

pub fn series_csv(x_label: &str, x: &[f64], mean: &[f64], std_error: &[f64], n: usize) -> String {
    let mut out = format!("{x_label},mean,std_error,n_trajectories\n");
    for ((x, m), e) in x.iter().zip(mean).zip(std_error) {
        let _ = writeln!(out, "{x},{m},{e},{n}");
    }
    out
}

pub fn ensemble_csv(series: &EnsembleSeries) -> String {
    series_csv(
        "time",
        &series.times,
        &series.mean,
        &series.std_error,
        series.n_trajectories,
    )
}

pub fn correlation_csv(series: &CorrelationSeries) -> String {
    if !series.kind.is_complex() {
        return series_csv(
            "delay",
            &series.delays,
            &series.real(),
            &series.real_error(),
            series.n_trajectories,
        );
    }
    let mut out = String::from("delay,mean_re,mean_im,std_error_re,std_error_im,n_trajectories\n");
    for ((d, v), e) in series
        .delays
        .iter()
        .zip(&series.values)
        .zip(&series.std_error)
    {
        let _ = writeln!(
            out,
            "{d},{},{},{},{},{}",
            v.re, v.im, e.re, e.im, series.n_trajectories
        );
    }
    out
}

pub fn spectrum_csv(s: &SpectrumSeries) -> String {
    series_csv(
        "detuning",
        &s.detunings,
        &s.values,
        &s.std_error,
        s.n_trajectories,
    )
}

/// Bin centres against the fraction of delays in each bin; the error is
/// the Poisson error of the count.
pub fn wtd_csv(h: &WtdHistogram, n_trajectories: usize) -> String {
    let n = h.n_events.max(1) as f64;
    let errors: Vec<f64> = h.counts.iter().map(|&c| (c as f64).sqrt() / n).collect();
    series_csv(
        "time",
        &h.bin_centers(),
        &h.normalized,
        &errors,
        n_trajectories,
    )
}

pub fn sweep_csv(table: &SweepTable) -> String {
    let mut out = format!(
        "{},status,t_ss,g2_dt,g2_dt_std_error,flux,flux_std_error,p0,p0_std_error,p1,p1_std_error,p2,p2_std_error,n_trajectories\n",
        table.parameter
    );
    for row in &table.rows {
        let status = match &row.error {
            None => "ok".to_string(),
            Some(e) => format!("\"failed: {}\"", e.replace('"', "'")),
        };
        let n = row.records.last().map_or(0, |r| r.completed);
        let p = &row.loop_probabilities;
        let _ = writeln!(
            out,
            "{},{status},{},{},{},{},{},{},{},{},{},{},{},{n}",
            row.value,
            row.t_ss,
            row.g2_dt.0,
            row.g2_dt.1,
            row.flux.0,
            row.flux.1,
            p[0].0,
            p[0].1,
            p[1].0,
            p[1].1,
            p[2].0,
            p[2].1
        );
    }
    out
}

/// Collects files written under one output directory.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}
