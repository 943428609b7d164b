//! Aggregation of run directories into sweep tables and figure data.

use std::path::Path;

use crate::output::{read_manifest, read_result, MANIFEST_FILE, RESULT_FILE};
use crate::stats::summarize;
use crate::sweep::{GridSpec, GRID_FILE, SWEEP_FILE};
use crate::{read_file, write_file, Error, Result};

/// Mean and confidence half-width of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub ci: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub density: f64,
    pub mu_ts: f64,
    pub w_ts: f64,
    pub n: usize,
    pub loss: Estimate,
    pub delay: Estimate,
    pub ts: Estimate,
    pub jitter: Estimate,
    pub decodable: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub confidence: f64,
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_HEADER: [&str; 14] = [
    "density",
    "mu_ts",
    "w_ts",
    "n",
    "loss_mean",
    "loss_ci",
    "delay_mean",
    "delay_ci",
    "ts_mean",
    "ts_ci",
    "jitter_mean",
    "jitter_ci",
    "decodable_mean",
    "decodable_ci",
];

/// Metrics of `result.csv` that a sweep aggregates, in table order.
const METRICS: [&str; 5] = ["loss", "mean_delay", "mean_ts", "mean_jitter", "decodable_gops"];

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Config(e.to_string()))
}

impl SweepTable {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = writer();
        w.write_record(SWEEP_HEADER)?;
        for r in &self.rows {
            let mut rec = vec![r.density.to_string(), r.mu_ts.to_string(), r.w_ts.to_string(), r.n.to_string()];
            for e in [r.loss, r.delay, r.ts, r.jitter, r.decodable] {
                rec.push(e.mean.to_string());
                rec.push(e.ci.to_string());
            }
            w.write_record(&rec)?;
        }
        finish(w)
    }

    pub fn from_csv(text: &str, confidence: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        if rdr.headers()?.iter().collect::<Vec<_>>() != SWEEP_HEADER {
            return Err(Error::Config("unexpected sweep table header".into()));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let f = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Config(format!("sweep table column `{}` is not a number", SWEEP_HEADER[i])))
            };
            let est = |i: usize| -> Result<Estimate> { Ok(Estimate { mean: f(i)?, ci: f(i + 1)? }) };
            rows.push(SweepRow {
                density: f(0)?,
                mu_ts: f(1)?,
                w_ts: f(2)?,
                n: rec.get(3).unwrap_or("").parse().map_err(|_| Error::Config("bad `n`".into()))?,
                loss: est(4)?,
                delay: est(6)?,
                ts: est(8)?,
                jitter: est(10)?,
                decodable: est(12)?,
            });
        }
        Ok(Self { confidence, rows })
    }

    /// Rows of one (μ_ts, density) series, in table order.
    pub fn series(&self, mu_ts: f64, density: f64) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.mu_ts == mu_ts && r.density == density).collect()
    }

    /// Distinct (μ_ts, density) pairs in order of first appearance.
    pub fn scenarios(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for r in &self.rows {
            if !out.contains(&(r.mu_ts, r.density)) {
                out.push((r.mu_ts, r.density));
            }
        }
        out
    }
}

/// Recomputes the sweep table from the manifest and per-run result files
/// under `dir`.
pub fn table_from_dir(dir: &Path, confidence: f64) -> Result<SweepTable> {
    // point name, density, mu_ts, w_ts, per-run metric values
    type Group = (String, f64, f64, f64, Vec<[f64; 5]>);
    let manifest = dir.join(MANIFEST_FILE);
    let entries = read_manifest(&manifest)?;
    let mut groups: Vec<Group> = Vec::new();
    for e in &entries {
        let path = dir.join(&e.run).join(RESULT_FILE);
        let m = read_result(&path)?;
        let mut vals = [0.0; 5];
        for (v, key) in vals.iter_mut().zip(METRICS) {
            *v = *m.get(key).ok_or_else(|| Error::Data { path: path.clone(), reason: format!("missing metric `{key}`") })?;
        }
        match groups.iter_mut().find(|g| g.0 == e.point) {
            Some(g) => g.4.push(vals),
            None => groups.push((e.point.clone(), e.density, e.mu_ts, e.w_ts, vec![vals])),
        }
    }
    let rows = groups
        .into_iter()
        .map(|(_, density, mu_ts, w_ts, runs)| {
            let est = |k: usize| {
                let xs: Vec<f64> = runs.iter().map(|r| r[k]).collect();
                let s = summarize(&xs, confidence);
                Estimate { mean: s.mean, ci: s.half_width }
            };
            SweepRow {
                density,
                mu_ts,
                w_ts,
                n: runs.len(),
                loss: est(0),
                delay: est(1),
                ts: est(2),
                jitter: est(3),
                decodable: est(4),
            }
        })
        .collect();
    Ok(SweepTable { confidence, rows })
}

pub fn loss_figure_name(mu_ts: f64, density: f64) -> String {
    format!("loss_ts_mu{mu_ts}_d{density}.csv")
}

pub fn delay_figure_name(mu_ts: f64, density: f64) -> String {
    format!("delay_mu{mu_ts}_d{density}.csv")
}

/// Writes two files per (μ_ts, density) under `out/figures/`: loss with tie
/// strength, and delay, each one row per w_ts.
pub fn write_figures(table: &SweepTable, out: &Path) -> Result<()> {
    let dir = out.join("figures");
    for (mu, d) in table.scenarios() {
        let rows = table.series(mu, d);
        let mut w = writer();
        w.write_record(["w_ts", "loss_mean", "loss_ci", "ts_mean", "ts_ci"])?;
        for r in &rows {
            w.write_record([r.w_ts, r.loss.mean, r.loss.ci, r.ts.mean, r.ts.ci].map(|x| x.to_string()))?;
        }
        write_file(&dir.join(loss_figure_name(mu, d)), &finish(w)?)?;
        let mut w = writer();
        w.write_record(["w_ts", "delay_mean", "delay_ci"])?;
        for r in &rows {
            w.write_record([r.w_ts, r.delay.mean, r.delay.ci].map(|x| x.to_string()))?;
        }
        write_file(&dir.join(delay_figure_name(mu, d)), &finish(w)?)?;
    }
    Ok(())
}

/// Rebuilds the table from the runs under `input` and writes `sweep.csv` and
/// the figure files under `out`. The confidence level comes from the grid
/// stored with the runs, 90% when there is none.
pub fn report(input: &Path, out: &Path) -> Result<SweepTable> {
    let grid = input.join(GRID_FILE);
    let confidence = if grid.exists() { GridSpec::from_toml(&read_file(&grid)?)?.confidence } else { 0.9 };
    let table = table_from_dir(input, confidence)?;
    write_file(&out.join(SWEEP_FILE), &table.to_csv()?)?;
    write_figures(&table, out)?;
    Ok(table)
}

/// Reads a figure file back as rows of numbers.
pub fn read_figure(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = read_file(path)?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row: Option<Vec<f64>> = rec.iter().map(|s| s.parse().ok()).collect();
        rows.push(row.ok_or_else(|| Error::Data { path: path.to_path_buf(), reason: "non-numeric cell".into() })?);
    }
    Ok((header, rows))
}
