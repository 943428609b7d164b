//! Single runs and parameter sweeps.
//!
//! A sweep runs every (density, μ_ts, w_ts) point of a grid for a number of
//! repetitions. The seed of repetition `r` depends on the master seed, the
//! density, μ_ts and `r`, but not on w_ts: every weight at a given scenario is
//! evaluated on the same mobility, tie strengths and traffic, so differences
//! between weights are not masked by scenario noise. Adding grid points never
//! changes the seeds of existing ones.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qsmvm_core::{RunResult, Simulator};

use crate::output::{self, ManifestEntry, MANIFEST_FILE};
use crate::report;
use crate::{read_file, write_file, Error, Result, Scenario};

pub use crate::report::SweepTable;

pub const GRID_FILE: &str = "grid.toml";
pub const CONFIG_FILE: &str = "config.toml";
pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub w_ts: Vec<f64>,
    pub mu_ts: Vec<f64>,
    pub density: Vec<f64>,
    pub reps: usize,
    pub confidence: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            w_ts: vec![0.0, 0.125, 0.2, 0.4, 0.6, 0.8, 1.0],
            mu_ts: vec![1.0, 2.0, 3.0, 4.0],
            density: vec![100.0, 200.0],
            reps: 5,
            confidence: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub density: f64,
    pub mu_ts: f64,
    pub w_ts: f64,
}

impl Point {
    pub fn name(&self) -> String {
        format!("d{}_mu{}_w{}", self.density, self.mu_ts, self.w_ts)
    }
}

impl GridSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Grid(e.to_string().trim_end().to_string()))?;
        let g: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Grid(format!("key `{path}`: {}", e.into_inner().to_string().trim_end()))
        })?;
        g.validate()?;
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_file(path)?).map_err(|e| match e {
            Error::Grid(msg) => Error::Grid(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Grid(m.to_string()));
        if self.w_ts.is_empty() || self.mu_ts.is_empty() || self.density.is_empty() {
            return fail("every axis needs at least one value");
        }
        if self.w_ts.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return fail("w_ts values must lie in [0, 1]");
        }
        if self.mu_ts.iter().any(|m| !m.is_finite()) {
            return fail("mu_ts values must be finite");
        }
        if self.density.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return fail("density values must be positive");
        }
        if self.reps < 2 {
            return fail("reps must be at least 2 for confidence intervals");
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return fail("confidence must lie in (0, 1)");
        }
        Ok(())
    }

    /// Grid points, density-major then μ_ts then w_ts.
    pub fn points(&self) -> Vec<Point> {
        let mut out = Vec::new();
        for &density in &self.density {
            for &mu_ts in &self.mu_ts {
                for &w_ts in &self.w_ts {
                    out.push(Point { density, mu_ts, w_ts });
                }
            }
        }
        out
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("grid serialises")
    }
}

/// Seed of repetition `rep` at scenario (`density`, `mu_ts`).
pub fn derive_seed(master_seed: u64, density: f64, mu_ts: f64, rep: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(b"qsmvm-sweep-seed");
    h.update(master_seed.to_le_bytes());
    h.update(density.to_bits().to_le_bytes());
    h.update(mu_ts.to_bits().to_le_bytes());
    h.update((rep as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

pub fn run_once(scenario: &Scenario) -> Result<RunResult> {
    Ok(Simulator::new(scenario.run_config()?)?.run()?)
}

/// Runs one scenario and, with `out`, writes its result, protocol log,
/// resolved configuration and manifest there.
pub fn simulate(scenario: &Scenario, out: Option<&Path>) -> Result<RunResult> {
    let result = run_once(scenario)?;
    if let Some(dir) = out {
        output::write_run(dir, &result)?;
        write_file(&dir.join(CONFIG_FILE), scenario.file.to_toml().as_bytes())?;
        let f = &scenario.file;
        let entry = ManifestEntry {
            run: ".".into(),
            point: "single".into(),
            density: f.area.density,
            mu_ts: f.ts.mu_ts,
            w_ts: f.w_ts,
            rep: 0,
            seed: f.master_seed,
            config_hash: scenario.config_hash(),
        };
        write_file(&dir.join(MANIFEST_FILE), &output::manifest_csv(&[entry])?)?;
    }
    Ok(result)
}

struct Job {
    entry: ManifestEntry,
    scenario: Scenario,
}

/// Runs the grid in parallel and writes `runs/<point>/<seed>/`, the manifest,
/// the aggregated `sweep.csv` and the figure tables under `out`.
pub fn run_sweep(base: &Scenario, grid: &GridSpec, out: &Path) -> Result<SweepTable> {
    grid.validate()?;
    let f = &base.file;
    if f.mobility_trace.is_some() || f.ts_matrix.is_some() || f.ts_ledger.is_some() {
        return Err(Error::Grid(
            "a sweep varies density and mu_ts, so the base config cannot fix a mobility trace or tie-strength matrix".into(),
        ));
    }
    let mut jobs = Vec::new();
    for p in grid.points() {
        for rep in 0..grid.reps {
            let seed = derive_seed(f.master_seed, p.density, p.mu_ts, rep);
            let scenario = base.at_point(p.density, p.mu_ts, p.w_ts, seed)?;
            let run: PathBuf = ["runs", &p.name(), &seed.to_string()].iter().collect();
            let entry = ManifestEntry {
                run: run.to_string_lossy().replace('\\', "/"),
                point: p.name(),
                density: p.density,
                mu_ts: p.mu_ts,
                w_ts: p.w_ts,
                rep,
                seed,
                config_hash: scenario.config_hash(),
            };
            jobs.push(Job { entry, scenario });
        }
    }
    let results: Vec<RunResult> = jobs.par_iter().map(|j| run_once(&j.scenario)).collect::<Result<_>>()?;
    for (job, result) in jobs.iter().zip(&results) {
        output::write_run(&out.join(&job.entry.run), result)?;
    }
    let entries: Vec<ManifestEntry> = jobs.into_iter().map(|j| j.entry).collect();
    write_file(&out.join(MANIFEST_FILE), &output::manifest_csv(&entries)?)?;
    write_file(&out.join(GRID_FILE), grid.to_toml().as_bytes())?;
    write_file(&out.join(CONFIG_FILE), base.file.to_toml().as_bytes())?;
    let table = report::table_from_dir(out, grid.confidence)?;
    write_file(&out.join(SWEEP_FILE), &table.to_csv()?)?;
    report::write_figures(&table, out)?;
    Ok(table)
}
