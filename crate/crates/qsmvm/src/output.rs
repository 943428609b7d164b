//! Per-run output files.
//!
//! `result.csv` is a two-column `metric,value` table; `protocol_log.csv` has
//! one row per monitoring iteration. Floats use the shortest representation
//! that parses back to the same value, so files re-read exactly.

use std::collections::BTreeMap;
use std::path::Path;

use qsmvm_core::mac::AccessCategory;
use qsmvm_core::network::{ClassCounters, FlowResult, ProtocolRecord};
use qsmvm_core::packet::{DropCause, PacketClass};
use qsmvm_core::RunResult;

use crate::{read_file, write_file, Error, Result};

pub const RESULT_FILE: &str = "result.csv";
pub const PROTOCOL_LOG_FILE: &str = "protocol_log.csv";
pub const MANIFEST_FILE: &str = "manifest.csv";

pub const PROTOCOL_LOG_HEADER: [&str; 11] =
    ["flow", "i", "time", "t_routing", "nstate", "discovered", "usable", "filtered", "path", "mscore", "mean_ts"];

fn counters(out: &mut Vec<(String, String)>, prefix: &str, c: &ClassCounters) {
    out.push((format!("{prefix}.generated"), c.generated.to_string()));
    out.push((format!("{prefix}.delivered"), c.delivered.to_string()));
    out.push((format!("{prefix}.dropped"), c.total_dropped().to_string()));
    out.push((format!("{prefix}.pending"), c.pending.to_string()));
}

fn flow(out: &mut Vec<(String, String)>, prefix: &str, f: &FlowResult) {
    out.push((format!("{prefix}.src"), f.src.to_string()));
    out.push((format!("{prefix}.dst"), f.dst.to_string()));
    counters(out, prefix, &f.counters);
    for cause in DropCause::ALL {
        out.push((format!("{prefix}.drops.{}", cause.name()), f.counters.dropped[cause.index()].to_string()));
    }
    out.push((format!("{prefix}.loss"), f.loss.to_string()));
    out.push((format!("{prefix}.mean_delay"), f.mean_delay.to_string()));
    out.push((format!("{prefix}.mean_jitter"), f.mean_jitter.to_string()));
    out.push((format!("{prefix}.decodable_gops"), f.decodable_gops.to_string()));
    out.push((format!("{prefix}.mean_hops"), f.mean_hops.to_string()));
}

/// Rows of `result.csv` in file order. The first rows are the run-level
/// figures a sweep aggregates.
pub fn result_rows(r: &RunResult) -> Vec<(String, String)> {
    let mut out = vec![
        ("loss".to_string(), r.loss().to_string()),
        ("mean_delay".to_string(), r.mean_delay().to_string()),
        ("mean_jitter".to_string(), r.mean_jitter().to_string()),
        ("decodable_gops".to_string(), r.decodable_gops().to_string()),
        ("mean_ts".to_string(), r.mean_ts.to_string()),
        ("route_coverage".to_string(), r.route_coverage.to_string()),
        ("iterations".to_string(), r.iterations.to_string()),
        ("mean_t_routing".to_string(), r.mean_t_routing.to_string()),
        ("route_switches".to_string(), r.route_switches.to_string()),
        ("beacons".to_string(), r.beacons.to_string()),
        ("events".to_string(), r.events.to_string()),
        ("end_time".to_string(), r.end_time.to_string()),
    ];
    let drops = r.drops_by_cause();
    for cause in DropCause::ALL {
        out.push((format!("drops.{}", cause.name()), drops[cause.index()].to_string()));
    }
    for ac in AccessCategory::ALL {
        out.push((format!("drop_rate.{}", ac.name()), r.drop_rate(ac).to_string()));
    }
    for class in PacketClass::ALL {
        counters(&mut out, &format!("class.{}", class.name()), &r.classes[class.index()]);
    }
    for (k, f) in r.video.iter().enumerate() {
        flow(&mut out, &format!("video{k}"), f);
    }
    for (k, f) in r.cbr.iter().enumerate() {
        flow(&mut out, &format!("cbr{k}"), f);
    }
    out
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Config(e.to_string()))
}

pub fn result_csv(r: &RunResult) -> Result<Vec<u8>> {
    csv_bytes(&["metric", "value"], result_rows(r).into_iter().map(|(k, v)| vec![k, v]))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Path as node ids joined by `-`; empty when no path was selected.
pub fn path_text(rec: &ProtocolRecord) -> String {
    rec.path
        .as_ref()
        .map(|p| p.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("-"))
        .unwrap_or_default()
}

pub fn protocol_log_csv(log: &[ProtocolRecord]) -> Result<Vec<u8>> {
    csv_bytes(
        &PROTOCOL_LOG_HEADER,
        log.iter().map(|r| {
            vec![
                r.flow.to_string(),
                r.iteration.to_string(),
                r.time.to_string(),
                r.t_routing.to_string(),
                r.nstate.to_string(),
                r.discovered.to_string(),
                r.usable.to_string(),
                r.filtered.to_string(),
                path_text(r),
                opt(r.mscore),
                opt(r.mean_ts),
            ]
        }),
    )
}

/// Writes `result.csv` and `protocol_log.csv` into `dir`.
pub fn write_run(dir: &Path, r: &RunResult) -> Result<()> {
    write_file(&dir.join(RESULT_FILE), &result_csv(r)?)?;
    write_file(&dir.join(PROTOCOL_LOG_FILE), &protocol_log_csv(&r.protocol_log)?)
}

/// Reads the numeric metrics of a `result.csv`.
pub fn read_result(path: &Path) -> Result<BTreeMap<String, f64>> {
    let text = read_file(path)?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let (Some(k), Some(v)) = (rec.get(0), rec.get(1)) else {
            return Err(Error::Data { path: path.to_path_buf(), reason: "short row".into() });
        };
        let v: f64 = v
            .parse()
            .map_err(|_| Error::Data { path: path.to_path_buf(), reason: format!("metric `{k}` is not a number") })?;
        out.insert(k.to_string(), v);
    }
    Ok(out)
}

/// One line of a manifest.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ManifestEntry {
    /// Run directory relative to the manifest.
    pub run: String,
    pub point: String,
    pub density: f64,
    pub mu_ts: f64,
    pub w_ts: f64,
    pub rep: usize,
    pub seed: u64,
    pub config_hash: String,
}

pub fn manifest_csv(entries: &[ManifestEntry]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for e in entries {
        w.serialize(e)?;
    }
    if entries.is_empty() {
        w.write_record(["run", "point", "density", "mu_ts", "w_ts", "rep", "seed", "config_hash"])?;
    }
    w.into_inner().map_err(|e| Error::Config(e.to_string()))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = read_file(path)?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}
