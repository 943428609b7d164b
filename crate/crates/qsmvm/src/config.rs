//! Run configuration files.
//!
//! A configuration is a TOML document. Every key is optional and defaults to
//! the medium-density reference scenario; unknown and duplicate keys are
//! rejected. Errors name the offending key path. File paths are resolved
//! relative to the directory holding the configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qsmvm_core::mac::{ServiceDiscipline, DEFAULT_QUEUE_CAPACITY};
use qsmvm_core::mobility::{AreaSpec, MobilityTrace, WaypointParams};
use qsmvm_core::network::{CbrSpec, ProtocolParams};
use qsmvm_core::phy::RadioSpec;
use qsmvm_core::routing::{CustomerRequest, DiscoveryLimits, ScoreMode};
use qsmvm_core::social::{DecayParams, NormalizationStats, SignType, TieSignWeights, TsMatrix, TsScenarioParams};
use qsmvm_core::video::{parse_pattern, GopModel, TraceFrame};
use qsmvm_core::{NodeId, RunConfig};

use crate::{formats, read_file, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaSection {
    /// metres
    pub width: f64,
    pub height: f64,
    /// Nodes per km²; sets the node count unless `node_count` is given.
    pub density: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_count: Option<usize>,
}

impl Default for AreaSection {
    fn default() -> Self {
        Self { width: 520.0, height: 520.0, density: 100.0, node_count: None }
    }
}

impl AreaSection {
    pub fn spec(&self) -> AreaSpec {
        let mut a = AreaSpec::with_density(self.width, self.height, self.density);
        if let Some(n) = self.node_count {
            a.node_count = n;
        }
        a
    }
}

/// Transmit power is not configurable: it is derived so that the SNR at
/// `tx_range` sits exactly on `snr_threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioSection {
    pub tx_range: f64,
    pub noise_floor: f64,
    pub path_loss_exponent: f64,
    pub reference_loss: f64,
    pub nominal_bitrate: f64,
    pub snr_threshold: f64,
    pub max_corruption: f64,
    pub corruption_span_db: f64,
}

impl Default for RadioSection {
    fn default() -> Self {
        let r = RadioSpec::default();
        Self {
            tx_range: r.tx_range,
            noise_floor: r.noise_floor,
            path_loss_exponent: r.path_loss_exponent,
            reference_loss: r.reference_loss,
            nominal_bitrate: r.nominal_bitrate,
            snr_threshold: r.snr_threshold,
            max_corruption: r.max_corruption,
            corruption_span_db: r.corruption_span_db,
        }
    }
}

impl RadioSection {
    fn spec(&self) -> RadioSpec {
        let mut r = RadioSpec {
            tx_range: self.tx_range,
            tx_power: 0.0,
            noise_floor: self.noise_floor,
            path_loss_exponent: self.path_loss_exponent,
            reference_loss: self.reference_loss,
            nominal_bitrate: self.nominal_bitrate,
            snr_threshold: self.snr_threshold,
            max_corruption: self.max_corruption,
            corruption_span_db: self.corruption_span_db,
        };
        r.recalibrate();
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilitySection {
    /// m/s
    pub max_speed: f64,
    pub min_speed_fraction: f64,
    /// seconds
    pub pause: f64,
}

impl Default for MobilitySection {
    fn default() -> Self {
        let m = WaypointParams::default();
        Self { max_speed: m.max_speed, min_speed_fraction: m.min_speed_fraction, pause: m.pause }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VideoSection {
    pub flows: usize,
    /// `[[src, dst], ...]`; drawn at random when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoints: Option<Vec<[u32; 2]>>,
    /// metres between drawn endpoints at time 0
    pub min_endpoint_distance: f64,
    pub pattern: String,
    pub fps: f64,
    /// bits/s
    pub target_rate: f64,
    /// I:P:B mean frame-size ratio
    pub size_ratio: [f64; 3],
    pub size_cv: f64,
}

impl Default for VideoSection {
    fn default() -> Self {
        let cfg = RunConfig::default();
        let g = GopModel::default();
        Self {
            flows: cfg.video_flows,
            endpoints: None,
            min_endpoint_distance: cfg.min_endpoint_distance,
            pattern: g.pattern().iter().map(|t| t.as_char()).collect(),
            fps: g.fps,
            target_rate: g.target_rate,
            size_ratio: g.size_ratio,
            size_cv: g.size_cv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CbrSection {
    pub flows: usize,
    /// bits/s
    pub rate: f64,
    /// bytes
    pub packet_size: u32,
}

impl Default for CbrSection {
    fn default() -> Self {
        let c = CbrSpec::default();
        Self { flows: c.flows, rate: c.rate, packet_size: c.packet_size }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RequestSection {
    pub bw_min: f64,
    pub l_max: f64,
    pub d_max: f64,
    pub j_max: f64,
}

impl Default for RequestSection {
    fn default() -> Self {
        let r = CustomerRequest::default();
        Self { bw_min: r.bw_min, l_max: r.l_max, d_max: r.d_max, j_max: r.j_max }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsSection {
    pub mu_ts: f64,
    pub sigma_ts: f64,
    /// Per-second decay applied when the matrix comes from a ledger.
    pub decay_rate: f64,
    /// Ledger evaluation time in epoch seconds; the latest update when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluated_at: Option<f64>,
}

impl Default for TsSection {
    fn default() -> Self {
        let t = RunConfig::default().ts;
        Self { mu_ts: t.mean, sigma_ts: t.std_dev, decay_rate: 0.0, evaluated_at: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoverySection {
    pub ttl: usize,
    pub max_paths: usize,
    pub max_expansions: usize,
}

impl Default for DiscoverySection {
    fn default() -> Self {
        let d = DiscoveryLimits::default();
        Self { ttl: d.ttl, max_paths: d.max_paths, max_expansions: d.max_expansions }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub probe_train: u32,
    pub probe_size: u32,
    pub probe_interval: f64,
    pub probe_window: f64,
    pub probe_timeout: f64,
    pub alpha: f64,
    pub beta: f64,
    pub send_buffer: usize,
    pub rediscovery_holdoff: f64,
    pub route_error_interval: f64,
    pub control_size: u32,
    pub cbr_refresh: f64,
    pub use_alternates: bool,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        let p = ProtocolParams::default();
        Self {
            probe_train: p.probe_train,
            probe_size: p.probe_size,
            probe_interval: p.probe_interval,
            probe_window: p.probe_window,
            probe_timeout: p.probe_timeout,
            alpha: p.alpha,
            beta: p.beta,
            send_buffer: p.send_buffer,
            rediscovery_holdoff: p.rediscovery_holdoff,
            route_error_interval: p.route_error_interval,
            control_size: p.control_size,
            cbr_refresh: p.cbr_refresh,
            use_alternates: p.use_alternates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacSection {
    pub service: ServiceDiscipline,
    /// packets per access category
    pub queue_capacity: usize,
    /// seconds of channel access per frame
    pub overhead: f64,
}

impl Default for MacSection {
    fn default() -> Self {
        Self { service: ServiceDiscipline::Strict, queue_capacity: DEFAULT_QUEUE_CAPACITY, overhead: RunConfig::default().mac_overhead }
    }
}

/// The document as written, with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    /// seconds
    pub duration: f64,
    pub master_seed: u64,
    pub w_ts: f64,
    pub score_mode: ScoreMode,
    /// seconds; 0 disables hello beacons
    pub beacon_period: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mobility_trace: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ts_matrix: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ts_ledger: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub video_trace: Option<PathBuf>,
    pub area: AreaSection,
    pub radio: RadioSection,
    pub mobility: MobilitySection,
    pub video: VideoSection,
    pub cbr: CbrSection,
    pub request: RequestSection,
    pub ts: TsSection,
    pub discovery: DiscoverySection,
    pub protocol: ProtocolSection,
    pub mac: MacSection,
}

impl Default for ConfigFile {
    fn default() -> Self {
        let cfg = RunConfig::default();
        Self {
            duration: cfg.duration,
            master_seed: cfg.master_seed,
            w_ts: cfg.w_ts,
            score_mode: cfg.score_mode,
            beacon_period: cfg.protocol.beacon_period,
            mobility_trace: None,
            ts_matrix: None,
            ts_ledger: None,
            video_trace: None,
            area: AreaSection::default(),
            radio: RadioSection::default(),
            mobility: MobilitySection::default(),
            video: VideoSection::default(),
            cbr: CbrSection::default(),
            request: RequestSection::default(),
            ts: TsSection::default(),
            discovery: DiscoverySection::default(),
            protocol: ProtocolSection::default(),
            mac: MacSection::default(),
        }
    }
}

fn invalid(key: &str, reason: impl Into<String>) -> Error {
    Error::Invalid { key: key.to_string(), reason: reason.into() }
}

fn check(ok: bool, key: &str, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(invalid(key, reason))
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

fn nonneg(v: f64) -> bool {
    v >= 0.0 && v.is_finite()
}

impl ConfigFile {
    /// Parses and validates a document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        let file: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner().to_string();
            let inner = inner.trim_end();
            if path == "." {
                Error::Config(inner.to_string())
            } else {
                Error::Config(format!("key `{path}`: {inner}"))
            }
        })?;
        file.validate()?;
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Range checks with key paths. Cross-field checks on the assembled run
    /// happen again in the simulator.
    pub fn validate(&self) -> Result<()> {
        check(positive(self.duration), "duration", "must be positive")?;
        check((0.0..=1.0).contains(&self.w_ts), "w_ts", "must lie in [0, 1]")?;
        check(nonneg(self.beacon_period), "beacon_period", "must be nonnegative")?;
        check(positive(self.area.width), "area.width", "must be positive")?;
        check(positive(self.area.height), "area.height", "must be positive")?;
        check(positive(self.area.density), "area.density", "must be positive")?;
        if self.mobility_trace.is_none() {
            check(self.area.spec().node_count >= 2, "area", "needs at least two nodes")?;
        }
        let r = &self.radio;
        check(positive(r.tx_range), "radio.tx_range", "must be positive")?;
        check(positive(r.nominal_bitrate), "radio.nominal_bitrate", "must be positive")?;
        check(positive(r.path_loss_exponent), "radio.path_loss_exponent", "must be positive")?;
        check(r.noise_floor.is_finite(), "radio.noise_floor", "must be finite")?;
        check((0.0..=1.0).contains(&r.max_corruption), "radio.max_corruption", "must lie in [0, 1]")?;
        check(positive(r.corruption_span_db), "radio.corruption_span_db", "must be positive")?;
        check(positive(self.mobility.max_speed), "mobility.max_speed", "must be positive")?;
        check(
            (0.0..=1.0).contains(&self.mobility.min_speed_fraction),
            "mobility.min_speed_fraction",
            "must lie in [0, 1]",
        )?;
        check(nonneg(self.mobility.pause), "mobility.pause", "must be nonnegative")?;
        let v = &self.video;
        if let Some(eps) = &v.endpoints {
            check(eps.len() == v.flows, "video.endpoints", "needs one pair per flow")?;
            check(eps.iter().all(|[s, d]| s != d), "video.endpoints", "source equals destination")?;
        }
        check(nonneg(v.min_endpoint_distance), "video.min_endpoint_distance", "must be nonnegative")?;
        parse_pattern(&v.pattern).ok_or_else(|| invalid("video.pattern", "expects a sequence of I, P and B"))?;
        check(positive(v.fps), "video.fps", "must be positive")?;
        check(positive(v.target_rate), "video.target_rate", "must be positive")?;
        check(v.size_ratio.iter().all(|x| positive(*x)), "video.size_ratio", "entries must be positive")?;
        check(nonneg(v.size_cv), "video.size_cv", "must be nonnegative")?;
        if self.cbr.flows > 0 {
            check(positive(self.cbr.rate), "cbr.rate", "must be positive")?;
            check(self.cbr.packet_size > 0, "cbr.packet_size", "must be positive")?;
        }
        let q = &self.request;
        check(nonneg(q.bw_min), "request.bw_min", "must be nonnegative")?;
        check((0.0..=1.0).contains(&q.l_max), "request.l_max", "must lie in [0, 1]")?;
        check(positive(q.d_max), "request.d_max", "must be positive")?;
        check(positive(q.j_max), "request.j_max", "must be positive")?;
        check(self.ts.mu_ts.is_finite(), "ts.mu_ts", "must be finite")?;
        check(positive(self.ts.sigma_ts), "ts.sigma_ts", "must be positive")?;
        check(nonneg(self.ts.decay_rate), "ts.decay_rate", "must be nonnegative")?;
        check(!(self.ts_matrix.is_some() && self.ts_ledger.is_some()), "ts_ledger", "conflicts with ts_matrix")?;
        check(self.discovery.ttl > 0, "discovery.ttl", "must be positive")?;
        check(self.discovery.max_paths > 0, "discovery.max_paths", "must be positive")?;
        let p = &self.protocol;
        check(p.probe_train > 0, "protocol.probe_train", "must be positive")?;
        check(p.probe_size > 0, "protocol.probe_size", "must be positive")?;
        check(p.control_size > 0, "protocol.control_size", "must be positive")?;
        check(nonneg(p.probe_interval), "protocol.probe_interval", "must be nonnegative")?;
        check(nonneg(p.probe_window), "protocol.probe_window", "must be nonnegative")?;
        check(positive(p.probe_timeout), "protocol.probe_timeout", "must be positive")?;
        check(nonneg(p.alpha), "protocol.alpha", "must be nonnegative")?;
        check(positive(p.beta), "protocol.beta", "must be positive")?;
        check(positive(p.rediscovery_holdoff), "protocol.rediscovery_holdoff", "must be positive")?;
        check(nonneg(p.route_error_interval), "protocol.route_error_interval", "must be nonnegative")?;
        check(positive(p.cbr_refresh), "protocol.cbr_refresh", "must be positive")?;
        check(self.mac.queue_capacity > 0, "mac.queue_capacity", "must be positive")?;
        check(nonneg(self.mac.overhead), "mac.overhead", "must be nonnegative")?;
        Ok(())
    }
}

/// Command-line replacements applied on top of a file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub master_seed: Option<u64>,
    pub mobility_trace: Option<PathBuf>,
    pub ts_matrix: Option<PathBuf>,
    pub ts_ledger: Option<PathBuf>,
    pub video_trace: Option<PathBuf>,
    pub mac_service: Option<ServiceDiscipline>,
}

/// External inputs named by a configuration, read once.
#[derive(Debug, Clone, Default, PartialEq)]
struct Inputs {
    mobility: Option<MobilityTrace>,
    ts_matrix: Option<TsMatrix>,
    video: Option<Vec<TraceFrame>>,
    /// (role, SHA-256 of the file bytes)
    digests: Vec<(&'static str, [u8; 32])>,
}

/// A validated configuration plus the external files it references.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ConfigFile,
    inputs: Inputs,
}

fn absolute(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_input(path: &Path, role: &'static str, digests: &mut Vec<(&'static str, [u8; 32])>) -> Result<String> {
    let text = read_file(path)?;
    digests.push((role, Sha256::digest(text.as_bytes()).into()));
    Ok(text)
}

fn format_err(path: &Path) -> impl FnOnce(formats::FormatError) -> Error + '_ {
    move |source| Error::Format { path: path.to_path_buf(), source }
}

impl Scenario {
    /// Reads `path` and every file it references, with `overrides` applied.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = read_file(path)?;
        let mut file = ConfigFile::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut file.mobility_trace, &mut file.ts_matrix, &mut file.ts_ledger, &mut file.video_trace]
            .into_iter()
            .flatten()
        {
            *p = absolute(base, p);
        }
        Self::from_file(file, overrides)
    }

    /// Builds a scenario from an in-memory document whose file paths are
    /// absolute or relative to the working directory.
    pub fn from_file(mut file: ConfigFile, overrides: &Overrides) -> Result<Self> {
        if let Some(seed) = overrides.master_seed {
            file.master_seed = seed;
        }
        if let Some(p) = &overrides.mobility_trace {
            file.mobility_trace = Some(p.clone());
        }
        if let Some(p) = &overrides.ts_matrix {
            file.ts_matrix = Some(p.clone());
            file.ts_ledger = None;
        }
        if let Some(p) = &overrides.ts_ledger {
            file.ts_ledger = Some(p.clone());
            file.ts_matrix = None;
        }
        if let Some(p) = &overrides.video_trace {
            file.video_trace = Some(p.clone());
        }
        if let Some(s) = overrides.mac_service {
            file.mac.service = s;
        }
        file.validate()?;
        let inputs = Self::read_inputs(&file)?;
        let scenario = Self { file, inputs };
        scenario.run_config()?;
        Ok(scenario)
    }

    fn read_inputs(file: &ConfigFile) -> Result<Inputs> {
        let mut inputs = Inputs::default();
        let area = file.area.spec();
        if let Some(p) = &file.mobility_trace {
            let text = read_input(p, "mobility_trace", &mut inputs.digests)?;
            inputs.mobility = Some(formats::parse_trace(&text, area).map_err(format_err(p))?);
        }
        let n = inputs.mobility.as_ref().map_or(area.node_count, MobilityTrace::node_count);
        if let Some(p) = &file.ts_matrix {
            let text = read_input(p, "ts_matrix", &mut inputs.digests)?;
            inputs.ts_matrix = Some(formats::parse_ts_matrix(&text).map_err(format_err(p))?);
        }
        if let Some(p) = &file.ts_ledger {
            let text = read_input(p, "ts_ledger", &mut inputs.digests)?;
            let ledger = formats::parse_ledger(&text).map_err(format_err(p))?;
            let active: Vec<SignType> =
                SignType::all().filter(|s| ledger.pairs().any(|(u, v)| ledger.get(u, v, *s).is_some())).collect();
            let ledger_ref = &ledger;
            let latest = ledger
                .pairs()
                .flat_map(|(u, v)| SignType::all().filter_map(move |s| ledger_ref.get(u, v, s)))
                .map(|r| r.last_update)
                .fold(f64::NEG_INFINITY, f64::max);
            let weights = TieSignWeights::from_tags(active);
            let stats = NormalizationStats::from_ledger(&ledger);
            let at = (file.ts.decay_rate > 0.0)
                .then(|| (file.ts.evaluated_at.unwrap_or(latest), DecayParams { rate: file.ts.decay_rate }));
            inputs.ts_matrix = Some(TsMatrix::from_ledger(n, &ledger, &weights, &stats, at));
        }
        if let Some(p) = &file.video_trace {
            let text = read_input(p, "video_trace", &mut inputs.digests)?;
            inputs.video = Some(formats::parse_video_trace(&text).map_err(format_err(p))?);
        }
        Ok(inputs)
    }

    /// The simulator configuration.
    pub fn run_config(&self) -> Result<RunConfig> {
        let f = &self.file;
        let v = &f.video;
        let gop = GopModel::new(
            parse_pattern(&v.pattern).ok_or_else(|| invalid("video.pattern", "expects a sequence of I, P and B"))?,
            v.fps,
            v.target_rate,
            v.size_ratio,
            v.size_cv,
        )
        .map_err(|e| invalid("video", e.to_string()))?;
        let p = &f.protocol;
        let cfg = RunConfig {
            area: f.area.spec(),
            radio: f.radio.spec(),
            mobility: WaypointParams {
                max_speed: f.mobility.max_speed,
                min_speed_fraction: f.mobility.min_speed_fraction,
                pause: f.mobility.pause,
            },
            gop,
            cbr: CbrSpec { flows: f.cbr.flows, rate: f.cbr.rate, packet_size: f.cbr.packet_size },
            video_flows: v.flows,
            video_endpoints: v
                .endpoints
                .as_ref()
                .map(|e| e.iter().map(|[s, d]| (NodeId(*s), NodeId(*d))).collect()),
            min_endpoint_distance: v.min_endpoint_distance,
            request: CustomerRequest {
                bw_min: f.request.bw_min,
                l_max: f.request.l_max,
                d_max: f.request.d_max,
                j_max: f.request.j_max,
            },
            w_ts: f.w_ts,
            score_mode: f.score_mode,
            ts: TsScenarioParams { mean: f.ts.mu_ts, std_dev: f.ts.sigma_ts },
            discovery: DiscoveryLimits {
                ttl: f.discovery.ttl,
                max_paths: f.discovery.max_paths,
                max_expansions: f.discovery.max_expansions,
            },
            protocol: ProtocolParams {
                beacon_period: f.beacon_period,
                probe_train: p.probe_train,
                probe_size: p.probe_size,
                probe_interval: p.probe_interval,
                probe_window: p.probe_window,
                probe_timeout: p.probe_timeout,
                alpha: p.alpha,
                beta: p.beta,
                send_buffer: p.send_buffer,
                rediscovery_holdoff: p.rediscovery_holdoff,
                route_error_interval: p.route_error_interval,
                control_size: p.control_size,
                cbr_refresh: p.cbr_refresh,
                use_alternates: p.use_alternates,
            },
            queue_capacity: f.mac.queue_capacity,
            mac_service: f.mac.service,
            mac_overhead: f.mac.overhead,
            duration: f.duration,
            master_seed: f.master_seed,
            mobility_trace: self.inputs.mobility.clone(),
            ts_matrix: self.inputs.ts_matrix.clone(),
            video_trace: self.inputs.video.clone(),
        };
        cfg.validate().map_err(|e| match e {
            qsmvm_core::Error::InvalidParameter(key) => invalid(key, "rejected by the simulator"),
            other => Error::Sim(other),
        })?;
        Ok(cfg)
    }

    /// The same scenario at another sweep point.
    pub fn at_point(&self, density: f64, mu_ts: f64, w_ts: f64, master_seed: u64) -> Result<Self> {
        let mut s = self.clone();
        s.file.area.density = density;
        s.file.area.node_count = None;
        s.file.ts.mu_ts = mu_ts;
        s.file.w_ts = w_ts;
        s.file.master_seed = master_seed;
        s.file.validate()?;
        Ok(s)
    }

    /// SHA-256 over the resolved document (file locations stripped) and the
    /// bytes of every referenced file, as lowercase hex.
    pub fn config_hash(&self) -> String {
        let mut doc = self.file.clone();
        for p in [&mut doc.mobility_trace, &mut doc.ts_matrix, &mut doc.ts_ledger, &mut doc.video_trace]
            .into_iter()
            .flatten()
        {
            *p = PathBuf::from("-");
        }
        let mut h = Sha256::new();
        h.update(doc.to_toml().as_bytes());
        for (role, digest) in &self.inputs.digests {
            h.update(role.as_bytes());
            h.update(digest);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
