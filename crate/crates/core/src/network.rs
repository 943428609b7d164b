//! The packet-level network simulator.
//!
//! Every node owns a half-duplex radio and four priority queues. Video flows
//! run the multipath monitoring protocol: each iteration discovers candidate
//! routes, probes them with trains of signaling packets, ranks them by score
//! and sends video along the winner until the next iteration. A route error
//! from a relay moves the source to the next ranked route, or buffers video
//! until rediscovery when none is left. Interfering CBR flows follow the
//! current shortest-hop route.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;

use rand::Rng;

use crate::mac::{AccessCategory, Enqueue, MacQueues, ServiceDiscipline, DEFAULT_QUEUE_CAPACITY};
use crate::mobility::{generate_waypoint_trace, AreaSpec, MobilityTrace, Position, WaypointParams};
use crate::packet::{DropCause, Packet, PacketClass, Payload, ProbeReport, ProbeSamples, Route};
use crate::phy::{RadioSpec, Topology};
use crate::routing::{
    discover_paths, mscore, qualify, rank_candidates, Candidate, CustomerRequest, DiscoveryLimits,
    NeighborTable, ProbeCollector, QualificationScale, RawMetrics, ScoreMode, ScoringWeights, SelfConfig,
};
use crate::sim::{EventHandle, EventQueue, RngStreams, Seconds, Stream};
use crate::social::{generate_ts_matrix, path_mean_ts, TsMatrix, TsScenarioParams};
use crate::video::{packetize, CbrSource, GopLedger, GopModel, TraceFrame, VideoSource};
use crate::{Error, NodeId};

const PROPAGATION_SPEED: f64 = 299_792_458.0;

/// Protocol timers and packet sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    /// Hello period; 0 disables beacons.
    pub beacon_period: Seconds,
    /// Probe messages per path per iteration.
    pub probe_train: u32,
    pub probe_size: u32,
    /// Spacing between consecutive probes of a train.
    pub probe_interval: Seconds,
    /// How long a destination collects probes after the first one arrives.
    pub probe_window: Seconds,
    /// How long a source waits for probe replies.
    pub probe_timeout: Seconds,
    pub alpha: f64,
    pub beta: Seconds,
    /// Source-side buffer for video generated while no route is known.
    pub send_buffer: usize,
    /// Delay before rediscovery once every ranked route has failed.
    pub rediscovery_holdoff: Seconds,
    /// Minimum spacing of route errors a relay sends for one link.
    pub route_error_interval: Seconds,
    pub control_size: u32,
    /// Shortest-hop route refresh period of CBR flows.
    pub cbr_refresh: Seconds,
    /// On a route error, fall back to the next ranked route of the current
    /// iteration instead of waiting for rediscovery.
    pub use_alternates: bool,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            beacon_period: 1.0,
            probe_train: 10,
            probe_size: 64,
            probe_interval: 0.02,
            probe_window: 0.3,
            probe_timeout: 1.0,
            alpha: 10.0,
            beta: 3.0,
            send_buffer: 64,
            rediscovery_holdoff: 6.0,
            route_error_interval: 1.0,
            control_size: 64,
            cbr_refresh: 3.0,
            use_alternates: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbrSpec {
    pub flows: usize,
    pub rate: f64,
    pub packet_size: u32,
}

impl Default for CbrSpec {
    fn default() -> Self {
        Self { flows: 1, rate: 300_000.0, packet_size: 1500 }
    }
}

/// Everything a run needs. `Default` is the medium-density scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub area: AreaSpec,
    pub radio: RadioSpec,
    pub mobility: WaypointParams,
    pub gop: GopModel,
    pub cbr: CbrSpec,
    pub video_flows: usize,
    /// Fixed video endpoints; drawn at random when `None`.
    pub video_endpoints: Option<Vec<(NodeId, NodeId)>>,
    /// Minimum distance between drawn video endpoints at time 0, metres.
    pub min_endpoint_distance: f64,
    pub request: CustomerRequest,
    pub w_ts: f64,
    pub score_mode: ScoreMode,
    pub ts: TsScenarioParams,
    pub discovery: DiscoveryLimits,
    pub protocol: ProtocolParams,
    pub queue_capacity: usize,
    pub mac_service: ServiceDiscipline,
    /// Fixed channel-access time per frame (interframe spaces, backoff,
    /// preamble, acknowledgement), stretched by the load factor like the payload.
    pub mac_overhead: Seconds,
    pub duration: Seconds,
    pub master_seed: u64,
    /// Replaces the generated random-waypoint trace.
    pub mobility_trace: Option<MobilityTrace>,
    /// Replaces the generated tie-strength matrix.
    pub ts_matrix: Option<TsMatrix>,
    /// Replaces synthesised frame sizes.
    pub video_trace: Option<Vec<TraceFrame>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            area: AreaSpec::with_density(520.0, 520.0, 100.0),
            radio: RadioSpec::default(),
            mobility: WaypointParams::default(),
            gop: GopModel::default(),
            cbr: CbrSpec::default(),
            video_flows: 2,
            video_endpoints: None,
            min_endpoint_distance: 120.0,
            request: CustomerRequest::default(),
            w_ts: 0.125,
            score_mode: ScoreMode::Normalized,
            ts: TsScenarioParams { mean: 3.0, std_dev: 1.0 },
            discovery: DiscoveryLimits::default(),
            protocol: ProtocolParams::default(),
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            mac_service: ServiceDiscipline::Strict,
            mac_overhead: 0.000_87,
            duration: 200.0,
            master_seed: 1,
            mobility_trace: None,
            ts_matrix: None,
            video_trace: None,
        }
    }
}

impl RunConfig {
    pub fn node_count(&self) -> usize {
        self.mobility_trace.as_ref().map_or(self.area.node_count, MobilityTrace::node_count)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let n = self.node_count();
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::InvalidParameter("duration"));
        }
        if n < 2 {
            return Err(Error::InvalidParameter("node_count"));
        }
        if !(self.area.width > 0.0 && self.area.height > 0.0) {
            return Err(Error::InvalidParameter("area"));
        }
        self.radio.validate()?;
        self.request.validate()?;
        ScoringWeights::new(self.w_ts)?;
        if let Some(m) = &self.ts_matrix {
            if m.size() != n {
                return Err(Error::InvalidParameter("ts matrix size"));
            }
        } else if !(self.ts.std_dev > 0.0) || !self.ts.mean.is_finite() {
            return Err(Error::InvalidParameter("ts.std_dev"));
        }
        if self.cbr.flows > 0 {
            CbrSource::new(self.cbr.rate, self.cbr.packet_size)?;
        }
        if let Some(eps) = &self.video_endpoints {
            if eps.len() != self.video_flows {
                return Err(Error::InvalidParameter("video_endpoints"));
            }
            if eps.iter().any(|&(s, d)| s == d || s.index() >= n || d.index() >= n) {
                return Err(Error::InvalidParameter("video_endpoints"));
            }
        }
        let p = &self.protocol;
        if p.probe_train == 0 || p.probe_size == 0 || p.control_size == 0 {
            return Err(Error::InvalidParameter("probe_train"));
        }
        let nonneg = [p.beacon_period, p.probe_interval, p.probe_window, p.route_error_interval, p.beta];
        if nonneg.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("protocol timer"));
        }
        let positive = [p.probe_timeout, p.rediscovery_holdoff, p.cbr_refresh];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("protocol timer"));
        }
        if !(p.alpha >= 0.0) || !p.alpha.is_finite() {
            return Err(Error::InvalidParameter("alpha"));
        }
        if !(self.mac_overhead >= 0.0) || !self.mac_overhead.is_finite() {
            return Err(Error::InvalidParameter("mac_overhead"));
        }
        if self.queue_capacity == 0 {
            return Err(Error::InvalidParameter("queue_capacity"));
        }
        if self.discovery.ttl == 0 || self.discovery.max_paths == 0 {
            return Err(Error::InvalidParameter("discovery"));
        }
        if self.mobility_trace.is_none() && !(self.mobility.max_speed > 0.0) {
            return Err(Error::InvalidParameter("max_speed"));
        }
        Ok(())
    }
}

/// Counters of one packet class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounters {
    pub generated: u64,
    pub delivered: u64,
    /// Indexed by [`DropCause::index`].
    pub dropped: [u64; 3],
    /// Still queued, buffered or in flight when the run ended.
    pub pending: u64,
}

impl ClassCounters {
    pub fn total_dropped(&self) -> u64 {
        self.dropped.iter().sum()
    }

    pub fn drop_rate(&self) -> f64 {
        if self.generated == 0 {
            0.0
        } else {
            self.total_dropped() as f64 / self.generated as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub src: NodeId,
    pub dst: NodeId,
    pub counters: ClassCounters,
    /// Dropped over resolved (delivered or dropped) packets.
    pub loss: f64,
    pub mean_delay: Seconds,
    pub mean_jitter: Seconds,
    pub decodable_gops: f64,
    pub mean_hops: f64,
}

/// One monitoring iteration of one video flow.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRecord {
    pub flow: usize,
    pub iteration: u32,
    pub time: Seconds,
    pub t_routing: Seconds,
    pub nstate: f64,
    pub discovered: usize,
    pub usable: usize,
    /// Whether the winner passed the request filter.
    pub filtered: bool,
    pub path: Option<Vec<NodeId>>,
    pub mscore: Option<f64>,
    pub mean_ts: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub video: Vec<FlowResult>,
    pub cbr: Vec<FlowResult>,
    /// Indexed by [`PacketClass::index`].
    pub classes: [ClassCounters; 5],
    /// Time-weighted tie strength of the routes video actually used.
    pub mean_ts: f64,
    /// Fraction of flow-time during which a video route was in use.
    pub route_coverage: f64,
    pub iterations: usize,
    pub mean_t_routing: Seconds,
    pub protocol_log: Vec<ProtocolRecord>,
    pub route_switches: u64,
    pub beacons: u64,
    pub events: u64,
    pub end_time: Seconds,
}

impl RunResult {
    fn video_counters(&self) -> ClassCounters {
        let mut c = ClassCounters::default();
        for f in &self.video {
            c.generated += f.counters.generated;
            c.delivered += f.counters.delivered;
            c.pending += f.counters.pending;
            for k in 0..3 {
                c.dropped[k] += f.counters.dropped[k];
            }
        }
        c
    }

    /// Video loss over all flows: dropped over resolved packets.
    pub fn loss(&self) -> f64 {
        let c = self.video_counters();
        let resolved = c.delivered + c.total_dropped();
        if resolved == 0 {
            0.0
        } else {
            c.total_dropped() as f64 / resolved as f64
        }
    }

    /// Mean end-to-end delay of every delivered video packet.
    pub fn mean_delay(&self) -> Seconds {
        let (sum, n) = self
            .video
            .iter()
            .fold((0.0, 0u64), |(s, n), f| (s + f.mean_delay * f.counters.delivered as f64, n + f.counters.delivered));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    pub fn mean_jitter(&self) -> Seconds {
        if self.video.is_empty() {
            return 0.0;
        }
        self.video.iter().map(|f| f.mean_jitter).sum::<f64>() / self.video.len() as f64
    }

    pub fn decodable_gops(&self) -> f64 {
        if self.video.is_empty() {
            return 1.0;
        }
        self.video.iter().map(|f| f.decodable_gops).sum::<f64>() / self.video.len() as f64
    }

    /// Drops of packets mapped to `ac` over packets generated for it.
    pub fn drop_rate(&self, ac: AccessCategory) -> f64 {
        let (gen, drop) = PacketClass::ALL
            .iter()
            .filter(|c| AccessCategory::from(**c) == ac)
            .fold((0, 0), |(g, d), c| {
                let k = &self.classes[c.index()];
                (g + k.generated, d + k.total_dropped())
            });
        if gen == 0 {
            0.0
        } else {
            drop as f64 / gen as f64
        }
    }

    pub fn drops_by_cause(&self) -> [u64; 3] {
        let mut out = [0; 3];
        for c in &self.classes {
            for (o, d) in out.iter_mut().zip(c.dropped) {
                *o += d;
            }
        }
        out
    }

    /// Selected path of every iteration, per flow, in order.
    pub fn selected_paths(&self) -> Vec<(usize, Option<Vec<NodeId>>)> {
        self.protocol_log.iter().map(|r| (r.flow, r.path.clone())).collect()
    }
}

#[derive(Debug)]
enum Event {
    Beacon(usize),
    VideoFrame(usize),
    Cbr(usize),
    CbrRefresh(usize),
    Iteration(usize),
    ProbeSend { flow: usize, iteration: u32, path: usize, seq: u32 },
    ProbeDeadline { flow: usize, iteration: u32 },
    PmrEmit { flow: usize, iteration: u32, path: usize },
    TxEnd(usize),
    Arrive(usize, Packet),
}

struct InFlight {
    packet: Packet,
    delivered: bool,
    propagation: Seconds,
}

struct Node {
    queues: MacQueues,
    tx: Option<InFlight>,
    neighbors: NeighborTable,
    route_errors: BTreeMap<(usize, NodeId, NodeId), Seconds>,
}

#[derive(Default)]
struct FlowStats {
    counters: ClassCounters,
    delay_sum: f64,
    hop_sum: u64,
    jitter_sum: f64,
    jitter_n: u64,
    last_delay: Option<f64>,
    gops: GopLedger,
}

impl FlowStats {
    fn delivered(&mut self, delay: Seconds, hops: usize) {
        self.counters.delivered += 1;
        self.delay_sum += delay;
        self.hop_sum += hops as u64;
        if let Some(prev) = self.last_delay {
            self.jitter_sum += (delay - prev).abs();
            self.jitter_n += 1;
        }
        self.last_delay = Some(delay);
    }

    fn result(&self, src: NodeId, dst: NodeId) -> FlowResult {
        let c = self.counters;
        let resolved = c.delivered + c.total_dropped();
        let d = c.delivered.max(1) as f64;
        FlowResult {
            src,
            dst,
            counters: c,
            loss: if resolved == 0 { 0.0 } else { c.total_dropped() as f64 / resolved as f64 },
            mean_delay: self.delay_sum / d,
            mean_jitter: if self.jitter_n == 0 { 0.0 } else { self.jitter_sum / self.jitter_n as f64 },
            decodable_gops: self.gops.decodable_fraction(),
            mean_hops: self.hop_sum as f64 / d,
        }
    }
}

struct Probing {
    started: Seconds,
    paths: Vec<Route>,
    reports: Vec<Option<ProbeReport>>,
    outstanding: usize,
    deadline: EventHandle,
}

struct Session {
    src: NodeId,
    dst: NodeId,
    source: VideoSource,
    iteration: u32,
    probing: Option<Probing>,
    ranked: Vec<Candidate>,
    routes: Vec<Route>,
    current: Option<usize>,
    broken: BTreeSet<(NodeId, NodeId)>,
    config: SelfConfig,
    next_iteration: Option<(Seconds, EventHandle)>,
    send_buffer: VecDeque<Packet>,
    // destination side, keyed by (iteration, path)
    collectors: BTreeMap<(u32, usize), ProbeCollector>,
    ts_area: f64,
    ts_time: f64,
    ts_since: Seconds,
    ts_current: Option<f64>,
    stats: FlowStats,
}

impl Session {
    fn route(&self) -> Option<&Route> {
        self.current.map(|k| &self.routes[k])
    }

    fn set_current(&mut self, now: Seconds, current: Option<usize>) {
        self.close_ts(now);
        self.current = current;
        self.ts_current = current.map(|k| self.ranked[k].mean_ts);
    }

    fn close_ts(&mut self, now: Seconds) {
        let dt = now - self.ts_since;
        if let Some(ts) = self.ts_current {
            self.ts_area += ts * dt;
            self.ts_time += dt;
        }
        self.ts_since = now;
    }
}

struct CbrFlow {
    src: NodeId,
    dst: NodeId,
    source: CbrSource,
    route: Option<Route>,
    stats: FlowStats,
}

/// One simulation run. Build with [`Simulator::new`], advance with
/// [`Simulator::run_until`], collect with [`Simulator::finish`].
pub struct Simulator {
    config: RunConfig,
    trace: MobilityTrace,
    ts: TsMatrix,
    weights: ScoringWeights,
    scale: QualificationScale,
    rng: RngStreams,
    events: EventQueue<Event>,
    nodes: Vec<Node>,
    sessions: Vec<Session>,
    cbr: Vec<CbrFlow>,
    classes: [ClassCounters; 5],
    next_packet_id: u64,
    in_air: [u64; 5],
    log: Vec<ProtocolRecord>,
    route_switches: u64,
    beacons: u64,
}

fn contains_link(route: &[NodeId], link: (NodeId, NodeId)) -> bool {
    route.windows(2).any(|w| (w[0], w[1]) == link)
}

fn reversed(route: &[NodeId]) -> Route {
    route.iter().rev().copied().collect::<Vec<_>>().into()
}

impl Simulator {
    pub fn new(config: RunConfig) -> Result<Self, Error> {
        config.validate()?;
        let mut rng = RngStreams::new(config.master_seed);
        let trace = match &config.mobility_trace {
            Some(t) => t.clone().extended_to(config.duration),
            None => generate_waypoint_trace(config.area, config.mobility, config.duration, rng.stream(Stream::Mobility))?,
        };
        let n = trace.node_count();
        let ts = match &config.ts_matrix {
            Some(m) => m.clone(),
            None => generate_ts_matrix(n, config.ts, rng.stream(Stream::Social))?,
        };
        let weights = ScoringWeights::new(config.w_ts)?;
        // an imported trace may move faster than the configured bound
        let trace_speed = trace.max_segment_speed();
        let max_speed = if trace_speed > config.mobility.max_speed * (1.0 + 1e-9) { trace_speed } else { config.mobility.max_speed };
        let scale = QualificationScale::from_request(&config.request, max_speed.max(f64::MIN_POSITIVE));

        let nodes = (0..n)
            .map(|_| Node {
                queues: MacQueues::new(config.queue_capacity, config.mac_service),
                tx: None,
                neighbors: NeighborTable::default(),
                route_errors: BTreeMap::new(),
            })
            .collect();

        let endpoints = match &config.video_endpoints {
            Some(e) => e.clone(),
            None => {
                let start: Vec<Position> = (0..n).map(|i| trace.position_at(NodeId::new(i), 0.0)).collect::<Result<_, _>>()?;
                draw_endpoints(&start, config.video_flows, config.min_endpoint_distance, rng.stream(Stream::Traffic))
            }
        };
        let mut sessions = Vec::with_capacity(endpoints.len());
        for &(src, dst) in &endpoints {
            let mut source = VideoSource::new(config.gop.clone(), 0.0)?;
            if let Some(t) = &config.video_trace {
                source = source.with_trace(t.clone())?;
            }
            sessions.push(Session {
                src,
                dst,
                source,
                iteration: 0,
                probing: None,
                ranked: Vec::new(),
                routes: Vec::new(),
                current: None,
                broken: BTreeSet::new(),
                config: SelfConfig { alpha: config.protocol.alpha, beta: config.protocol.beta, ..SelfConfig::default() },
                next_iteration: None,
                send_buffer: VecDeque::new(),
                collectors: BTreeMap::new(),
                ts_area: 0.0,
                ts_time: 0.0,
                ts_since: 0.0,
                ts_current: None,
                stats: FlowStats::default(),
            });
        }
        let mut cbr = Vec::with_capacity(config.cbr.flows);
        for _ in 0..config.cbr.flows {
            let traffic = rng.stream(Stream::Traffic);
            let src = traffic.random_range(0..n);
            let mut dst = traffic.random_range(0..n - 1);
            if dst >= src {
                dst += 1;
            }
            cbr.push(CbrFlow {
                src: NodeId::new(src),
                dst: NodeId::new(dst),
                source: CbrSource::new(config.cbr.rate, config.cbr.packet_size)?,
                route: None,
                stats: FlowStats::default(),
            });
        }

        let mut sim = Self {
            weights,
            scale,
            rng,
            events: EventQueue::new(),
            nodes,
            sessions,
            cbr,
            classes: [ClassCounters::default(); 5],
            next_packet_id: 0,
            in_air: [0; 5],
            log: Vec::new(),
            route_switches: 0,
            beacons: 0,
            trace,
            ts,
            config,
        };
        sim.schedule_initial()?;
        Ok(sim)
    }

    fn schedule_initial(&mut self) -> Result<(), Error> {
        let period = self.config.protocol.beacon_period;
        if period > 0.0 {
            let n = self.nodes.len();
            for i in 0..n {
                self.events.schedule(period * i as f64 / n as f64, Event::Beacon(i))?;
            }
        }
        for f in 0..self.sessions.len() {
            self.events.schedule(0.0, Event::Iteration(f))?;
            self.events.schedule(0.0, Event::VideoFrame(f))?;
        }
        for f in 0..self.cbr.len() {
            self.events.schedule(0.0, Event::CbrRefresh(f))?;
            self.events.schedule(0.0, Event::Cbr(f))?;
        }
        Ok(())
    }

    pub fn now(&self) -> Seconds {
        self.events.now()
    }

    pub fn trace(&self) -> &MobilityTrace {
        &self.trace
    }

    pub fn ts_matrix(&self) -> &TsMatrix {
        &self.ts
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    /// Video flow endpoints in flow order.
    pub fn video_endpoints(&self) -> Vec<(NodeId, NodeId)> {
        self.sessions.iter().map(|s| (s.src, s.dst)).collect()
    }

    /// Processes every event up to and including `end`; the clock ends at `end`.
    pub fn run_until(&mut self, end: Seconds) -> Result<(), Error> {
        if !(end >= self.now()) || end > self.config.duration + 1e-9 {
            return Err(Error::TimeOutOfRange);
        }
        while let Some((t, ev)) = self.events.pop_until(end) {
            self.handle(t, ev)?;
        }
        self.events.advance_to(end);
        Ok(())
    }

    /// Runs to the configured duration and returns the result.
    pub fn run(mut self) -> Result<RunResult, Error> {
        self.run_until(self.config.duration)?;
        Ok(self.finish())
    }

    pub fn finish(mut self) -> RunResult {
        let now = self.now();
        let mut pending = self.in_air;
        for node in &self.nodes {
            if let Some(f) = &node.tx {
                pending[f.packet.class.index()] += 1;
            }
        }
        for node in &mut self.nodes {
            for p in node.queues.drain() {
                pending[p.class.index()] += 1;
                match p.payload {
                    Payload::Video { flow, .. } => self.sessions[flow].stats.counters.pending += 1,
                    Payload::Cbr { flow } => self.cbr[flow].stats.counters.pending += 1,
                    _ => {}
                }
            }
            if let Some(f) = &node.tx {
                match f.packet.payload {
                    Payload::Video { flow, .. } => self.sessions[flow].stats.counters.pending += 1,
                    Payload::Cbr { flow } => self.cbr[flow].stats.counters.pending += 1,
                    _ => {}
                }
            }
        }
        for s in &mut self.sessions {
            for p in s.send_buffer.drain(..) {
                pending[p.class.index()] += 1;
                s.stats.counters.pending += 1;
            }
            s.close_ts(now);
        }
        let mut classes = self.classes;
        for (c, p) in classes.iter_mut().zip(pending) {
            c.pending = p;
        }
        // in-air packets are attributed to flows through their Arrive events
        let mut q = core::mem::take(&mut self.events);
        let events = q.counters().processed;
        while let Some((_, ev)) = q.pop() {
            if let Event::Arrive(_, p) = ev {
                match p.payload {
                    Payload::Video { flow, .. } => self.sessions[flow].stats.counters.pending += 1,
                    Payload::Cbr { flow } => self.cbr[flow].stats.counters.pending += 1,
                    _ => {}
                }
            }
        }
        let (ts_area, ts_time) = self.sessions.iter().fold((0.0, 0.0), |(a, t), s| (a + s.ts_area, t + s.ts_time));
        let flow_time = now * self.sessions.len() as f64;
        let iterations = self.log.len();
        let mean_t_routing = if iterations == 0 {
            0.0
        } else {
            self.log.iter().map(|r| r.t_routing).sum::<f64>() / iterations as f64
        };
        RunResult {
            video: self.sessions.iter().map(|s| s.stats.result(s.src, s.dst)).collect(),
            cbr: self.cbr.iter().map(|c| c.stats.result(c.src, c.dst)).collect(),
            classes,
            mean_ts: if ts_time > 0.0 { ts_area / ts_time } else { 0.0 },
            route_coverage: if flow_time > 0.0 { ts_time / flow_time } else { 0.0 },
            iterations,
            mean_t_routing,
            protocol_log: self.log,
            route_switches: self.route_switches,
            beacons: self.beacons,
            events,
            end_time: now,
        }
    }

    fn handle(&mut self, now: Seconds, ev: Event) -> Result<(), Error> {
        match ev {
            Event::Beacon(i) => self.on_beacon(now, i),
            Event::VideoFrame(f) => self.on_video_frame(now, f),
            Event::Cbr(f) => self.on_cbr(now, f),
            Event::CbrRefresh(f) => self.on_cbr_refresh(now, f),
            Event::Iteration(f) => self.on_iteration(now, f),
            Event::ProbeSend { flow, iteration, path, seq } => self.on_probe_send(now, flow, iteration, path, seq),
            Event::ProbeDeadline { flow, iteration } => {
                if self.sessions[flow].probing.is_some() && self.sessions[flow].iteration == iteration {
                    self.evaluate(now, flow)
                } else {
                    Ok(())
                }
            }
            Event::PmrEmit { flow, iteration, path } => self.on_pmr_emit(now, flow, iteration, path),
            Event::TxEnd(i) => self.on_tx_end(now, i),
            Event::Arrive(i, p) => {
                self.in_air[p.class.index()] -= 1;
                self.on_arrive(now, i, p)
            }
        }
    }

    fn position(&self, node: NodeId, t: Seconds) -> Position {
        self.trace.position_at(node, t.min(self.trace.end_time())).expect("node and time are in range")
    }

    fn positions(&self, t: Seconds) -> Vec<Position> {
        (0..self.nodes.len()).map(|i| self.position(NodeId::new(i), t)).collect()
    }

    fn topology(&self, t: Seconds) -> Topology {
        Topology::from_positions(&self.positions(t), &self.config.radio)
    }

    fn new_packet(&mut self, class: PacketClass, size: u32, now: Seconds, route: Route, payload: Payload) -> Packet {
        let id = self.next_packet_id;
        self.next_packet_id += 1;
        self.classes[class.index()].generated += 1;
        Packet { id, class, size_bytes: size, created: now, route, hop: 0, payload }
    }

    fn record_drop(&mut self, packet: &Packet, cause: DropCause) {
        self.classes[packet.class.index()].dropped[cause.index()] += 1;
        match packet.payload {
            Payload::Video { flow, .. } => self.sessions[flow].stats.counters.dropped[cause.index()] += 1,
            Payload::Cbr { flow } => self.cbr[flow].stats.counters.dropped[cause.index()] += 1,
            _ => {}
        }
    }

    /// Queues `packet` at `node` and kicks the radio.
    fn enqueue(&mut self, now: Seconds, node: usize, packet: Packet) -> Result<(), Error> {
        if let Enqueue::Overflow(p) = self.nodes[node].queues.enqueue(packet) {
            self.record_drop(&p, DropCause::QueueOverflow);
        }
        self.try_start(now, node)
    }

    fn try_start(&mut self, now: Seconds, node: usize) -> Result<(), Error> {
        if self.nodes[node].tx.is_some() {
            return Ok(());
        }
        while let Some(mut packet) = self.nodes[node].queues.dequeue_next() {
            let Some(next) = packet.next_hop() else {
                // a packet already at its destination never sits in a queue
                self.record_drop(&packet, DropCause::LinkBreak);
                continue;
            };
            let here = NodeId::new(node);
            let pa = self.position(here, now);
            let pb = self.position(next, now);
            let link = self.config.radio.link_state(here, next, pa, pb);
            if !link.usable {
                self.record_drop(&packet, DropCause::LinkBreak);
                self.report_break(now, node, &packet, next)?;
                continue;
            }
            let load = self.load_factor(now, here, next, pb);
            let tx_delay = self.config.radio.transmission_delay(packet.size_bytes, load) + self.config.mac_overhead * load;
            if let Payload::Probe { samples, .. } = &mut packet.payload {
                let (vax, vay) = self.trace.velocity_at(here, now.min(self.trace.end_time()))?;
                let (vbx, vby) = self.trace.velocity_at(next, now.min(self.trace.end_time()))?;
                samples.min_margin_db = samples.min_margin_db.min(link.margin(&self.config.radio));
                samples.min_capacity = samples.min_capacity.min(self.config.radio.nominal_bitrate / load);
                samples.speed_sum += libm::hypot(vax - vbx, vay - vby);
                samples.hops += 1;
            }
            let p = self.config.radio.corruption_probability(link.snr);
            let u: f64 = self.rng.stream(Stream::Channel).random();
            self.nodes[node].tx = Some(InFlight {
                packet,
                delivered: u >= p,
                propagation: link.distance / PROPAGATION_SPEED,
            });
            self.events.schedule(now + tx_delay, Event::TxEnd(node))?;
            return Ok(());
        }
        Ok(())
    }

    /// `1 +` the number of other stations within range of the receiver that
    /// are backlogged or transmitting.
    fn load_factor(&self, now: Seconds, sender: NodeId, receiver: NodeId, at: Position) -> f64 {
        let range = self.config.radio.tx_range;
        let busy = self
            .nodes
            .iter()
            .enumerate()
            .filter(|&(i, n)| {
                i != sender.index()
                    && i != receiver.index()
                    && (n.tx.is_some() || !n.queues.is_empty())
                    && self.position(NodeId::new(i), now).distance(&at) <= range
            })
            .count();
        crate::mac::neighborhood_load(busy)
    }

    fn report_break(&mut self, now: Seconds, node: usize, packet: &Packet, next: NodeId) -> Result<(), Error> {
        let Payload::Video { flow, .. } = packet.payload else {
            return Ok(());
        };
        let here = NodeId::new(node);
        if packet.hop == 0 {
            return self.on_route_error(now, flow, here, next);
        }
        let key = (flow, here, next);
        let interval = self.config.protocol.route_error_interval;
        if let Some(&last) = self.nodes[node].route_errors.get(&key) {
            if now - last < interval {
                return Ok(());
            }
        }
        self.nodes[node].route_errors.insert(key, now);
        let back = reversed(&packet.route[..=packet.hop]);
        let size = self.config.protocol.control_size;
        let rerr = self.new_packet(PacketClass::Signaling, size, now, back, Payload::RouteError { session: flow, from: here, to: next });
        self.enqueue(now, node, rerr)
    }

    fn on_tx_end(&mut self, now: Seconds, node: usize) -> Result<(), Error> {
        let Some(InFlight { mut packet, delivered, propagation }) = self.nodes[node].tx.take() else {
            return Ok(());
        };
        if delivered {
            packet.hop += 1;
            let next = packet.holder().expect("next hop exists").index();
            self.in_air[packet.class.index()] += 1;
            self.events.schedule(now + propagation, Event::Arrive(next, packet))?;
        } else {
            self.record_drop(&packet, DropCause::Corruption);
        }
        self.try_start(now, node)
    }

    fn on_arrive(&mut self, now: Seconds, node: usize, packet: Packet) -> Result<(), Error> {
        if packet.next_hop().is_some() {
            return self.enqueue(now, node, packet);
        }
        self.classes[packet.class.index()].delivered += 1;
        let delay = now - packet.created;
        match packet.payload {
            Payload::Video { flow, gop, .. } => {
                let s = &mut self.sessions[flow];
                s.stats.delivered(delay, packet.hop);
                s.stats.gops.delivered(gop, packet.class);
                Ok(())
            }
            Payload::Cbr { flow } => {
                self.cbr[flow].stats.delivered(delay, packet.hop);
                Ok(())
            }
            Payload::Probe { session, iteration, path, seq, samples } => {
                self.on_probe_arrival(now, session, iteration, path, seq, delay, samples)
            }
            Payload::ProbeReply { session, iteration, path, report } => {
                self.on_probe_reply(now, session, iteration, path, report)
            }
            Payload::RouteError { session, from, to } => self.on_route_error(now, session, from, to),
            Payload::Beacon => Ok(()),
        }
    }

    fn on_beacon(&mut self, now: Seconds, i: usize) -> Result<(), Error> {
        let period = self.config.protocol.beacon_period;
        self.beacons += 1;
        let here = self.position(NodeId::new(i), now);
        let range = self.config.radio.tx_range;
        for j in 0..self.nodes.len() {
            if j != i && self.position(NodeId::new(j), now).distance(&here) <= range {
                self.nodes[j].neighbors.refresh(NodeId::new(i), now + 3.0 * period);
            }
        }
        self.nodes[i].neighbors.expire(now);
        let next = now + period;
        if next <= self.config.duration {
            self.events.schedule(next, Event::Beacon(i))?;
        }
        Ok(())
    }

    fn on_video_frame(&mut self, now: Seconds, flow: usize) -> Result<(), Error> {
        let frame = {
            let traffic = self.rng.stream(Stream::Traffic);
            self.sessions[flow].source.next_frame(traffic)
        };
        let route = self.sessions[flow].route().cloned();
        let packets = packetize(&frame, flow, route.clone().unwrap_or_else(|| Route::from(Vec::new())), &mut self.next_packet_id);
        let src = self.sessions[flow].src.index();
        for p in packets {
            self.classes[p.class.index()].generated += 1;
            let s = &mut self.sessions[flow];
            s.stats.counters.generated += 1;
            s.stats.gops.sent(frame.gop, p.class);
            if route.is_some() {
                self.enqueue(now, src, p)?;
            } else if s.send_buffer.len() < self.config.protocol.send_buffer {
                s.send_buffer.push_back(p);
            } else {
                self.record_drop(&p, DropCause::QueueOverflow);
            }
        }
        let next = frame.time + self.sessions[flow].source.model().frame_interval();
        if next <= self.config.duration {
            self.events.schedule(next, Event::VideoFrame(flow))?;
        }
        Ok(())
    }

    fn on_cbr(&mut self, now: Seconds, flow: usize) -> Result<(), Error> {
        let c = &self.cbr[flow];
        let (size, src, interval) = (c.source.packet_size(), c.src.index(), c.source.interval());
        let route = c.route.clone();
        let packet = self.new_packet(
            PacketClass::BestEffort,
            size,
            now,
            route.clone().unwrap_or_else(|| Route::from(Vec::new())),
            Payload::Cbr { flow },
        );
        self.cbr[flow].stats.counters.generated += 1;
        if route.is_some() {
            self.enqueue(now, src, packet)?;
        } else {
            self.record_drop(&packet, DropCause::LinkBreak);
        }
        let next = now + interval;
        if next <= self.config.duration {
            self.events.schedule(next, Event::Cbr(flow))?;
        }
        Ok(())
    }

    fn on_cbr_refresh(&mut self, now: Seconds, flow: usize) -> Result<(), Error> {
        let topo = self.topology(now);
        let limits = DiscoveryLimits { max_paths: 1, ..self.config.discovery };
        let (src, dst) = (self.cbr[flow].src, self.cbr[flow].dst);
        self.cbr[flow].route = discover_paths(&topo, src, dst, &limits).into_iter().next().map(Route::from);
        let next = now + self.config.protocol.cbr_refresh;
        if next <= self.config.duration {
            self.events.schedule(next, Event::CbrRefresh(flow))?;
        }
        Ok(())
    }

    /// Moves the next monitoring iteration of `flow` to `at` unless one is
    /// already due earlier.
    fn schedule_iteration(&mut self, flow: usize, at: Seconds) -> Result<(), Error> {
        if let Some((t, h)) = self.sessions[flow].next_iteration {
            if t <= at {
                return Ok(());
            }
            self.events.cancel(h);
        }
        if at > self.config.duration {
            self.sessions[flow].next_iteration = None;
            return Ok(());
        }
        let h = self.events.schedule(at, Event::Iteration(flow))?;
        self.sessions[flow].next_iteration = Some((at, h));
        Ok(())
    }

    fn on_iteration(&mut self, now: Seconds, flow: usize) -> Result<(), Error> {
        self.sessions[flow].next_iteration = None;
        if self.sessions[flow].probing.is_some() {
            // the running iteration reschedules when it completes
            return Ok(());
        }
        let topo = self.topology(now);
        let (src, dst) = (self.sessions[flow].src, self.sessions[flow].dst);
        let paths = discover_paths(&topo, src, dst, &self.config.discovery);
        let s = &mut self.sessions[flow];
        s.iteration += 1;
        let iteration = s.iteration;
        if paths.is_empty() {
            s.ranked.clear();
            s.routes.clear();
            s.set_current(now, None);
            let record = ProtocolRecord {
                flow,
                iteration,
                time: now,
                t_routing: self.config.protocol.rediscovery_holdoff,
                nstate: s.config.nstate,
                discovered: 0,
                usable: 0,
                filtered: false,
                path: None,
                mscore: None,
                mean_ts: None,
            };
            self.log.push(record);
            return self.schedule_iteration(flow, now + self.config.protocol.rediscovery_holdoff);
        }
        let train = self.config.protocol.probe_train;
        let spacing = self.config.protocol.probe_interval;
        for path in 0..paths.len() {
            for seq in 0..train {
                self.events.schedule(now + f64::from(seq) * spacing, Event::ProbeSend { flow, iteration, path, seq })?;
            }
        }
        let deadline = self.events.schedule(now + self.config.protocol.probe_timeout, Event::ProbeDeadline { flow, iteration })?;
        let n = paths.len();
        self.sessions[flow].probing = Some(Probing {
            started: now,
            paths: paths.into_iter().map(Route::from).collect(),
            reports: alloc::vec![None; n],
            outstanding: n,
            deadline,
        });
        Ok(())
    }

    fn on_probe_send(&mut self, now: Seconds, flow: usize, iteration: u32, path: usize, seq: u32) -> Result<(), Error> {
        let s = &self.sessions[flow];
        let Some(probing) = s.probing.as_ref().filter(|_| s.iteration == iteration) else {
            return Ok(());
        };
        let route = probing.paths[path].clone();
        let src = s.src.index();
        let size = self.config.protocol.probe_size;
        let payload = Payload::Probe { session: flow, iteration, path, seq, samples: ProbeSamples::default() };
        let p = self.new_packet(PacketClass::Signaling, size, now, route, payload);
        self.enqueue(now, src, p)
    }

    #[allow(clippy::too_many_arguments)]
    fn on_probe_arrival(
        &mut self,
        now: Seconds,
        flow: usize,
        iteration: u32,
        path: usize,
        seq: u32,
        delay: Seconds,
        samples: ProbeSamples,
    ) -> Result<(), Error> {
        let train = self.config.protocol.probe_train;
        let s = &mut self.sessions[flow];
        let first = !s.collectors.contains_key(&(iteration, path));
        let c = s.collectors.entry((iteration, path)).or_insert_with(|| ProbeCollector::new(train));
        let speed = if samples.hops == 0 { 0.0 } else { samples.speed_sum / f64::from(samples.hops) };
        c.record(seq, delay, samples.min_margin_db, samples.min_capacity, speed);
        if first {
            self.events.schedule(now + self.config.protocol.probe_window, Event::PmrEmit { flow, iteration, path })?;
        }
        Ok(())
    }

    fn on_pmr_emit(&mut self, now: Seconds, flow: usize, iteration: u32, path: usize) -> Result<(), Error> {
        let s = &mut self.sessions[flow];
        let Some(c) = s.collectors.remove(&(iteration, path)) else {
            return Ok(());
        };
        // the reply retraces the probed route, which the source still holds
        let Some(route) = s.probing.as_ref().filter(|_| s.iteration == iteration).map(|p| reversed(&p.paths[path])) else {
            return Ok(());
        };
        let dst = s.dst.index();
        let size = self.config.protocol.control_size;
        let payload = Payload::ProbeReply { session: flow, iteration, path, report: c.report() };
        let p = self.new_packet(PacketClass::Signaling, size, now, route, payload);
        self.enqueue(now, dst, p)
    }

    fn on_probe_reply(&mut self, now: Seconds, flow: usize, iteration: u32, path: usize, report: ProbeReport) -> Result<(), Error> {
        let s = &mut self.sessions[flow];
        if s.iteration != iteration {
            return Ok(());
        }
        let Some(probing) = s.probing.as_mut() else {
            return Ok(());
        };
        if probing.reports[path].is_none() {
            probing.reports[path] = Some(report);
            probing.outstanding -= 1;
        }
        if probing.outstanding == 0 {
            let h = probing.deadline;
            self.events.cancel(h);
            return self.evaluate(now, flow);
        }
        Ok(())
    }

    /// Scores every probed route, picks the winner and schedules the next
    /// iteration.
    fn evaluate(&mut self, now: Seconds, flow: usize) -> Result<(), Error> {
        let Some(probing) = self.sessions[flow].probing.take() else {
            return Ok(());
        };
        let mut candidates = Vec::new();
        let mut routes = Vec::new();
        for (route, report) in probing.paths.iter().zip(&probing.reports) {
            let Some(report) = report.filter(|r| r.received > 0) else {
                continue;
            };
            let raw = RawMetrics::from_report(&report, route.len() - 1);
            let quals = qualify(&raw, &self.scale);
            let mean_ts = path_mean_ts(route, &self.ts)?.mean;
            let score = mscore(&quals, mean_ts, self.weights, self.config.score_mode);
            candidates.push(Candidate { path: route.to_vec(), raw, quals, mean_ts, score });
            routes.push(route.clone());
        }
        let discovered = probing.paths.len();
        let s = &mut self.sessions[flow];
        let quals: Vec<_> = candidates.iter().map(|c| c.quals).collect();
        let nstate = s.config.update_nstate(&quals);
        let t_routing = s.config.t_routing();
        let ranking = rank_candidates(&candidates, &self.config.request);
        let usable = candidates.len();
        s.ranked = ranking.order.iter().map(|&i| candidates[i].clone()).collect();
        s.routes = ranking.order.iter().map(|&i| routes[i].clone()).collect();
        s.broken.clear();
        let winner = if s.ranked.is_empty() { None } else { Some(0) };
        let had_route = s.current.is_some();
        s.set_current(now, winner);
        let record = ProtocolRecord {
            flow,
            iteration: s.iteration,
            time: probing.started,
            t_routing,
            nstate,
            discovered,
            usable,
            filtered: ranking.filtered,
            path: s.ranked.first().map(|c| c.path.clone()),
            mscore: s.ranked.first().map(|c| c.score),
            mean_ts: s.ranked.first().map(|c| c.mean_ts),
        };
        self.log.push(record);
        if winner.is_some() {
            if !had_route {
                self.route_switches += 1;
            }
            self.flush_send_buffer(now, flow)?;
            self.schedule_iteration(flow, (probing.started + t_routing).max(now))
        } else {
            self.schedule_iteration(flow, now + self.config.protocol.rediscovery_holdoff)
        }
    }

    fn flush_send_buffer(&mut self, now: Seconds, flow: usize) -> Result<(), Error> {
        let Some(route) = self.sessions[flow].route().cloned() else {
            return Ok(());
        };
        let src = self.sessions[flow].src.index();
        let buffered: Vec<Packet> = self.sessions[flow].send_buffer.drain(..).collect();
        for mut p in buffered {
            p.route = route.clone();
            p.hop = 0;
            if let Enqueue::Overflow(p) = self.nodes[src].queues.enqueue(p) {
                self.record_drop(&p, DropCause::QueueOverflow);
            }
        }
        self.try_start(now, src)
    }

    fn on_route_error(&mut self, now: Seconds, flow: usize, from: NodeId, to: NodeId) -> Result<(), Error> {
        let s = &mut self.sessions[flow];
        s.broken.insert((from, to));
        let Some(current) = s.current else {
            return Ok(());
        };
        if !contains_link(&s.routes[current], (from, to)) {
            return Ok(());
        }
        let broken = &s.broken;
        let alternative = if self.config.protocol.use_alternates {
            s.routes
                .iter()
                .enumerate()
                .find(|(k, r)| *k != current && !broken.iter().any(|&l| contains_link(r, l)))
                .map(|(k, _)| k)
        } else {
            None
        };
        s.set_current(now, alternative);
        if alternative.is_some() {
            self.route_switches += 1;
            Ok(())
        } else {
            self.schedule_iteration(flow, now + self.config.protocol.rediscovery_holdoff)
        }
    }
}

/// Random endpoint pairs at least `min_distance` apart at `positions`, using
/// distinct nodes while the population allows. After a bounded number of
/// rejected draws the farthest pair seen is taken instead.
fn draw_endpoints<R: Rng + ?Sized>(positions: &[Position], flows: usize, min_distance: f64, rng: &mut R) -> Vec<(NodeId, NodeId)> {
    const ATTEMPTS: usize = 1000;
    let n = positions.len();
    let mut used = BTreeSet::new();
    let mut out = Vec::with_capacity(flows);
    for _ in 0..flows {
        let fresh = used.len() + 2 <= n;
        let mut best: Option<(f64, usize, usize)> = None;
        for _ in 0..ATTEMPTS {
            let src = rng.random_range(0..n);
            let dst = rng.random_range(0..n);
            if src == dst || (fresh && (used.contains(&src) || used.contains(&dst))) {
                continue;
            }
            let d = positions[src].distance(&positions[dst]);
            if best.is_none_or(|(bd, _, _)| d > bd) {
                best = Some((d, src, dst));
            }
            if d >= min_distance {
                break;
            }
        }
        let (_, src, dst) = best.unwrap_or((0.0, 0, 1));
        used.insert(src);
        used.insert(dst);
        out.push((NodeId::new(src), NodeId::new(dst)));
    }
    out
}
