//! Path discovery, QoS qualification, requirement filtering, multimetric
//! scoring and the self-configured refresh period.
//!
//! Discovery returns loop-free source routes in a fixed order (fewer hops
//! first, then lexicographic node ids). Each probed route gets seven raw QoS
//! metrics which are mapped onto `[0, 1]` qualifications; the score blends
//! their mean with the route's tie strength through complementary weights.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::packet::ProbeReport;
use crate::phy::Topology;
use crate::sim::Seconds;
use crate::{Error, NodeId};

/// Minimum service a flow asks for.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CustomerRequest {
    /// bits/s
    pub bw_min: f64,
    /// fraction of packets
    pub l_max: f64,
    pub d_max: Seconds,
    pub j_max: Seconds,
}

impl Default for CustomerRequest {
    fn default() -> Self {
        Self { bw_min: 150_000.0, l_max: 0.25, d_max: 2.0, j_max: 1.0 }
    }
}

impl CustomerRequest {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.bw_min > 0.0) {
            return Err(Error::InvalidParameter("bw_min"));
        }
        if !(self.l_max > 0.0 && self.l_max <= 1.0) {
            return Err(Error::InvalidParameter("l_max"));
        }
        if !(self.d_max > 0.0) {
            return Err(Error::InvalidParameter("d_max"));
        }
        if !(self.j_max > 0.0) {
            return Err(Error::InvalidParameter("j_max"));
        }
        Ok(())
    }

    /// Inclusive check of all four bounds.
    pub fn admits(&self, m: &RawMetrics) -> bool {
        m.bw >= self.bw_min && m.loss <= self.l_max && m.delay <= self.d_max && m.jitter <= self.j_max
    }
}

/// Measured state of one path in one monitoring iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawMetrics {
    /// Bottleneck residual capacity, bits/s.
    pub bw: f64,
    pub loss: f64,
    pub delay: Seconds,
    pub jitter: Seconds,
    pub hops: usize,
    /// SNR margin above threshold of the weakest hop, dB.
    pub rm: f64,
    /// Mean relative speed between consecutive hops, m/s.
    pub mm: f64,
}

impl RawMetrics {
    pub fn from_report(report: &ProbeReport, hops: usize) -> Self {
        let loss = if report.sent == 0 { 1.0 } else { 1.0 - f64::from(report.received) / f64::from(report.sent) };
        Self {
            bw: report.mean_capacity,
            loss: loss.clamp(0.0, 1.0),
            delay: report.mean_delay,
            jitter: report.mean_jitter,
            hops,
            rm: report.mean_margin_db,
            mm: report.mean_relative_speed,
        }
    }
}

/// Reference scales that turn raw metrics into qualifications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualificationScale {
    pub bw_ref: f64,
    pub d_ref: Seconds,
    pub j_ref: Seconds,
    pub rm_span_db: f64,
    pub max_speed: f64,
}

impl QualificationScale {
    pub fn from_request(req: &CustomerRequest, max_speed: f64) -> Self {
        Self { bw_ref: req.bw_min, d_ref: req.d_max, j_ref: req.j_max, rm_span_db: 20.0, max_speed }
    }
}

/// Qualifications in `[0, 1]`, 1 best, ordered BW, L, D, J, H, RM, MM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qualifications(pub [f64; 7]);

impl Qualifications {
    pub const NAMES: [&'static str; 7] = ["bw", "loss", "delay", "jitter", "hops", "rm", "mm"];

    pub fn mean(&self) -> f64 {
        self.sum() / 7.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

pub fn qualify(m: &RawMetrics, scale: &QualificationScale) -> Qualifications {
    let ratio_down = |x: f64, r: f64| if r > 0.0 { (1.0 - x / r).clamp(0.0, 1.0) } else { 0.0 };
    let q_bw = if scale.bw_ref > 0.0 { (m.bw / scale.bw_ref).clamp(0.0, 1.0) } else { 1.0 };
    let q_l = (1.0 - m.loss).clamp(0.0, 1.0);
    let q_d = ratio_down(m.delay, scale.d_ref);
    let q_j = ratio_down(m.jitter, scale.j_ref);
    let q_h = if m.hops == 0 { 0.0 } else { 1.0 / m.hops as f64 };
    let q_rm = (m.rm / scale.rm_span_db).clamp(0.0, 1.0);
    let q_mm = ratio_down(m.mm, 2.0 * scale.max_speed);
    Qualifications([q_bw, q_l, q_d, q_j, q_h, q_rm, q_mm])
}

/// Social weight; the QoS weight is its complement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringWeights {
    w_ts: f64,
}

impl ScoringWeights {
    pub fn new(w_ts: f64) -> Result<Self, Error> {
        if !(0.0..=1.0).contains(&w_ts) {
            return Err(Error::InvalidParameter("w_ts"));
        }
        Ok(Self { w_ts })
    }

    pub fn w_ts(&self) -> f64 {
        self.w_ts
    }

    pub fn w_qos(&self) -> f64 {
        1.0 - self.w_ts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ScoreMode {
    /// `w_qos * mean(q) + w_ts * ts / 4`, a score in `[0, 1]`.
    #[default]
    Normalized,
    /// `w_qos * sum(q) + w_ts * ts`, the unnormalised blend.
    RawSum,
}

pub fn mscore(q: &Qualifications, mean_ts: f64, w: ScoringWeights, mode: ScoreMode) -> f64 {
    match mode {
        ScoreMode::Normalized => w.w_qos() * q.mean() + w.w_ts() * (mean_ts / 4.0),
        ScoreMode::RawSum => w.w_qos() * q.sum() + w.w_ts() * mean_ts,
    }
}

/// A probed path with everything needed to rank it.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub path: Vec<NodeId>,
    pub raw: RawMetrics,
    pub quals: Qualifications,
    pub mean_ts: f64,
    pub score: f64,
}

impl Candidate {
    pub fn hops(&self) -> usize {
        self.path.len().saturating_sub(1)
    }
}

/// Order of preference: higher score, then fewer hops, then lexicographic path.
pub fn preference(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.hops().cmp(&b.hops()))
        .then_with(|| a.path.cmp(&b.path))
}

/// Indices of candidates that meet every bound of `req`.
pub fn filter_paths(candidates: &[Candidate], req: &CustomerRequest) -> Vec<usize> {
    candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| req.admits(&c.raw))
        .map(|(i, _)| i)
        .collect()
}

/// Index of the preferred candidate among `pool`.
pub fn select_path(candidates: &[Candidate], pool: &[usize]) -> Option<usize> {
    pool.iter().copied().min_by(|&a, &b| preference(&candidates[a], &candidates[b]))
}

/// Outcome of ranking one monitoring iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    /// Candidate indices, preferred first.
    pub order: Vec<usize>,
    /// Whether the head of `order` passed the request filter.
    pub filtered: bool,
}

/// Ranks candidates: paths that pass the filter come first in preference
/// order. When none passes, every candidate is ranked by preference instead.
pub fn rank_candidates(candidates: &[Candidate], req: &CustomerRequest) -> Ranking {
    let passing = filter_paths(candidates, req);
    let filtered = !passing.is_empty();
    let mut order: Vec<usize> = if filtered { passing } else { (0..candidates.len()).collect() };
    order.sort_by(|&a, &b| preference(&candidates[a], &candidates[b]));
    Ranking { order, filtered }
}

/// Network-state estimate and the refresh period derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfConfig {
    pub nstate: f64,
    pub alpha: f64,
    pub beta: Seconds,
    pub metric_weights: [f64; 7],
}

impl Default for SelfConfig {
    fn default() -> Self {
        Self { nstate: 0.0, alpha: 10.0, beta: 3.0, metric_weights: [1.0 / 7.0; 7] }
    }
}

impl SelfConfig {
    /// Weighted sum of per-metric means across `quals`. Holds the previous
    /// value when there is nothing to average.
    pub fn update_nstate(&mut self, quals: &[Qualifications]) -> f64 {
        if quals.is_empty() {
            return self.nstate;
        }
        let n = quals.len() as f64;
        let mut nstate = 0.0;
        for (m, w) in self.metric_weights.iter().enumerate() {
            let mean = quals.iter().map(|q| q.0[m]).sum::<f64>() / n;
            nstate += w * mean;
        }
        self.nstate = nstate.clamp(0.0, 1.0);
        self.nstate
    }

    pub fn t_routing(&self) -> Seconds {
        t_routing(self.nstate, self.alpha, self.beta)
    }
}

/// `alpha * nstate + beta`.
pub fn t_routing(nstate: f64, alpha: f64, beta: Seconds) -> Seconds {
    alpha * nstate.clamp(0.0, 1.0) + beta
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscoveryLimits {
    pub ttl: usize,
    pub max_paths: usize,
    /// Cap on DFS expansions per discovery.
    pub max_expansions: usize,
}

impl Default for DiscoveryLimits {
    fn default() -> Self {
        Self { ttl: 10, max_paths: 10, max_expansions: 1_000_000 }
    }
}

impl DiscoveryLimits {
    pub fn unbounded() -> Self {
        Self { ttl: usize::MAX, max_paths: usize::MAX, max_expansions: usize::MAX }
    }
}

/// Loop-free routes from `src` to `dst` of at most `limits.ttl` hops, fewest
/// hops first and lexicographic within a hop count, truncated to
/// `limits.max_paths`.
///
/// The search runs one depth-limited DFS per hop count and prunes any prefix
/// whose unconstrained BFS distance to `dst` exceeds the remaining budget.
pub fn discover_paths(topology: &Topology, src: NodeId, dst: NodeId, limits: &DiscoveryLimits) -> Vec<Vec<NodeId>> {
    let n = topology.node_count();
    let mut found = Vec::new();
    if src == dst || src.index() >= n || dst.index() >= n || limits.max_paths == 0 {
        return found;
    }
    let dist = topology.hop_distances_to(dst);
    let shortest = dist[src.index()];
    if shortest == usize::MAX || shortest > limits.ttl {
        return found;
    }
    let longest = limits.ttl.min(n - 1);
    let mut search = Search {
        topology,
        dist: &dist,
        dst,
        visited: alloc::vec![false; n],
        path: Vec::with_capacity(longest + 1),
        found: &mut found,
        max_paths: limits.max_paths,
        budget: limits.max_expansions,
    };
    for hops in shortest..=longest {
        search.visited[src.index()] = true;
        search.path.push(src);
        search.extend(src, hops);
        search.path.clear();
        search.visited[src.index()] = false;
        if search.found.len() >= search.max_paths || search.budget == 0 {
            break;
        }
    }
    found
}

struct Search<'a> {
    topology: &'a Topology,
    dist: &'a [usize],
    dst: NodeId,
    visited: Vec<bool>,
    path: Vec<NodeId>,
    found: &'a mut Vec<Vec<NodeId>>,
    max_paths: usize,
    budget: usize,
}

impl Search<'_> {
    /// Extends the current prefix ending at `at` by exactly `remaining` hops.
    fn extend(&mut self, at: NodeId, remaining: usize) {
        if self.found.len() >= self.max_paths || self.budget == 0 {
            return;
        }
        self.budget -= 1;
        if remaining == 0 {
            if at == self.dst {
                self.found.push(self.path.clone());
            }
            return;
        }
        if at == self.dst {
            return;
        }
        for &next in self.topology.neighbors(at) {
            let i = next.index();
            if self.visited[i] || self.dist[i] > remaining - 1 {
                continue;
            }
            self.visited[i] = true;
            self.path.push(next);
            self.extend(next, remaining - 1);
            self.path.pop();
            self.visited[i] = false;
            if self.found.len() >= self.max_paths || self.budget == 0 {
                return;
            }
        }
    }
}

/// One-hop neighbours heard through hello beacons, with expiry times.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeighborTable {
    entries: BTreeMap<NodeId, Seconds>,
}

impl NeighborTable {
    /// Records a hello from `neighbor`, valid until `expires`.
    pub fn refresh(&mut self, neighbor: NodeId, expires: Seconds) {
        let e = self.entries.entry(neighbor).or_insert(expires);
        *e = e.max(expires);
    }

    pub fn contains(&self, neighbor: NodeId, now: Seconds) -> bool {
        self.entries.get(&neighbor).is_some_and(|&exp| exp > now)
    }

    /// Drops expired entries.
    pub fn expire(&mut self, now: Seconds) {
        self.entries.retain(|_, exp| *exp > now);
    }

    pub fn live(&self, now: Seconds) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.iter().filter(move |(_, &exp)| exp > now).map(|(&n, _)| n)
    }
}

/// Folds per-probe observations at a destination into a [`ProbeReport`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProbeCollector {
    sent: u32,
    delays: BTreeMap<u32, Seconds>,
    margin_sum: f64,
    capacity_sum: f64,
    speed_sum: f64,
}

impl ProbeCollector {
    pub fn new(sent: u32) -> Self {
        Self { sent, ..Self::default() }
    }

    pub fn record(&mut self, seq: u32, delay: Seconds, min_margin_db: f64, min_capacity: f64, mean_speed: f64) {
        if let alloc::collections::btree_map::Entry::Vacant(e) = self.delays.entry(seq) {
            e.insert(delay);
            self.margin_sum += min_margin_db;
            self.capacity_sum += min_capacity;
            self.speed_sum += mean_speed;
        }
    }

    pub fn received(&self) -> u32 {
        self.delays.len() as u32
    }

    pub fn report(&self) -> ProbeReport {
        let received = self.received();
        let n = f64::from(received.max(1));
        let ordered: Vec<f64> = self.delays.values().copied().collect();
        let mean_delay = ordered.iter().sum::<f64>() / n;
        let mean_jitter = if ordered.len() >= 2 {
            ordered.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (ordered.len() - 1) as f64
        } else {
            0.0
        };
        ProbeReport {
            received,
            sent: self.sent,
            mean_delay,
            mean_jitter,
            mean_margin_db: self.margin_sum / n,
            mean_capacity: self.capacity_sum / n,
            mean_relative_speed: self.speed_sum / n,
        }
    }
}
