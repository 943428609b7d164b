//! Unit-disk radio model with log-distance path loss.
//!
//! Links are usable up to `tx_range` metres (inclusive). The transmit power is
//! calibrated so that the SNR at exactly `tx_range` equals the reception
//! threshold; closer links have a positive SNR margin that lowers their
//! corruption probability.

use alloc::vec::Vec;

use rand::Rng;

use crate::mobility::Position;
use crate::sim::Seconds;
use crate::{Error, NodeId};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RadioSpec {
    pub tx_range: f64,
    /// dBm
    pub tx_power: f64,
    /// dBm
    pub noise_floor: f64,
    pub path_loss_exponent: f64,
    /// Path loss at the 1 m reference distance, dB.
    pub reference_loss: f64,
    /// bits/s
    pub nominal_bitrate: f64,
    /// SNR (dB) at the edge of the usable disk.
    pub snr_threshold: f64,
    /// Corruption probability of a link right at the edge.
    pub max_corruption: f64,
    /// Margin (dB) above threshold at which corruption reaches zero.
    pub corruption_span_db: f64,
}

impl Default for RadioSpec {
    fn default() -> Self {
        Self::calibrated(120.0, -92.0, 3.0, 11.0e6)
    }
}

impl RadioSpec {
    /// Builds a spec whose transmit power puts the SNR at `tx_range` exactly on
    /// the 10 dB threshold.
    pub fn calibrated(tx_range: f64, noise_floor: f64, path_loss_exponent: f64, nominal_bitrate: f64) -> Self {
        let mut spec = Self {
            tx_range,
            tx_power: 0.0,
            noise_floor,
            path_loss_exponent,
            reference_loss: 40.0,
            nominal_bitrate,
            snr_threshold: 10.0,
            max_corruption: 0.05,
            corruption_span_db: 20.0,
        };
        spec.recalibrate();
        spec
    }

    /// Recomputes `tx_power` from the other fields.
    pub fn recalibrate(&mut self) {
        self.tx_power = self.snr_threshold + self.noise_floor + self.path_loss(self.tx_range);
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.tx_range > 0.0) {
            return Err(Error::InvalidParameter("tx_range"));
        }
        if !(self.nominal_bitrate > 0.0) {
            return Err(Error::InvalidParameter("nominal_bitrate"));
        }
        if !(self.path_loss_exponent > 0.0) {
            return Err(Error::InvalidParameter("path_loss_exponent"));
        }
        if !(0.0..=1.0).contains(&self.max_corruption) {
            return Err(Error::InvalidParameter("max_corruption"));
        }
        if !(self.corruption_span_db > 0.0) {
            return Err(Error::InvalidParameter("corruption_span_db"));
        }
        Ok(())
    }

    /// Log-distance path loss in dB; distances under 1 m clamp to 1 m.
    pub fn path_loss(&self, distance: f64) -> f64 {
        self.reference_loss + 10.0 * self.path_loss_exponent * libm::log10(distance.max(1.0))
    }

    pub fn snr(&self, distance: f64) -> f64 {
        self.tx_power - self.path_loss(distance) - self.noise_floor
    }

    /// Probability that a frame on a link with this SNR arrives corrupted.
    /// Nonincreasing in `snr`.
    pub fn corruption_probability(&self, snr: f64) -> f64 {
        let margin = snr - self.snr_threshold;
        self.max_corruption * (1.0 - margin / self.corruption_span_db).clamp(0.0, 1.0)
    }

    /// Seconds to put `size_bytes` on the air when `load_factor` stations share
    /// the channel.
    pub fn transmission_delay(&self, size_bytes: u32, load_factor: f64) -> Seconds {
        let effective_rate = self.nominal_bitrate / load_factor.max(1.0);
        f64::from(size_bytes) * 8.0 / effective_rate
    }

    pub fn link_state(&self, a: NodeId, b: NodeId, pa: Position, pb: Position) -> LinkState {
        let distance = pa.distance(&pb);
        LinkState {
            endpoints: (a, b),
            distance,
            snr: self.snr(distance),
            usable: distance <= self.tx_range,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    pub endpoints: (NodeId, NodeId),
    pub distance: f64,
    /// dB
    pub snr: f64,
    pub usable: bool,
}

impl LinkState {
    /// SNR above the reception threshold, dB.
    pub fn margin(&self, radio: &RadioSpec) -> f64 {
        self.snr - radio.snr_threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Delivery {
    Delivered { tx_delay: Seconds, propagation: Seconds },
    Corrupted { tx_delay: Seconds },
    LinkBreak,
}

/// Sends one frame over `link`. Unusable links drop immediately; otherwise the
/// frame occupies the channel for its transmission delay and is corrupted with
/// the SNR-dependent probability.
pub fn transmit<R: Rng + ?Sized>(
    radio: &RadioSpec,
    link: &LinkState,
    size_bytes: u32,
    load_factor: f64,
    rng: &mut R,
) -> Delivery {
    if !link.usable {
        return Delivery::LinkBreak;
    }
    let tx_delay = radio.transmission_delay(size_bytes, load_factor);
    let p = radio.corruption_probability(link.snr);
    let u: f64 = rng.random();
    if u < p {
        Delivery::Corrupted { tx_delay }
    } else {
        Delivery::Delivered { tx_delay, propagation: link.distance / SPEED_OF_LIGHT }
    }
}

/// Unit-disk connectivity snapshot. Adjacency lists are sorted by node id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    adjacency: Vec<Vec<NodeId>>,
}

impl Topology {
    pub fn from_positions(positions: &[Position], radio: &RadioSpec) -> Self {
        let n = positions.len();
        let mut adjacency = alloc::vec![Vec::new(); n];
        for a in 0..n {
            for b in (a + 1)..n {
                if positions[a].distance(&positions[b]) <= radio.tx_range {
                    adjacency[a].push(NodeId::new(b));
                    adjacency[b].push(NodeId::new(a));
                }
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Self { adjacency }
    }

    /// Builds a topology from an undirected edge list.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Self {
        let mut adjacency = alloc::vec![Vec::new(); node_count];
        for &(a, b) in edges {
            if a == b || a >= node_count || b >= node_count {
                continue;
            }
            adjacency[a].push(NodeId::new(b));
            adjacency[b].push(NodeId::new(a));
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Self { adjacency }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        self.adjacency.get(node.index()).map_or(&[], Vec::as_slice)
    }

    pub fn are_adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    /// Hop distance from every node to `target` (`usize::MAX` when unreachable).
    pub fn hop_distances_to(&self, target: NodeId) -> Vec<usize> {
        let n = self.node_count();
        let mut dist = alloc::vec![usize::MAX; n];
        if target.index() >= n {
            return dist;
        }
        let mut frontier = alloc::collections::VecDeque::new();
        dist[target.index()] = 0;
        frontier.push_back(target);
        while let Some(u) = frontier.pop_front() {
            let d = dist[u.index()] + 1;
            for &v in self.neighbors(u) {
                if dist[v.index()] == usize::MAX {
                    dist[v.index()] = d;
                    frontier.push_back(v);
                }
            }
        }
        dist
    }
}

/// Nodes within range of `node`.
pub fn neighbor_set(node: NodeId, positions: &[Position], radio: &RadioSpec) -> Vec<NodeId> {
    let Some(here) = positions.get(node.index()) else {
        return Vec::new();
    };
    positions
        .iter()
        .enumerate()
        .filter(|&(i, p)| i != node.index() && here.distance(p) <= radio.tx_range)
        .map(|(i, _)| NodeId::new(i))
        .collect()
}
