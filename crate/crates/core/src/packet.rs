//! Packets carried by the simulator and their priority classes.

use alloc::rc::Rc;

use crate::sim::Seconds;
use crate::NodeId;

/// What a packet carries, as far as MAC prioritisation is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PacketClass {
    Signaling,
    VideoI,
    VideoP,
    VideoB,
    BestEffort,
}

impl PacketClass {
    pub const ALL: [PacketClass; 5] = [
        PacketClass::Signaling,
        PacketClass::VideoI,
        PacketClass::VideoP,
        PacketClass::VideoB,
        PacketClass::BestEffort,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PacketClass::Signaling => "signaling",
            PacketClass::VideoI => "video-i",
            PacketClass::VideoP => "video-p",
            PacketClass::VideoB => "video-b",
            PacketClass::BestEffort => "best-effort",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Why a packet never reached its destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DropCause {
    /// A MAC queue or the source send buffer was full.
    QueueOverflow,
    /// The next hop was out of range when the packet was due to be sent.
    LinkBreak,
    /// The frame was received with errors.
    Corruption,
}

impl DropCause {
    pub const ALL: [DropCause; 3] = [DropCause::QueueOverflow, DropCause::LinkBreak, DropCause::Corruption];

    pub fn name(self) -> &'static str {
        match self {
            DropCause::QueueOverflow => "queue-overflow",
            DropCause::LinkBreak => "link-break",
            DropCause::Corruption => "corruption",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Source route shared by every packet that follows it.
pub type Route = Rc<[NodeId]>;

/// Link-quality samples a probe collects hop by hop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSamples {
    pub min_margin_db: f64,
    pub min_capacity: f64,
    pub speed_sum: f64,
    pub hops: u32,
}

impl Default for ProbeSamples {
    fn default() -> Self {
        Self { min_margin_db: f64::INFINITY, min_capacity: f64::INFINITY, speed_sum: 0.0, hops: 0 }
    }
}

/// Aggregate a destination returns for one probed path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeReport {
    pub received: u32,
    pub sent: u32,
    pub mean_delay: Seconds,
    pub mean_jitter: Seconds,
    pub mean_margin_db: f64,
    pub mean_capacity: f64,
    pub mean_relative_speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Video { flow: usize, gop: u32, frame: u32 },
    Cbr { flow: usize },
    Beacon,
    Probe { session: usize, iteration: u32, path: usize, seq: u32, samples: ProbeSamples },
    ProbeReply { session: usize, iteration: u32, path: usize, report: ProbeReport },
    RouteError { session: usize, from: NodeId, to: NodeId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub id: u64,
    pub class: PacketClass,
    pub size_bytes: u32,
    pub created: Seconds,
    /// Full source route, `route[0]` is the originator. Empty for broadcasts.
    pub route: Route,
    /// Index into `route` of the node currently holding the packet.
    pub hop: usize,
    pub payload: Payload,
}

impl Packet {
    pub fn next_hop(&self) -> Option<NodeId> {
        self.route.get(self.hop + 1).copied()
    }

    pub fn holder(&self) -> Option<NodeId> {
        self.route.get(self.hop).copied()
    }

    pub fn destination(&self) -> Option<NodeId> {
        self.route.last().copied()
    }

    pub fn is_broadcast(&self) -> bool {
        self.route.is_empty()
    }

    /// Number of links traversed so far.
    pub fn hops_travelled(&self) -> usize {
        self.hop
    }
}
