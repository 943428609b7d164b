//! Packet-level discrete-event simulator for mobile ad hoc networks running a
//! QoS- and social-aware multipath source routing protocol.
//!
//! The crate is `no_std` (with `alloc`). It owns every algorithm: the event
//! engine, random-waypoint mobility, the unit-disk radio model, the
//! four-category priority MAC, tie-strength computation, path discovery and
//! scoring, the GoP video source, and the network simulator that ties them
//! together. File formats, configuration, sweeps and the CLI live in the
//! `qsmvm` companion crate.

#![cfg_attr(not(test), no_std)]
// negated comparisons are how parameter checks reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod mac;
pub mod mobility;
pub mod network;
pub mod packet;
pub mod phy;
pub mod routing;
pub mod sim;
pub mod social;
pub mod video;

use core::fmt;

pub use network::{RunConfig, RunResult, Simulator};
pub use sim::Seconds;

/// Index of a node in the simulated population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeId(pub u32);

impl NodeId {
    pub const fn new(index: usize) -> Self {
        Self(index as u32)
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("cannot schedule at {at} s, clock is already at {now} s")]
    ScheduleInPast { at: f64, now: f64 },
    #[error("unknown random stream")]
    UnknownStream,
    #[error("invalid distribution parameters")]
    InvalidDistribution,
    #[error("node count must be positive")]
    ZeroNodes,
    #[error("unknown node")]
    UnknownNode,
    #[error("time outside the trace interval")]
    TimeOutOfRange,
    #[error("invalid parameter `{0}`")]
    InvalidParameter(&'static str),
    #[error("path repeats a node on consecutive hops")]
    RepeatedNode,
    #[error("path needs at least two nodes")]
    PathTooShort,
    #[error("value {0} outside the accepted range")]
    OutOfRange(f64),
    #[error("invalid trace: {0}")]
    Trace(#[from] mobility::TraceError),
}
