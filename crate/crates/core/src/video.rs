//! GoP-structured VBR video source, frame fragmentation, decodability
//! accounting, and constant-bit-rate interferers.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};

use crate::packet::{Packet, PacketClass, Payload, Route};
use crate::sim::Seconds;
use crate::Error;

pub const MAX_PACKET_SIZE: u32 = 1500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FrameType {
    I,
    P,
    B,
}

impl FrameType {
    pub fn class(self) -> PacketClass {
        match self {
            FrameType::I => PacketClass::VideoI,
            FrameType::P => PacketClass::VideoP,
            FrameType::B => PacketClass::VideoB,
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(FrameType::I),
            'P' => Some(FrameType::P),
            'B' => Some(FrameType::B),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            FrameType::I => 'I',
            FrameType::P => 'P',
            FrameType::B => 'B',
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Repeating frame pattern with lognormal frame sizes whose means follow
/// `size_ratio` and together hit `target_rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct GopModel {
    pattern: Vec<FrameType>,
    pub fps: f64,
    pub target_rate: f64,
    /// Relative mean sizes of I, P and B frames.
    pub size_ratio: [f64; 3],
    /// Coefficient of variation of every frame-size distribution.
    pub size_cv: f64,
}

impl Default for GopModel {
    fn default() -> Self {
        Self::new(parse_pattern("IBBPBBPBBPBB").expect("static pattern"), 25.0, 150_000.0, [5.0, 2.0, 1.0], 0.3)
            .expect("default GoP model")
    }
}

/// Parses a pattern such as `IBBPBB`.
pub fn parse_pattern(s: &str) -> Option<Vec<FrameType>> {
    s.chars().filter(|c| !c.is_whitespace()).map(FrameType::from_char).collect()
}

impl GopModel {
    pub fn new(pattern: Vec<FrameType>, fps: f64, target_rate: f64, size_ratio: [f64; 3], size_cv: f64) -> Result<Self, Error> {
        if pattern.first() != Some(&FrameType::I) {
            return Err(Error::InvalidParameter("pattern must start with I"));
        }
        if !(fps > 0.0) || !fps.is_finite() {
            return Err(Error::InvalidParameter("fps"));
        }
        if !(target_rate > 0.0) || !target_rate.is_finite() {
            return Err(Error::InvalidParameter("target_rate"));
        }
        if size_ratio.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidParameter("size_ratio"));
        }
        if !(size_cv >= 0.0) || !size_cv.is_finite() {
            return Err(Error::InvalidParameter("size_cv"));
        }
        Ok(Self { pattern, fps, target_rate, size_ratio, size_cv })
    }

    pub fn pattern(&self) -> &[FrameType] {
        &self.pattern
    }

    /// Mean size in bytes of each frame type, solved so the expected bitrate
    /// equals `target_rate`.
    pub fn mean_sizes(&self) -> [f64; 3] {
        let gop_bytes = self.target_rate / 8.0 * self.pattern.len() as f64 / self.fps;
        let units: f64 = self.pattern.iter().map(|t| self.size_ratio[t.index()]).sum();
        let unit = gop_bytes / units;
        self.size_ratio.map(|r| r * unit)
    }

    pub fn expected_bitrate(&self) -> f64 {
        let means = self.mean_sizes();
        let gop_bytes: f64 = self.pattern.iter().map(|t| means[t.index()]).sum();
        gop_bytes * 8.0 * self.fps / self.pattern.len() as f64
    }

    pub fn frame_interval(&self) -> Seconds {
        1.0 / self.fps
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VideoFrame {
    pub gop: u32,
    pub index: u32,
    pub frame_type: FrameType,
    pub size_bytes: u32,
    pub time: Seconds,
}

/// One row of an imported frame-size trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceFrame {
    pub frame_type: FrameType,
    pub size_bytes: u32,
}

/// Emits frames in pattern order, either synthesised from a [`GopModel`] or
/// replayed (cyclically) from a trace.
#[derive(Debug, Clone)]
pub struct VideoSource {
    model: GopModel,
    dists: [LogNormal<f64>; 3],
    trace: Option<Vec<TraceFrame>>,
    next_index: u32,
    gop: Option<u32>,
    start: Seconds,
}

impl VideoSource {
    pub fn new(model: GopModel, start: Seconds) -> Result<Self, Error> {
        let means = model.mean_sizes();
        let mk = |m: f64| LogNormal::from_mean_cv(m, model.size_cv).map_err(|_| Error::InvalidDistribution);
        let dists = [mk(means[0])?, mk(means[1])?, mk(means[2])?];
        Ok(Self { model, dists, trace: None, next_index: 0, gop: None, start })
    }

    /// Replays `trace` instead of drawing sizes. The trace must be nonempty.
    pub fn with_trace(mut self, trace: Vec<TraceFrame>) -> Result<Self, Error> {
        if trace.is_empty() || trace.iter().any(|f| f.size_bytes == 0) {
            return Err(Error::InvalidParameter("video trace"));
        }
        self.trace = Some(trace);
        Ok(self)
    }

    pub fn model(&self) -> &GopModel {
        &self.model
    }

    pub fn next_frame<R: Rng + ?Sized>(&mut self, rng: &mut R) -> VideoFrame {
        let index = self.next_index;
        self.next_index += 1;
        let (frame_type, size_bytes) = match &self.trace {
            Some(trace) => {
                let f = trace[index as usize % trace.len()];
                (f.frame_type, f.size_bytes)
            }
            None => {
                let t = self.model.pattern[index as usize % self.model.pattern.len()];
                let size = libm::round(self.dists[t.index()].sample(rng)).max(1.0) as u32;
                (t, size)
            }
        };
        // a GoP opens at every I frame
        let gop = match (self.gop, frame_type) {
            (None, _) => 0,
            (Some(g), FrameType::I) => g + 1,
            (Some(g), _) => g,
        };
        self.gop = Some(gop);
        let time = self.start + f64::from(index) * self.model.frame_interval();
        VideoFrame { gop, index, frame_type, size_bytes, time }
    }
}

/// Sizes of the fragments of a `size_bytes` frame.
pub fn fragment_sizes(size_bytes: u32, mtu: u32) -> impl Iterator<Item = u32> {
    let n = size_bytes.div_ceil(mtu);
    (0..n).map(move |i| if i + 1 < n { mtu } else { size_bytes - mtu * (n - 1) })
}

/// Fragments `frame` into packets of at most [`MAX_PACKET_SIZE`] bytes, each
/// tagged with the frame's class. Ids are taken from `next_id`.
pub fn packetize(frame: &VideoFrame, flow: usize, route: Route, next_id: &mut u64) -> Vec<Packet> {
    fragment_sizes(frame.size_bytes, MAX_PACKET_SIZE)
        .map(|size| {
            let id = *next_id;
            *next_id += 1;
            Packet {
                id,
                class: frame.frame_type.class(),
                size_bytes: size,
                created: frame.time,
                route: route.clone(),
                hop: 0,
                payload: Payload::Video { flow, gop: frame.gop, frame: frame.index },
            }
        })
        .collect()
}

/// Counts I-frame packets per GoP to decide which GoPs are decodable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GopLedger {
    // gop -> (I packets sent, I packets delivered)
    gops: BTreeMap<u32, (u32, u32)>,
}

impl GopLedger {
    pub fn sent(&mut self, gop: u32, class: PacketClass) {
        let e = self.gops.entry(gop).or_default();
        if class == PacketClass::VideoI {
            e.0 += 1;
        }
    }

    pub fn delivered(&mut self, gop: u32, class: PacketClass) {
        if class == PacketClass::VideoI {
            self.gops.entry(gop).or_default().1 += 1;
        }
    }

    pub fn gop_count(&self) -> usize {
        self.gops.len()
    }

    /// Fraction of GoPs whose I packets all arrived; 1 when no GoP was sent.
    pub fn decodable_fraction(&self) -> f64 {
        if self.gops.is_empty() {
            return 1.0;
        }
        let ok = self.gops.values().filter(|(s, d)| d >= s).count();
        ok as f64 / self.gops.len() as f64
    }
}

/// Convenience form over `(gop, i_packet_delivered)` records.
pub fn decodeable_gops(records: &[(u32, bool)]) -> f64 {
    let mut ledger = GopLedger::default();
    for &(gop, ok) in records {
        ledger.sent(gop, PacketClass::VideoI);
        if ok {
            ledger.delivered(gop, PacketClass::VideoI);
        }
    }
    ledger.decodable_fraction()
}

/// Best-effort source at a fixed packet rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbrSource {
    rate: f64,
    packet_size: u32,
}

impl CbrSource {
    pub fn new(rate: f64, packet_size: u32) -> Result<Self, Error> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::InvalidParameter("cbr rate"));
        }
        if packet_size == 0 || packet_size > MAX_PACKET_SIZE {
            return Err(Error::InvalidParameter("cbr packet size"));
        }
        Ok(Self { rate, packet_size })
    }

    pub fn packet_size(&self) -> u32 {
        self.packet_size
    }

    pub fn interval(&self) -> Seconds {
        f64::from(self.packet_size) * 8.0 / self.rate
    }

    pub fn class(&self) -> PacketClass {
        PacketClass::BestEffort
    }
}
