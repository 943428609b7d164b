//! Discrete-event machinery: a virtual clock, a cancellable priority queue of
//! timestamped events, and named deterministic random streams.
//!
//! Events at equal timestamps are delivered in insertion order, so a run is a
//! pure function of its inputs and its master seed.

use alloc::collections::{BTreeSet, BinaryHeap};
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal, Uniform};

use crate::Error;

/// Simulated time in seconds.
pub type Seconds = f64;

/// Handle returned by [`EventQueue::schedule`]; used to cancel the event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventHandle(u64);

struct Entry<E> {
    at: Seconds,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // BinaryHeap is a max-heap: invert so the earliest (then oldest) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .at
            .total_cmp(&self.at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Counters kept by the queue. `scheduled - cancelled - processed == pending`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueueCounters {
    pub scheduled: u64,
    pub cancelled: u64,
    pub processed: u64,
    pub pending: u64,
}

/// Priority queue of events keyed by `(timestamp, insertion sequence)` with a
/// monotone clock.
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    cancelled: BTreeSet<u64>,
    now: Seconds,
    next_seq: u64,
    counters: QueueCounters,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            cancelled: BTreeSet::new(),
            now: 0.0,
            next_seq: 0,
            counters: QueueCounters::default(),
        }
    }

    /// Current clock value.
    pub fn now(&self) -> Seconds {
        self.now
    }

    pub fn counters(&self) -> QueueCounters {
        self.counters
    }

    pub fn is_empty(&self) -> bool {
        self.counters.pending == 0
    }

    /// Schedules `event` at absolute time `at`. Scheduling in the past is a
    /// logic error in the caller and is rejected.
    pub fn schedule(&mut self, at: Seconds, event: E) -> Result<EventHandle, Error> {
        if !at.is_finite() || at < self.now {
            return Err(Error::ScheduleInPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { at, seq, event });
        self.counters.scheduled += 1;
        self.counters.pending += 1;
        Ok(EventHandle(seq))
    }

    /// Schedules `event` `delay` seconds from now.
    pub fn schedule_in(&mut self, delay: Seconds, event: E) -> Result<EventHandle, Error> {
        self.schedule(self.now + delay, event)
    }

    /// Cancels a pending event. Returns false if it already ran, was already
    /// cancelled, or never existed.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if handle.0 >= self.next_seq || self.cancelled.contains(&handle.0) {
            return false;
        }
        if !self.heap.iter().any(|e| e.seq == handle.0) {
            return false;
        }
        self.cancelled.insert(handle.0);
        self.counters.cancelled += 1;
        self.counters.pending -= 1;
        true
    }

    fn discard_cancelled_head(&mut self) {
        while let Some(head) = self.heap.peek() {
            if self.cancelled.remove(&head.seq) {
                self.heap.pop();
            } else {
                break;
            }
        }
    }

    /// Timestamp of the next live event, if any.
    pub fn peek_time(&mut self) -> Option<Seconds> {
        self.discard_cancelled_head();
        self.heap.peek().map(|e| e.at)
    }

    /// Pops the next event and advances the clock to its timestamp.
    pub fn pop(&mut self) -> Option<(Seconds, E)> {
        self.discard_cancelled_head();
        let entry = self.heap.pop()?;
        debug_assert!(entry.at >= self.now);
        self.now = entry.at;
        self.counters.processed += 1;
        self.counters.pending -= 1;
        Some((entry.at, entry.event))
    }

    /// Pops the next event only if its timestamp is `<= end`.
    pub fn pop_until(&mut self, end: Seconds) -> Option<(Seconds, E)> {
        match self.peek_time() {
            Some(t) if t <= end => self.pop(),
            _ => None,
        }
    }

    /// Moves the clock forward to `t` without processing anything.
    pub fn advance_to(&mut self, t: Seconds) {
        if t > self.now {
            self.now = t;
        }
    }
}

/// The named random substreams of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Stream {
    Mobility,
    Traffic,
    Social,
    Channel,
}

impl Stream {
    pub const ALL: [Stream; 4] = [Stream::Mobility, Stream::Traffic, Stream::Social, Stream::Channel];

    /// Fixed ChaCha stream id. New streams get new ids; existing ids never change.
    pub const fn key(self) -> u64 {
        match self {
            Stream::Mobility => 0x6d6f_6269,
            Stream::Traffic => 0x7472_6166,
            Stream::Social => 0x736f_6369,
            Stream::Channel => 0x6368_616e,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stream::Mobility => "mobility",
            Stream::Traffic => "traffic",
            Stream::Social => "social",
            Stream::Channel => "channel",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, Error> {
        Stream::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or(Error::UnknownStream)
    }
}

/// Distributions accepted by [`RngStreams::draw`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DrawSpec {
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, std_dev: f64 },
    /// Uniform index in `0..n`, returned as a real.
    Choice { n: usize },
}

/// One independent generator per [`Stream`], all derived from a master seed.
#[derive(Debug, Clone)]
pub struct RngStreams {
    master_seed: u64,
    streams: [ChaCha8Rng; 4],
}

impl RngStreams {
    pub fn new(master_seed: u64) -> Self {
        let make = |s: Stream| {
            let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
            rng.set_stream(s.key());
            rng
        };
        Self {
            master_seed,
            streams: Stream::ALL.map(make),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream(&mut self, stream: Stream) -> &mut ChaCha8Rng {
        let idx = Stream::ALL.iter().position(|s| *s == stream).unwrap_or(0);
        &mut self.streams[idx]
    }

    /// Draws the next variate of `spec` from the stream called `name`.
    pub fn draw_named(&mut self, name: &str, spec: DrawSpec) -> Result<f64, Error> {
        let stream = Stream::from_name(name)?;
        self.draw(stream, spec)
    }

    pub fn draw(&mut self, stream: Stream, spec: DrawSpec) -> Result<f64, Error> {
        draw_from(self.stream(stream), spec)
    }
}

/// Draws one variate of `spec` from `rng`.
pub fn draw_from<R: Rng + ?Sized>(rng: &mut R, spec: DrawSpec) -> Result<f64, Error> {
    match spec {
        DrawSpec::Uniform { low, high } => {
            if !(low.is_finite() && high.is_finite()) || high < low {
                return Err(Error::InvalidDistribution);
            }
            if low == high {
                return Ok(low);
            }
            let u = Uniform::new(low, high).map_err(|_| Error::InvalidDistribution)?;
            Ok(u.sample(rng))
        }
        DrawSpec::Normal { mean, std_dev } => {
            let n = Normal::new(mean, std_dev).map_err(|_| Error::InvalidDistribution)?;
            Ok(n.sample(rng))
        }
        DrawSpec::Choice { n } => {
            if n == 0 {
                return Err(Error::InvalidDistribution);
            }
            Ok(rng.random_range(0..n) as f64)
        }
    }
}
