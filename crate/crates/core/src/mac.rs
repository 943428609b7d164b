//! Four access categories per node with bounded FIFO queues.
//!
//! Service is strict priority (AC0 first) by default. A weighted round-robin
//! discipline is available for comparison; it keeps every category moving
//! under overload at the cost of weaker isolation for signaling.

use alloc::collections::VecDeque;

use crate::packet::{Packet, PacketClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AccessCategory {
    Ac0,
    Ac1,
    Ac2,
    Ac3,
}

impl AccessCategory {
    pub const ALL: [AccessCategory; 4] =
        [AccessCategory::Ac0, AccessCategory::Ac1, AccessCategory::Ac2, AccessCategory::Ac3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            AccessCategory::Ac0 => "AC0",
            AccessCategory::Ac1 => "AC1",
            AccessCategory::Ac2 => "AC2",
            AccessCategory::Ac3 => "AC3",
        }
    }
}

impl From<PacketClass> for AccessCategory {
    /// The fixed class → category map.
    fn from(class: PacketClass) -> Self {
        match class {
            PacketClass::Signaling => AccessCategory::Ac0,
            PacketClass::VideoI => AccessCategory::Ac1,
            PacketClass::VideoP => AccessCategory::Ac2,
            PacketClass::VideoB | PacketClass::BestEffort => AccessCategory::Ac3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ServiceDiscipline {
    #[default]
    Strict,
    Weighted,
}

/// Round-robin credits per category for [`ServiceDiscipline::Weighted`].
const WEIGHTS: [u32; 4] = [8, 4, 2, 1];

pub const DEFAULT_QUEUE_CAPACITY: usize = 50;

#[derive(Debug)]
pub enum Enqueue {
    Accepted(AccessCategory),
    /// The mapped queue was full; the packet is handed back.
    Overflow(Packet),
}

/// The four queues of one node.
#[derive(Debug, Clone)]
pub struct MacQueues {
    queues: [VecDeque<Packet>; 4],
    capacity: usize,
    discipline: ServiceDiscipline,
    credits: [u32; 4],
}

impl MacQueues {
    pub fn new(capacity: usize, discipline: ServiceDiscipline) -> Self {
        Self {
            queues: Default::default(),
            capacity,
            discipline,
            credits: WEIGHTS,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self, ac: AccessCategory) -> usize {
        self.queues[ac.index()].len()
    }

    pub fn total_len(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.queues.iter().all(VecDeque::is_empty)
    }

    pub fn enqueue(&mut self, packet: Packet) -> Enqueue {
        let ac = AccessCategory::from(packet.class);
        let q = &mut self.queues[ac.index()];
        if q.len() >= self.capacity {
            return Enqueue::Overflow(packet);
        }
        q.push_back(packet);
        Enqueue::Accepted(ac)
    }

    pub fn dequeue_next(&mut self) -> Option<Packet> {
        match self.discipline {
            ServiceDiscipline::Strict => self.queues.iter_mut().find_map(VecDeque::pop_front),
            ServiceDiscipline::Weighted => self.dequeue_weighted(),
        }
    }

    fn dequeue_weighted(&mut self) -> Option<Packet> {
        if self.is_empty() {
            return None;
        }
        loop {
            for ac in 0..4 {
                if self.credits[ac] > 0 && !self.queues[ac].is_empty() {
                    self.credits[ac] -= 1;
                    return self.queues[ac].pop_front();
                }
            }
            self.credits = WEIGHTS;
        }
    }

    /// Removes every queued packet, highest priority first.
    pub fn drain(&mut self) -> impl Iterator<Item = Packet> + '_ {
        self.queues.iter_mut().flat_map(|q| q.drain(..))
    }
}

/// `1 + number of backlogged neighbours`.
pub fn neighborhood_load(backlogged_neighbors: usize) -> f64 {
    1.0 + backlogged_neighbors as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::{Payload, Route};
    use alloc::vec::Vec;

    fn pkt(id: u64, class: PacketClass) -> Packet {
        Packet {
            id,
            class,
            size_bytes: 100,
            created: 0.0,
            route: Route::from(Vec::new()),
            hop: 0,
            payload: Payload::Beacon,
        }
    }

    #[test]
    fn class_map() {
        assert_eq!(AccessCategory::from(PacketClass::VideoI), AccessCategory::Ac1);
        assert_eq!(AccessCategory::from(PacketClass::VideoP), AccessCategory::Ac2);
        assert_eq!(AccessCategory::from(PacketClass::VideoB), AccessCategory::Ac3);
        assert_eq!(AccessCategory::from(PacketClass::BestEffort), AccessCategory::Ac3);
        assert_eq!(AccessCategory::from(PacketClass::Signaling), AccessCategory::Ac0);
    }

    #[test]
    fn overflow_at_capacity() {
        let mut q = MacQueues::new(DEFAULT_QUEUE_CAPACITY, ServiceDiscipline::Strict);
        for i in 0..50 {
            assert!(matches!(q.enqueue(pkt(i, PacketClass::BestEffort)), Enqueue::Accepted(AccessCategory::Ac3)));
        }
        match q.enqueue(pkt(50, PacketClass::BestEffort)) {
            Enqueue::Overflow(p) => assert_eq!(p.id, 50),
            other => panic!("expected overflow, got {other:?}"),
        }
        // other categories are unaffected
        assert!(matches!(q.enqueue(pkt(51, PacketClass::VideoI)), Enqueue::Accepted(_)));
    }

    #[test]
    fn strict_priority_order() {
        let mut q = MacQueues::new(10, ServiceDiscipline::Strict);
        assert!(q.dequeue_next().is_none());
        q.enqueue(pkt(1, PacketClass::BestEffort));
        assert_eq!(q.dequeue_next().unwrap().id, 1);
        q.enqueue(pkt(2, PacketClass::VideoB));
        q.enqueue(pkt(3, PacketClass::VideoI));
        q.enqueue(pkt(4, PacketClass::VideoI));
        q.enqueue(pkt(5, PacketClass::Signaling));
        let order: Vec<u64> = core::iter::from_fn(|| q.dequeue_next().map(|p| p.id)).collect();
        assert_eq!(order, [5, 3, 4, 2]);
    }

    #[test]
    fn weighted_service_shares() {
        let mut q = MacQueues::new(100, ServiceDiscipline::Weighted);
        for i in 0..30 {
            q.enqueue(pkt(i, PacketClass::VideoI));
            q.enqueue(pkt(100 + i, PacketClass::VideoB));
        }
        let first: Vec<u64> = (0..10).map(|_| q.dequeue_next().unwrap().id).collect();
        // 4 AC1 credits then 1 AC3 credit per round
        assert_eq!(first, [0, 1, 2, 3, 100, 4, 5, 6, 7, 101]);
    }

    #[test]
    fn load_factor() {
        assert_eq!(neighborhood_load(0), 1.0);
        assert_eq!(neighborhood_load(3), 4.0);
    }

    proptest::proptest! {
        #[test]
        fn fifo_within_category(classes in proptest::collection::vec(0usize..5, 1..200)) {
            let mut q = MacQueues::new(1000, ServiceDiscipline::Strict);
            for (i, c) in classes.iter().enumerate() {
                q.enqueue(pkt(i as u64, PacketClass::ALL[*c]));
            }
            let mut last = [None::<u64>; 4];
            while let Some(p) = q.dequeue_next() {
                let ac = AccessCategory::from(p.class).index();
                if let Some(prev) = last[ac] {
                    proptest::prop_assert!(p.id > prev);
                }
                last[ac] = Some(p.id);
            }
        }
    }
}
