//! Node motion: random-waypoint trace generation and piecewise-linear
//! position lookup over waypoint traces.

use alloc::vec::Vec;

use rand::Rng;

use crate::sim::Seconds;
use crate::{Error, NodeId};

/// Simulation area and population.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AreaSpec {
    pub width: f64,
    pub height: f64,
    pub node_count: usize,
}

impl AreaSpec {
    /// Area sized `width x height` metres holding `density` nodes per km².
    pub fn with_density(width: f64, height: f64, density: f64) -> Self {
        let node_count = libm::round(density * width * height / 1.0e6) as usize;
        Self { width, height, node_count }
    }

    /// Nodes per km².
    pub fn density(&self) -> f64 {
        self.node_count as f64 / (self.width * self.height / 1.0e6)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.width).contains(&x) && (0.0..=self.height).contains(&y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub time: Seconds,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance(&self, other: &Position) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

/// Why a set of waypoints is not a valid trace.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum TraceError {
    #[error("no nodes")]
    NoNodes,
    #[error("node {node} has no waypoints")]
    EmptyNode { node: usize },
    #[error("node {node}: waypoint {index} time does not increase")]
    NonMonotonic { node: usize, index: usize },
    #[error("node {node}: waypoint {index} lies outside the area")]
    OutOfArea { node: usize, index: usize },
    #[error("node {node}: waypoint {index} has a non-finite value")]
    NotFinite { node: usize, index: usize },
}

/// Random-waypoint parameters. Speeds are drawn uniformly from
/// `(min_speed_fraction * max_speed, max_speed]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WaypointParams {
    pub max_speed: f64,
    pub min_speed_fraction: f64,
    pub pause: Seconds,
}

impl Default for WaypointParams {
    fn default() -> Self {
        Self { max_speed: 2.0, min_speed_fraction: 0.1, pause: 0.0 }
    }
}

/// Per-node waypoint lists. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityTrace {
    area: AreaSpec,
    nodes: Vec<Vec<Waypoint>>,
    duration: Seconds,
}

impl MobilityTrace {
    /// Validates and wraps waypoint lists. `area.node_count` is replaced by the
    /// number of lists supplied.
    pub fn new(mut area: AreaSpec, nodes: Vec<Vec<Waypoint>>) -> Result<Self, TraceError> {
        if nodes.is_empty() {
            return Err(TraceError::NoNodes);
        }
        for (node, wps) in nodes.iter().enumerate() {
            if wps.is_empty() {
                return Err(TraceError::EmptyNode { node });
            }
            for (index, w) in wps.iter().enumerate() {
                if !(w.time.is_finite() && w.x.is_finite() && w.y.is_finite()) {
                    return Err(TraceError::NotFinite { node, index });
                }
                if !area.contains(w.x, w.y) {
                    return Err(TraceError::OutOfArea { node, index });
                }
                if index > 0 && w.time <= wps[index - 1].time {
                    return Err(TraceError::NonMonotonic { node, index });
                }
            }
        }
        area.node_count = nodes.len();
        let duration = nodes
            .iter()
            .filter_map(|w| w.last())
            .map(|w| w.time)
            .fold(0.0, f64::max);
        Ok(Self { area, nodes, duration })
    }

    /// Every node parked at a fixed position for `duration` seconds.
    pub fn stationary(area: AreaSpec, positions: &[Position], duration: Seconds) -> Result<Self, TraceError> {
        let nodes = positions
            .iter()
            .map(|p| alloc::vec![Waypoint { time: 0.0, x: p.x, y: p.y }])
            .collect();
        Ok(Self::new(area, nodes)?.extended_to(duration))
    }

    /// Extends the covered interval to `duration`; nodes hold their last
    /// waypoint. Never shortens.
    pub fn extended_to(mut self, duration: Seconds) -> Self {
        self.duration = self.duration.max(duration);
        self
    }

    pub fn area(&self) -> &AreaSpec {
        &self.area
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn waypoints(&self, node: NodeId) -> Option<&[Waypoint]> {
        self.nodes.get(node.index()).map(Vec::as_slice)
    }

    /// End of the interval the trace covers.
    pub fn end_time(&self) -> Seconds {
        self.duration
    }

    fn segment(&self, node: NodeId, t: Seconds) -> Result<(&Waypoint, Option<&Waypoint>), Error> {
        let wps = self.nodes.get(node.index()).ok_or(Error::UnknownNode)?;
        if !t.is_finite() || t < 0.0 || t > self.duration + 1e-9 {
            return Err(Error::TimeOutOfRange);
        }
        // index of the first waypoint strictly after t
        let after = wps.partition_point(|w| w.time <= t);
        if after == 0 {
            return Ok((&wps[0], None));
        }
        Ok((&wps[after - 1], wps.get(after)))
    }

    /// Position of `node` at time `t`, interpolated linearly between the
    /// bracketing waypoints. Before its first and after its last waypoint a
    /// node holds still.
    pub fn position_at(&self, node: NodeId, t: Seconds) -> Result<Position, Error> {
        let (a, b) = self.segment(node, t)?;
        Ok(match b {
            Some(b) if t >= a.time => {
                let frac = (t - a.time) / (b.time - a.time);
                Position { x: a.x + (b.x - a.x) * frac, y: a.y + (b.y - a.y) * frac }
            }
            _ => Position { x: a.x, y: a.y },
        })
    }

    /// Velocity vector (m/s) of `node` at time `t`.
    pub fn velocity_at(&self, node: NodeId, t: Seconds) -> Result<(f64, f64), Error> {
        let (a, b) = self.segment(node, t)?;
        Ok(match b {
            Some(b) if t >= a.time => {
                let dt = b.time - a.time;
                ((b.x - a.x) / dt, (b.y - a.y) / dt)
            }
            _ => (0.0, 0.0),
        })
    }

    /// Highest speed between consecutive waypoints of any node.
    pub fn max_segment_speed(&self) -> f64 {
        let mut max = 0.0f64;
        for wps in &self.nodes {
            for pair in wps.windows(2) {
                let d = libm::hypot(pair[1].x - pair[0].x, pair[1].y - pair[0].y);
                max = max.max(d / (pair[1].time - pair[0].time));
            }
        }
        max
    }
}

/// Generates a random-waypoint trace covering `[0, duration]`.
///
/// Each node starts at a uniform point, then repeatedly picks a uniform
/// destination and a speed, travels straight there, and pauses. The final
/// segment is cut at `duration` so every trace ends exactly on time.
pub fn generate_waypoint_trace<R: Rng + ?Sized>(
    area: AreaSpec,
    params: WaypointParams,
    duration: Seconds,
    rng: &mut R,
) -> Result<MobilityTrace, Error> {
    if area.node_count == 0 {
        return Err(Error::ZeroNodes);
    }
    if !(params.max_speed > 0.0) || !(0.0..1.0).contains(&params.min_speed_fraction) {
        return Err(Error::InvalidParameter("max_speed"));
    }
    if !(duration >= 0.0) || params.pause < 0.0 {
        return Err(Error::InvalidParameter("duration"));
    }
    let min_speed = params.min_speed_fraction * params.max_speed;
    let mut nodes = Vec::with_capacity(area.node_count);
    for _ in 0..area.node_count {
        let mut x = rng.random_range(0.0..=area.width);
        let mut y = rng.random_range(0.0..=area.height);
        let mut t = 0.0;
        let mut wps = alloc::vec![Waypoint { time: 0.0, x, y }];
        while t < duration {
            let nx = rng.random_range(0.0..=area.width);
            let ny = rng.random_range(0.0..=area.height);
            // (min, max]: 1 - u with u in [0, 1) lands in (0, 1]
            let u: f64 = rng.random();
            let speed = min_speed + (params.max_speed - min_speed) * (1.0 - u);
            let dist = libm::hypot(nx - x, ny - y);
            if dist < 1e-9 {
                continue;
            }
            let arrival = t + dist / speed;
            if arrival >= duration {
                let frac = (duration - t) / (arrival - t);
                wps.push(Waypoint { time: duration, x: x + (nx - x) * frac, y: y + (ny - y) * frac });
                break;
            }
            wps.push(Waypoint { time: arrival, x: nx, y: ny });
            t = arrival;
            x = nx;
            y = ny;
            if params.pause > 0.0 {
                let resume = (t + params.pause).min(duration);
                wps.push(Waypoint { time: resume, x, y });
                t = resume;
            }
        }
        nodes.push(wps);
    }
    Ok(MobilityTrace::new(area, nodes).map_err(Error::Trace)?.extended_to(duration))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reference_area() -> AreaSpec {
        AreaSpec::with_density(520.0, 520.0, 100.0)
    }

    #[test]
    fn density_rounds_to_reference_node_counts() {
        assert_eq!(reference_area().node_count, 27);
        assert_eq!(AreaSpec::with_density(520.0, 520.0, 200.0).node_count, 54);
        assert!((reference_area().density() - 100.0).abs() < 1.0);
    }

    #[test]
    fn generated_trace_respects_bounds_and_speed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trace = generate_waypoint_trace(reference_area(), WaypointParams::default(), 200.0, &mut rng).unwrap();
        assert_eq!(trace.node_count(), 27);
        assert!(trace.max_segment_speed() <= 2.0 + 1e-9);
        assert!((trace.end_time() - 200.0).abs() < 1e-9);
        for n in 0..27 {
            for w in trace.waypoints(NodeId::new(n)).unwrap() {
                assert!(trace.area().contains(w.x, w.y));
            }
        }
    }

    #[test]
    fn zero_duration_gives_initial_positions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trace = generate_waypoint_trace(reference_area(), WaypointParams::default(), 0.0, &mut rng).unwrap();
        for n in 0..27 {
            assert_eq!(trace.waypoints(NodeId::new(n)).unwrap().len(), 1);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let gen = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            generate_waypoint_trace(reference_area(), WaypointParams::default(), 50.0, &mut rng).unwrap()
        };
        assert_eq!(gen(11), gen(11));
        assert_ne!(gen(11), gen(12));
    }

    #[test]
    fn zero_nodes_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let area = AreaSpec { width: 10.0, height: 10.0, node_count: 0 };
        assert_eq!(
            generate_waypoint_trace(area, WaypointParams::default(), 1.0, &mut rng),
            Err(Error::ZeroNodes)
        );
    }

    fn line_trace() -> MobilityTrace {
        let area = AreaSpec { width: 200.0, height: 200.0, node_count: 1 };
        MobilityTrace::new(
            area,
            alloc::vec![alloc::vec![
                Waypoint { time: 0.0, x: 0.0, y: 0.0 },
                Waypoint { time: 10.0, x: 100.0, y: 0.0 },
            ]],
        )
        .unwrap()
    }

    #[test]
    fn interpolates_positions() {
        let trace = line_trace();
        let n = NodeId::new(0);
        assert_eq!(trace.position_at(n, 5.0).unwrap(), Position { x: 50.0, y: 0.0 });
        assert_eq!(trace.position_at(n, 7.0).unwrap(), Position { x: 70.0, y: 0.0 });
        assert_eq!(trace.position_at(n, 10.0).unwrap(), Position { x: 100.0, y: 0.0 });
        assert_eq!(trace.position_at(n, 0.0).unwrap(), Position { x: 0.0, y: 0.0 });
        assert_eq!(trace.velocity_at(n, 3.0).unwrap(), (10.0, 0.0));
    }

    #[test]
    fn position_lookup_errors() {
        let trace = line_trace();
        assert_eq!(trace.position_at(NodeId::new(4), 1.0), Err(Error::UnknownNode));
        assert_eq!(trace.position_at(NodeId::new(0), -1.0), Err(Error::TimeOutOfRange));
        assert_eq!(trace.position_at(NodeId::new(0), 10.5), Err(Error::TimeOutOfRange));
    }

    #[test]
    fn validation_reports_offending_waypoint() {
        let area = AreaSpec { width: 100.0, height: 100.0, node_count: 1 };
        let bad = alloc::vec![alloc::vec![
            Waypoint { time: 1.0, x: 0.0, y: 0.0 },
            Waypoint { time: 0.5, x: 1.0, y: 1.0 },
        ]];
        assert_eq!(MobilityTrace::new(area, bad), Err(TraceError::NonMonotonic { node: 0, index: 1 }));
        let outside = alloc::vec![alloc::vec![Waypoint { time: 0.0, x: 101.0, y: 0.0 }]];
        assert_eq!(MobilityTrace::new(area, outside), Err(TraceError::OutOfArea { node: 0, index: 0 }));
        assert_eq!(MobilityTrace::new(area, alloc::vec![]), Err(TraceError::NoNodes));
    }

    #[test]
    fn random_waypoint_concentrates_toward_center() {
        let area = AreaSpec { width: 520.0, height: 520.0, node_count: 50 };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let trace = generate_waypoint_trace(area, WaypointParams::default(), 2000.0, &mut rng).unwrap();
        let (cx, cy) = (260.0, 260.0);
        let mut rwp = 0.0;
        let mut uni = 0.0;
        let samples = 10_000;
        for i in 0..samples {
            let node = NodeId::new(i % 50);
            // skip the uniform initial placement transient
            let t = 500.0 + 1500.0 * rng.random::<f64>();
            let p = trace.position_at(node, t).unwrap();
            rwp += libm::hypot(p.x - cx, p.y - cy);
            let ux: f64 = rng.random_range(0.0..520.0);
            let uy: f64 = rng.random_range(0.0..520.0);
            uni += libm::hypot(ux - cx, uy - cy);
        }
        assert!(rwp < uni, "rwp {} uniform {}", rwp / samples as f64, uni / samples as f64);
    }

    proptest::proptest! {
        #[test]
        fn positions_are_continuous(seed in 0u64..500, t in 0.0f64..60.0) {
            let area = AreaSpec { width: 300.0, height: 300.0, node_count: 3 };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let trace = generate_waypoint_trace(area, WaypointParams::default(), 60.0, &mut rng).unwrap();
            for n in 0..3 {
                let a = trace.position_at(NodeId::new(n), t).unwrap();
                let b = trace.position_at(NodeId::new(n), (t + 1e-3).min(60.0)).unwrap();
                proptest::prop_assert!(a.distance(&b) <= 2.0 * 1e-3 + 1e-9);
            }
        }
    }
}
