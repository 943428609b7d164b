//! Plain-text input formats: waypoint traces, tie-strength matrices,
//! tie-sign ledgers and video frame traces.

use std::fmt;
use std::fmt::Write as _;

use qsmvm_core::mobility::{AreaSpec, MobilityTrace, TraceError, Waypoint};
use qsmvm_core::social::{SignType, TieSignLedger, TsMatrix};
use qsmvm_core::video::{FrameType, TraceFrame};
use qsmvm_core::NodeId;

/// A parse failure, with the 1-based line it was found on when there is one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatError {
    pub line: Option<usize>,
    pub reason: String,
}

impl FormatError {
    fn at(line: usize, reason: impl Into<String>) -> Self {
        Self { line: Some(line), reason: reason.into() }
    }

    fn whole(reason: impl Into<String>) -> Self {
        Self { line: None, reason: reason.into() }
    }
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.reason),
            None => f.write_str(&self.reason),
        }
    }
}

impl std::error::Error for FormatError {}

/// Non-blank lines that are not `#` comments, with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn number<T: std::str::FromStr>(line: usize, token: &str, what: &str) -> Result<T, FormatError> {
    token.parse().map_err(|_| FormatError::at(line, format!("invalid {what} `{token}`")))
}

/// Parses a waypoint trace: one node per line, each line a sequence of
/// whitespace-separated `time x y` triples with strictly increasing times.
pub fn parse_trace(text: &str, area: AreaSpec) -> Result<MobilityTrace, FormatError> {
    let mut nodes = Vec::new();
    let mut lines = Vec::new();
    for (line, content) in content_lines(text) {
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if !tokens.len().is_multiple_of(3) {
            return Err(FormatError::at(line, format!("{} values do not form `time x y` triples", tokens.len())));
        }
        let mut wps: Vec<Waypoint> = Vec::with_capacity(tokens.len() / 3);
        for triple in tokens.chunks(3) {
            let wp = Waypoint {
                time: number(line, triple[0], "time")?,
                x: number(line, triple[1], "x")?,
                y: number(line, triple[2], "y")?,
            };
            if let Some(prev) = wps.last() {
                if !(wp.time > prev.time) {
                    return Err(FormatError::at(line, format!("time {} does not increase", triple[0])));
                }
            }
            wps.push(wp);
        }
        nodes.push(wps);
        lines.push(line);
    }
    MobilityTrace::new(area, nodes).map_err(|e| match e {
        TraceError::NoNodes => FormatError::whole("no nodes"),
        TraceError::EmptyNode { node }
        | TraceError::NonMonotonic { node, .. }
        | TraceError::OutOfArea { node, .. }
        | TraceError::NotFinite { node, .. } => FormatError::at(lines[node], e.to_string()),
    })
}

pub fn write_trace(trace: &MobilityTrace) -> String {
    let mut out = String::new();
    for i in 0..trace.node_count() {
        let wps = trace.waypoints(NodeId::new(i)).unwrap_or(&[]);
        for (k, wp) in wps.iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{} {} {}", wp.time, wp.x, wp.y);
        }
        out.push('\n');
    }
    out
}

/// Parses a tie-strength matrix: a header line holding `n`, then `n` rows of
/// `n` integers in `0..=4` with a zero diagonal.
pub fn parse_ts_matrix(text: &str) -> Result<TsMatrix, FormatError> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| FormatError::whole("missing header"))?;
    let n: usize = number(hline, header, "size")?;
    if n == 0 {
        return Err(FormatError::at(hline, "size must be positive"));
    }
    let mut values = Vec::with_capacity(n * n);
    let mut last = hline;
    for row in 0..n {
        let (line, content) = lines
            .next()
            .ok_or_else(|| FormatError::at(last, format!("expected {n} rows, found {row}")))?;
        last = line;
        let cells: Vec<&str> = content.split_whitespace().collect();
        if cells.len() != n {
            return Err(FormatError::at(line, format!("expected {n} values, found {}", cells.len())));
        }
        for (col, cell) in cells.iter().enumerate() {
            let v: u8 = number(line, cell, "tie strength")?;
            if v > 4 {
                return Err(FormatError::at(line, format!("tie strength {v} outside 0..=4")));
            }
            if row == col && v != 0 {
                return Err(FormatError::at(line, "diagonal entry must be 0"));
            }
            values.push(v);
        }
    }
    if let Some((line, _)) = lines.next() {
        return Err(FormatError::at(line, format!("unexpected row after {n} rows")));
    }
    TsMatrix::from_rows(n, values).map_err(|e| FormatError::whole(e.to_string()))
}

pub fn write_ts_matrix(m: &TsMatrix) -> String {
    let mut out = format!("{}\n", m.size());
    for u in 0..m.size() {
        let row: Vec<String> = m.row(u).iter().map(u8::to_string).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

fn fields(content: &str) -> Vec<&str> {
    if content.contains(',') {
        content.split(',').map(str::trim).collect()
    } else {
        content.split_whitespace().collect()
    }
}

/// Parses a tie-sign ledger: rows `u,v,sign_type,count,last_update` where
/// `sign_type` is a sign name or index and `last_update` is in epoch seconds.
/// A leading header row is skipped.
pub fn parse_ledger(text: &str) -> Result<TieSignLedger, FormatError> {
    let mut ledger = TieSignLedger::new();
    for (k, (line, content)) in content_lines(text).enumerate() {
        let f = fields(content);
        if k == 0 && f.first().is_some_and(|s| s.parse::<u32>().is_err()) {
            continue;
        }
        if f.len() != 5 {
            return Err(FormatError::at(line, format!("expected 5 fields, found {}", f.len())));
        }
        let u: u32 = number(line, f[0], "node")?;
        let v: u32 = number(line, f[1], "node")?;
        let sign = SignType::from_name(f[2])
            .or_else(|| f[2].parse::<usize>().ok().and_then(SignType::new))
            .ok_or_else(|| FormatError::at(line, format!("unknown sign type `{}`", f[2])))?;
        let count: u64 = number(line, f[3], "count")?;
        let at: f64 = number(line, f[4], "timestamp")?;
        if !at.is_finite() {
            return Err(FormatError::at(line, "timestamp must be finite"));
        }
        ledger.record(NodeId(u), NodeId(v), sign, count, at);
    }
    Ok(ledger)
}

/// Parses a frame-size trace: rows `frame_index,type,size_bytes` with
/// consecutive indices and type `I`, `P` or `B`. A leading header row is
/// skipped.
pub fn parse_video_trace(text: &str) -> Result<Vec<TraceFrame>, FormatError> {
    let mut frames = Vec::new();
    let mut expected: Option<u64> = None;
    for (k, (line, content)) in content_lines(text).enumerate() {
        let f = fields(content);
        if k == 0 && f.first().is_some_and(|s| s.parse::<u64>().is_err()) {
            continue;
        }
        if f.len() != 3 {
            return Err(FormatError::at(line, format!("expected 3 fields, found {}", f.len())));
        }
        let index: u64 = number(line, f[0], "frame index")?;
        if let Some(e) = expected {
            if index != e {
                return Err(FormatError::at(line, format!("frame index {index}, expected {e}")));
            }
        }
        expected = Some(index + 1);
        let mut chars = f[1].chars();
        let frame_type = match (chars.next(), chars.next()) {
            (Some(c), None) => FrameType::from_char(c.to_ascii_uppercase()),
            _ => None,
        }
        .ok_or_else(|| FormatError::at(line, format!("unknown frame type `{}`", f[1])))?;
        let size_bytes: u32 = number(line, f[2], "frame size")?;
        if size_bytes == 0 {
            return Err(FormatError::at(line, "frame size must be positive"));
        }
        frames.push(TraceFrame { frame_type, size_bytes });
    }
    if frames.is_empty() {
        return Err(FormatError::whole("no frames"));
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn area() -> AreaSpec {
        AreaSpec { width: 100.0, height: 100.0, node_count: 0 }
    }

    #[test]
    fn trace_parses_and_interpolates() {
        let t = parse_trace("0 0 0 10 10 0\n# comment\n\n0 5 5\n", area()).unwrap();
        assert_eq!(t.node_count(), 2);
        let p = t.position_at(NodeId(0), 5.0).unwrap();
        assert!((p.x - 5.0).abs() < 1e-12 && p.y == 0.0);
    }

    #[test]
    fn trace_errors_name_the_line() {
        let e = parse_trace("0 0 0\n0 1 1 1 2 2 1 3 3\n", area()).unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(e.reason.contains("does not increase"), "{e}");
        let e = parse_trace("0 0 0\n\n0 1\n", area()).unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = parse_trace("0 0 0\n0 x 1\n", area()).unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse_trace("0 0 0\n0 500 1\n", area()).unwrap_err();
        assert_eq!(e.line, Some(2));
    }

    #[test]
    fn empty_trace_has_no_nodes() {
        let e = parse_trace("", area()).unwrap_err();
        assert_eq!(e.to_string(), "no nodes");
        assert_eq!(parse_trace("# nothing\n\n", area()).unwrap_err().to_string(), "no nodes");
    }

    #[test]
    fn trace_round_trips_exactly() {
        let txt = "0 0.1 0.2 3.3333333333333335 7.000000000000001 99.99999\n0 50 50\n";
        let t = parse_trace(txt, area()).unwrap();
        let again = parse_trace(&write_trace(&t), area()).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn ts_matrix_round_trip_and_errors() {
        let m = parse_ts_matrix("3\n0 1 4\n2 0 3\n0 0 0\n").unwrap();
        assert_eq!(m.get(NodeId(0), NodeId(2)), 4);
        assert_eq!(m.get(NodeId(1), NodeId(0)), 2);
        assert_eq!(parse_ts_matrix(&write_ts_matrix(&m)).unwrap(), m);

        assert_eq!(parse_ts_matrix("2\n0 5\n1 0\n").unwrap_err().line, Some(2));
        assert_eq!(parse_ts_matrix("2\n0 1\n1 1\n").unwrap_err().line, Some(3));
        assert_eq!(parse_ts_matrix("2\n0 1 2\n1 0\n").unwrap_err().line, Some(2));
        assert_eq!(parse_ts_matrix("2\n0 1\n").unwrap_err().line, Some(2));
        assert_eq!(parse_ts_matrix("2\n0 1\n1 0\n0 0\n").unwrap_err().line, Some(4));
        assert!(parse_ts_matrix("").is_err());
        assert_eq!(parse_ts_matrix("x\n").unwrap_err().line, Some(1));
    }

    #[test]
    fn ledger_rows() {
        let txt = "u,v,sign_type,count,last_update\n0,1,fb_private_messages,3,1000\n0,1,fb_private_messages,2,2000\n1,0,13,1,5\n";
        let l = parse_ledger(txt).unwrap();
        let p = SignType::from_name("fb_private_messages").unwrap();
        let rec = l.get(NodeId(0), NodeId(1), p).unwrap();
        assert_eq!(rec.count, 5);
        assert_eq!(rec.last_update, 2000.0);
        assert_eq!(l.count(NodeId(1), NodeId(0), SignType::new(13).unwrap()), 1);
        assert_eq!(parse_ledger("0,1,nope,1,0\n").unwrap_err().line, Some(1));
        assert_eq!(parse_ledger("0,1,1,1\n").unwrap_err().line, Some(1));
    }

    #[test]
    fn video_trace_rows() {
        let v = parse_video_trace("frame_index,type,size_bytes\n0,I,4000\n1,b,800\n2,P,1600\n").unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v[1].frame_type, FrameType::B);
        assert_eq!(v[2].size_bytes, 1600);
        assert_eq!(parse_video_trace("0 I 10\n2 P 10\n").unwrap_err().line, Some(2));
        assert_eq!(parse_video_trace("0 X 10\n").unwrap_err().line, Some(1));
        assert_eq!(parse_video_trace("0 I 0\n").unwrap_err().line, Some(1));
        assert!(parse_video_trace("").is_err());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn area() -> AreaSpec {
        AreaSpec { width: 500.0, height: 500.0, node_count: 0 }
    }

    fn node() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        prop::collection::vec((0.001f64..50.0, 0.0f64..=500.0, 0.0f64..=500.0), 1..6)
    }

    proptest! {
        #[test]
        fn any_trace_round_trips(nodes in prop::collection::vec(node(), 1..6)) {
            let text: String = nodes
                .iter()
                .map(|legs| {
                    let mut t = 0.0;
                    let mut line = Vec::new();
                    for (i, &(dt, x, y)) in legs.iter().enumerate() {
                        if i > 0 {
                            t += dt;
                        }
                        line.push(format!("{t} {x} {y}"));
                    }
                    line.join(" ") + "\n"
                })
                .collect();
            let t = parse_trace(&text, area()).unwrap();
            prop_assert_eq!(parse_trace(&write_trace(&t), area()).unwrap(), t);
        }

        #[test]
        fn any_ts_matrix_round_trips(n in 2usize..10, seed in prop::collection::vec(0u8..=4, 100)) {
            let values = (0..n * n).map(|i| if i % (n + 1) == 0 { 0 } else { seed[i % seed.len()] }).collect();
            let m = TsMatrix::from_rows(n, values).unwrap();
            prop_assert_eq!(parse_ts_matrix(&write_ts_matrix(&m)).unwrap(), m);
        }
    }
}
