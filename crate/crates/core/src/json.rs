//! JSON encoding of arcs.
//!
//! The schema is `{"n": int, "delta": float|null, "segments": [{"j": int,
//! "t0": float, "t1": float, "samples": [[t, x0, ..., x_{n-1}], ...]}]}`.
//! Serialization uses the shortest decimal form that parses back to the same
//! double, so write followed by read reproduces every finite value bit for
//! bit.

use serde::{Deserialize, Serialize};

use crate::domain::{HybridArc, MemoryArc, Segment};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct ArcJson {
    n: usize,
    delta: Option<f64>,
    segments: Vec<SegmentJson>,
}

#[derive(Serialize, Deserialize)]
struct SegmentJson {
    j: i64,
    t0: f64,
    t1: f64,
    samples: Vec<Vec<f64>>,
}

fn encode(arc: &HybridArc, delta: Option<f64>) -> ArcJson {
    let segments = arc
        .segments()
        .iter()
        .map(|seg| SegmentJson {
            j: seg.j(),
            t0: seg.t0(),
            t1: seg.t1(),
            samples: (0..seg.len())
                .map(|i| {
                    let (t, x) = seg.sample(i);
                    let mut row = Vec::with_capacity(x.len() + 1);
                    row.push(t);
                    row.extend_from_slice(x);
                    row
                })
                .collect(),
        })
        .collect();
    ArcJson { n: arc.n(), delta, segments }
}

fn decode(parsed: ArcJson) -> Result<(HybridArc, Option<f64>)> {
    let n = parsed.n;
    let mut segments = Vec::with_capacity(parsed.segments.len());
    for seg in parsed.segments {
        let mut times = Vec::with_capacity(seg.samples.len());
        let mut values = Vec::with_capacity(seg.samples.len() * n);
        for row in &seg.samples {
            if row.len() != n + 1 {
                return Err(Error::InvalidArc(format!(
                    "segment {}: sample row has {} entries, expected {}",
                    seg.j,
                    row.len(),
                    n + 1
                )));
            }
            times.push(row[0]);
            values.extend_from_slice(&row[1..]);
        }
        let built = Segment::new(seg.j, times, values)?;
        if built.t0() != seg.t0 || built.t1() != seg.t1 {
            return Err(Error::InvalidArc(format!(
                "segment {}: declared interval [{}, {}] disagrees with samples [{}, {}]",
                seg.j,
                seg.t0,
                seg.t1,
                built.t0(),
                built.t1()
            )));
        }
        segments.push(built);
    }
    Ok((HybridArc::new(n, segments)?, parsed.delta))
}

/// Serializes an arc, with an optional memory size recorded in `delta`.
pub fn arc_to_json(arc: &HybridArc, delta: Option<f64>) -> String {
    serde_json::to_string(&encode(arc, delta)).expect("arc serialization cannot fail")
}

pub fn memory_arc_to_json(phi: &MemoryArc) -> String {
    arc_to_json(phi.arc(), Some(phi.delta()))
}

/// Parses an arc plus the optional memory size stored alongside it.
pub fn arc_from_json(text: &str) -> Result<(HybridArc, Option<f64>)> {
    let parsed: ArcJson =
        serde_json::from_str(text).map_err(|e| Error::InvalidArc(format!("json: {e}")))?;
    decode(parsed)
}

/// Parses an arc that must carry a memory size and validates it as a memory
/// arc of that size.
pub fn memory_arc_from_json(text: &str) -> Result<MemoryArc> {
    let (arc, delta) = arc_from_json(text)?;
    let delta = delta.ok_or_else(|| {
        Error::InvalidArc("memory arc json must set \"delta\"".into())
    })?;
    MemoryArc::from_arc(arc, delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_identical() {
        let times = vec![-3.0, -1.0 / 3.0, 0.0, 0.1, 1e-300_f64.mul_add(1e150, 0.7)];
        let values = times.iter().map(|t| t * 0.3 + 1e-17).collect();
        let arc = HybridArc::from_grid(1, times, values).unwrap();
        let text = arc_to_json(&arc, Some(3.0));
        let (back, delta) = arc_from_json(&text).unwrap();
        assert_eq!(back, arc);
        assert_eq!(delta, Some(3.0));
        assert_eq!(arc_to_json(&back, delta), text);
    }

    #[test]
    fn schema_field_order_is_fixed() {
        let arc = HybridArc::from_grid(2, vec![0.0, 1.0], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let text = arc_to_json(&arc, None);
        assert_eq!(
            text,
            "{\"n\":2,\"delta\":null,\"segments\":[{\"j\":0,\"t0\":0.0,\"t1\":1.0,\"samples\":[[0.0,1.0,2.0],[1.0,3.0,4.0]]}]}"
        );
    }

    #[test]
    fn memory_arc_json_keeps_delta_and_validates() {
        let hist = HybridArc::from_grid(1, vec![-3.0, 0.0], vec![1.0, 1.0]).unwrap();
        let phi = MemoryArc::from_arc(hist, 3.0).unwrap();
        let text = memory_arc_to_json(&phi);
        let back = memory_arc_from_json(&text).unwrap();
        assert_eq!(back.delta(), 3.0);
        assert_eq!(back.arc(), phi.arc());

        let no_delta = arc_to_json(phi.arc(), None);
        assert!(memory_arc_from_json(&no_delta).is_err());
    }

    #[test]
    fn malformed_json_reports_invalid_arc() {
        assert!(matches!(arc_from_json("{"), Err(Error::InvalidArc(_))));
        let bad_row = "{\"n\":2,\"delta\":null,\"segments\":[{\"j\":0,\"t0\":0.0,\"t1\":0.0,\"samples\":[[0.0,1.0]]}]}";
        assert!(matches!(arc_from_json(bad_row), Err(Error::InvalidArc(_))));
        let bad_interval = "{\"n\":1,\"delta\":null,\"segments\":[{\"j\":0,\"t0\":0.0,\"t1\":9.0,\"samples\":[[0.0,1.0],[1.0,2.0]]}]}";
        assert!(matches!(arc_from_json(bad_interval), Err(Error::InvalidArc(_))));
    }
}
