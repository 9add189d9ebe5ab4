//! Line-delimited JSON event trace. Times are virtual microseconds.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::engine::{NodeId, SimTime};
use crate::objective::Rank;
use crate::scenario::TrafficClassName;
use crate::telemetry::PacketOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadioMode {
    Tx,
    Rx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlKind {
    Dio,
    Dis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TraceRecord {
    /// Radio switched on for `[start, end)`.
    Radio {
        node: NodeId,
        mode: RadioMode,
        start: SimTime,
        end: SimTime,
    },
    /// Rank or parent changed.
    Route {
        time: SimTime,
        node: NodeId,
        rank: Rank,
        parent: Option<NodeId>,
    },
    /// A DIO or DIS went on the air.
    Control {
        time: SimTime,
        node: NodeId,
        message: ControlKind,
    },
    /// Final fate of a measured packet.
    Packet {
        uid: u64,
        origin: NodeId,
        class: TrafficClassName,
        generated: SimTime,
        outcome: PacketOutcome,
        hops: u8,
        latency: SimTime,
    },
}

pub fn write_trace<W: Write>(records: &[TraceRecord], mut out: W) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_trace<R: BufRead>(input: R) -> io::Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(io::Error::other)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::DropCause;

    #[test]
    fn round_trip() {
        let recs = vec![
            TraceRecord::Radio {
                node: NodeId(3),
                mode: RadioMode::Tx,
                start: SimTime::from_micros(10),
                end: SimTime::from_micros(20),
            },
            TraceRecord::Route {
                time: SimTime::from_secs(1),
                node: NodeId(2),
                rank: Rank(512),
                parent: Some(NodeId(0)),
            },
            TraceRecord::Packet {
                uid: 7,
                origin: NodeId(4),
                class: TrafficClassName::Critical,
                generated: SimTime::from_secs(70),
                outcome: PacketOutcome::Dropped(DropCause::NoRoute),
                hops: 0,
                latency: SimTime::ZERO,
            },
        ];
        let mut buf = Vec::new();
        write_trace(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with(r#"{"kind":"radio","node":3,"mode":"tx","start":10,"end":20}"#));
        assert_eq!(read_trace(&buf[..]).unwrap(), recs);
    }
}
