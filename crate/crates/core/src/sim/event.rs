use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devices::NetworkKind;
use crate::fixed::Fixed4;
use crate::ids::{DeviceId, NodeId, SliceId, Tick};
use crate::trust::{Modality, ScoreKind};

pub type MsgId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    NoRoute,
    /// Emitted behind an isolated node; reduced-functionality mode.
    SourceIsolated,
    /// Already carried by a node that has since been isolated.
    Quarantined,
    BufferOverflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandoverOutcome {
    Completed,
    TargetUnreachable,
}

/// Ground truth for a biometric sample, recorded so that error rates can be
/// recomputed from the event log alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleTruth {
    pub label: ScoreKind,
    pub scores: Vec<(Modality, Fixed4)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    Emit {
        msg_id: MsgId,
        device: Option<DeviceId>,
        src: NodeId,
        dst: NodeId,
        slice: SliceId,
        sequence_no: Option<u64>,
        sample: Option<SampleTruth>,
    },
    Deliver {
        msg_id: MsgId,
        hops: Vec<NodeId>,
    },
    Drop {
        msg_id: MsgId,
        reason: DropReason,
        hops: Vec<NodeId>,
    },
    AnomalyFlagged {
        node: NodeId,
        count: u64,
        z: f64,
    },
    Isolate {
        node: NodeId,
    },
    Resolve {
        node: NodeId,
    },
    Reintegrate {
        node: NodeId,
    },
    Handover {
        device: DeviceId,
        from: NetworkKind,
        to: NetworkKind,
        outcome: HandoverOutcome,
        buffered: u32,
    },
    Reroute {
        msg_id: MsgId,
        at: NodeId,
        path: Vec<NodeId>,
    },
    CompromiseStart {
        device: DeviceId,
        node: NodeId,
        multiplier: u32,
    },
    ScoreMode {
        device: DeviceId,
        mode: ScoreKind,
    },
}

/// One entry of the event log, totally ordered by `(tick, seq)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub tick: Tick,
    pub seq: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Error)]
#[error("corrupt event log at line {line}: {message}")]
pub struct EventLogError {
    pub line: usize,
    pub message: String,
}

/// One JSON object per line, keys in declaration order.
pub fn events_to_jsonl(events: &[SimEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}

pub fn events_from_jsonl(text: &str) -> Result<Vec<SimEvent>, EventLogError> {
    text.split_terminator('\n')
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| EventLogError { line: i + 1, message: e.to_string() })
        })
        .collect()
}
