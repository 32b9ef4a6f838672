//! Deterministic discrete-event simulator of the Tier-2 non-public network.

mod anomaly;
mod engine;
mod event;
mod routing;
mod topology;

use serde::{Deserialize, Serialize};

pub use anomaly::{AnomalyBaseline, AnomalyParams, Observation};
pub use engine::{SimConfig, SimError, Simulator};
pub use event::{
    events_from_jsonl, events_to_jsonl, DropReason, EventKind, EventLogError, HandoverOutcome, MsgId, SampleTruth,
    SimEvent,
};
pub use routing::{route, route_within, RouteError};
pub use topology::{
    build_topology, IsolationState, LinkSpec, Network, NetworkNode, NodeKind, NodeSpec, Slice, SliceSpec,
    TopologyConfig, TopologyError,
};

use crate::ids::{NodeId, SliceId, Tick};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimMessage {
    pub msg_id: MsgId,
    pub src: NodeId,
    pub dst: NodeId,
    pub slice_id: SliceId,
    pub payload_size: u32,
    pub created_tick: Tick,
    /// Nodes that have carried the message so far, starting at `src`.
    pub hops: Vec<NodeId>,
}

impl SimMessage {
    pub fn new(msg_id: MsgId, src: NodeId, dst: NodeId, slice_id: SliceId, created_tick: Tick) -> Self {
        SimMessage { msg_id, src, dst, slice_id, payload_size: 0, created_tick, hops: Vec::new() }
    }
}
