use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::anomaly::{AnomalyBaseline, AnomalyParams};
use crate::ids::{NodeId, SliceId, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    DeviceGateway,
    EdgeNode,
    CoreNode,
    PublicGateway,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IsolationState {
    Normal,
    Isolated { since: Tick },
    /// Still cut off; waiting out the cooldown after an explicit resolve.
    Resolving { since: Tick, resolved_at: Tick },
}

impl IsolationState {
    pub fn is_isolated(self) -> bool {
        !matches!(self, IsolationState::Normal)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkNode {
    pub node_id: NodeId,
    pub kind: NodeKind,
    pub slice_memberships: BTreeSet<SliceId>,
    pub isolation: IsolationState,
    pub baseline: AnomalyBaseline<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slice {
    pub slice_id: SliceId,
    pub member_nodes: BTreeSet<NodeId>,
    /// Recorded only; drives no behaviour.
    pub advertised: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: NodeId,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: NodeId,
    pub b: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    pub id: SliceId,
    pub members: Vec<NodeId>,
    #[serde(default)]
    pub advertised: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyConfig {
    #[serde(default)]
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub slices: Vec<SliceSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid topology at {element}: {reason}")]
pub struct TopologyError {
    /// Path of the first offending element, e.g. `links[2].b`.
    pub element: String,
    pub reason: String,
}

fn invalid(element: String, reason: impl Into<String>) -> TopologyError {
    TopologyError { element, reason: reason.into() }
}

/// Validated, undirected network graph with slices.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: BTreeMap<NodeId, NetworkNode>,
    adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>,
    slices: BTreeMap<SliceId, Slice>,
}

pub fn build_topology(config: &TopologyConfig, anomaly: &AnomalyParams<f64>) -> Result<Network, TopologyError> {
    let mut nodes = BTreeMap::new();
    let mut adjacency: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for (i, n) in config.nodes.iter().enumerate() {
        if n.id.as_str().is_empty() {
            return Err(invalid(format!("nodes[{i}].id"), "empty node id"));
        }
        let node = NetworkNode {
            node_id: n.id.clone(),
            kind: n.kind,
            slice_memberships: BTreeSet::new(),
            isolation: IsolationState::Normal,
            baseline: AnomalyBaseline::new(anomaly),
        };
        if nodes.insert(n.id.clone(), node).is_some() {
            return Err(invalid(format!("nodes[{i}].id"), format!("duplicate node {}", n.id)));
        }
        adjacency.insert(n.id.clone(), BTreeSet::new());
    }
    for (i, l) in config.links.iter().enumerate() {
        for (end, id) in [("a", &l.a), ("b", &l.b)] {
            if !nodes.contains_key(id) {
                return Err(invalid(format!("links[{i}].{end}"), format!("undeclared node {id}")));
            }
        }
        if l.a == l.b {
            return Err(invalid(format!("links[{i}]"), format!("self-loop on {}", l.a)));
        }
        adjacency.get_mut(&l.a).unwrap().insert(l.b.clone());
        adjacency.get_mut(&l.b).unwrap().insert(l.a.clone());
    }
    let mut slices = BTreeMap::new();
    for (i, s) in config.slices.iter().enumerate() {
        if s.members.is_empty() {
            return Err(invalid(format!("slices[{i}].members"), format!("slice {} has no members", s.id)));
        }
        let mut members = BTreeSet::new();
        for (j, m) in s.members.iter().enumerate() {
            let node = nodes
                .get_mut(m)
                .ok_or_else(|| invalid(format!("slices[{i}].members[{j}]"), format!("undeclared node {m}")))?;
            node.slice_memberships.insert(s.id.clone());
            members.insert(m.clone());
        }
        let slice = Slice { slice_id: s.id.clone(), member_nodes: members, advertised: s.advertised };
        if slices.insert(s.id.clone(), slice).is_some() {
            return Err(invalid(format!("slices[{i}].id"), format!("duplicate slice {}", s.id)));
        }
    }
    Ok(Network { nodes, adjacency, slices })
}

impl Network {
    pub fn node(&self, id: &NodeId) -> Option<&NetworkNode> {
        self.nodes.get(id)
    }

    pub(crate) fn node_mut(&mut self, id: &NodeId) -> Option<&mut NetworkNode> {
        self.nodes.get_mut(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NetworkNode> {
        self.nodes.values()
    }

    pub fn slice(&self, id: &SliceId) -> Option<&Slice> {
        self.slices.get(id)
    }

    pub fn slices(&self) -> impl Iterator<Item = &Slice> {
        self.slices.values()
    }

    /// Neighbours in ascending id order.
    pub fn neighbors(&self, id: &NodeId) -> impl Iterator<Item = &NodeId> {
        self.adjacency.get(id).into_iter().flatten()
    }

    pub fn is_isolated(&self, id: &NodeId) -> bool {
        self.nodes.get(id).is_some_and(|n| n.isolation.is_isolated())
    }

    pub fn in_slice(&self, node: &NodeId, slice: &SliceId) -> bool {
        self.slices.get(slice).is_some_and(|s| s.member_nodes.contains(node))
    }
}
