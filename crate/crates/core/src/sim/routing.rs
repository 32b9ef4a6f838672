use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use super::topology::Network;
use super::SimMessage;
use crate::ids::{NodeId, SliceId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("node {node} is not a member of slice {slice}")]
    NotInSlice { node: NodeId, slice: SliceId },
    #[error("no non-isolated path inside slice {slice} from {src} to {dst}")]
    NoRoute { src: NodeId, dst: NodeId, slice: SliceId },
}

/// Shortest hop-count path for `msg` inside its slice, skipping isolated
/// nodes. Among equally short paths the lexicographically smallest node
/// sequence wins.
pub fn route(network: &Network, msg: &SimMessage) -> Result<Vec<NodeId>, RouteError> {
    route_within(network, &msg.slice_id, &msg.src, &msg.dst, &BTreeSet::new())
}

/// As [`route`], additionally avoiding `avoid` (used when rerouting a
/// message that has already visited some nodes).
pub fn route_within(
    network: &Network,
    slice: &SliceId,
    src: &NodeId,
    dst: &NodeId,
    avoid: &BTreeSet<NodeId>,
) -> Result<Vec<NodeId>, RouteError> {
    for n in [src, dst] {
        if !network.in_slice(n, slice) {
            return Err(RouteError::NotInSlice { node: n.clone(), slice: slice.clone() });
        }
    }
    let no_route = || RouteError::NoRoute { src: src.clone(), dst: dst.clone(), slice: slice.clone() };
    let usable = |n: &NodeId| network.in_slice(n, slice) && !network.is_isolated(n) && !avoid.contains(n);
    if !usable(src) || !usable(dst) {
        return Err(no_route());
    }

    // BFS with sorted neighbour expansion: the first parent to reach a node
    // lies on the lexicographically smallest shortest path to it.
    let mut parent: BTreeMap<&NodeId, &NodeId> = BTreeMap::new();
    let mut seen: BTreeSet<&NodeId> = BTreeSet::from([src]);
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        if u == dst {
            break;
        }
        for v in network.neighbors(u) {
            if usable(v) && seen.insert(v) {
                parent.insert(v, u);
                queue.push_back(v);
            }
        }
    }
    if !seen.contains(dst) {
        return Err(no_route());
    }
    let mut path = vec![dst.clone()];
    let mut cur = dst;
    while let Some(&p) = parent.get(cur) {
        path.push(p.clone());
        cur = p;
    }
    path.reverse();
    Ok(path)
}
