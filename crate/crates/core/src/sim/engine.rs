use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::anomaly::{AnomalyParams, Observation};
use super::event::{DropReason, EventKind, HandoverOutcome, MsgId, SampleTruth, SimEvent};
use super::routing::{route_within, RouteError};
use super::topology::{IsolationState, Network};
use super::SimMessage;
use crate::authn::{EncryptedEnvelope, ScorerRegistry};
use crate::devices::{CompromiseProfile, DeviceAgent, DeviceError, Emission, NetworkKind};
use crate::ids::{DeviceId, NodeId, SliceId, Tick};
use crate::trust::ScoreKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Ticks to cross one link.
    pub hop_latency: Tick,
    /// Ticks between an explicit resolve and reintegration.
    pub cooldown: Tick,
    pub handover_duration: Tick,
    /// Samples a device can hold while detached during handover.
    pub handover_buffer: usize,
    pub anomaly: AnomalyParams<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            hop_latency: 1,
            cooldown: 50,
            handover_duration: 5,
            handover_buffer: 10,
            anomaly: AnomalyParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown device {0}")]
    UnknownDevice(DeviceId),
    #[error("device {0} already registered")]
    DuplicateDevice(DeviceId),
    #[error("node {0} is already isolated")]
    AlreadyIsolated(NodeId),
    #[error("node {0} is not isolated")]
    NotIsolated(NodeId),
    #[error("node {0} has not been resolved")]
    NotResolved(NodeId),
    #[error("node {node} cannot rejoin before tick {ready_at}")]
    CooldownPending { node: NodeId, ready_at: Tick },
    #[error("device {device} is attached to the {attached} network")]
    NotAttached { device: DeviceId, attached: NetworkKind },
    #[error("device {device} cannot reach the server through the {to} network")]
    TargetUnreachable { device: DeviceId, to: NetworkKind },
    #[error("device {0} is already handing over")]
    HandoverInProgress(DeviceId),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Route(#[from] RouteError),
}

struct InFlight {
    msg: SimMessage,
    /// Hops still ahead, excluding the node the message is at.
    plan: Vec<NodeId>,
    generation: u32,
    envelope: Option<EncryptedEnvelope>,
    device: Option<DeviceId>,
}

struct Handover {
    from: NetworkKind,
    to: NetworkKind,
    buffer: Vec<Emission>,
}

enum Action {
    Arrive { msg_id: MsgId, generation: u32 },
    Compromise { device: DeviceId, profile: CompromiseProfile },
    Resolve { node: NodeId },
    Reintegrate { node: NodeId },
    HandoverStart { device: DeviceId, to: NetworkKind },
    HandoverComplete { device: DeviceId },
    ScoreMode { device: DeviceId, mode: ScoreKind },
}

// Within a tick: control actions, then arrivals, then device emissions and
// window observation, then late actions (reintegration takes effect for
// the following tick).
const CONTROL: u8 = 0;
const ARRIVAL: u8 = 1;
const LATE: u8 = 3;

/// Single-threaded event loop. Same inputs give the same event log.
pub struct Simulator {
    network: Network,
    config: SimConfig,
    registry: ScorerRegistry,
    server: NodeId,
    devices: BTreeMap<DeviceId, DeviceAgent>,
    handovers: BTreeMap<DeviceId, Handover>,
    in_flight: BTreeMap<MsgId, InFlight>,
    delivered: BTreeMap<MsgId, (DeviceId, EncryptedEnvelope)>,
    queue: BTreeMap<(Tick, u8, u64), Action>,
    queue_seq: u64,
    clock: Tick,
    next_msg_id: MsgId,
    origin_counts: BTreeMap<NodeId, u64>,
    log: Vec<SimEvent>,
}

impl Simulator {
    pub fn new(network: Network, config: SimConfig, registry: ScorerRegistry, server: NodeId) -> Result<Self, SimError> {
        if network.node(&server).is_none() {
            return Err(SimError::UnknownNode(server));
        }
        if config.hop_latency == 0 {
            return Err(SimError::InvalidConfig("hop_latency must be at least 1".into()));
        }
        config.anomaly.validate().map_err(SimError::InvalidConfig)?;
        Ok(Simulator {
            network,
            config,
            registry,
            server,
            devices: BTreeMap::new(),
            handovers: BTreeMap::new(),
            in_flight: BTreeMap::new(),
            delivered: BTreeMap::new(),
            queue: BTreeMap::new(),
            queue_seq: 0,
            clock: 0,
            next_msg_id: 1,
            origin_counts: BTreeMap::new(),
            log: Vec::new(),
        })
    }

    pub fn add_device(&mut self, agent: DeviceAgent) -> Result<(), SimError> {
        let p = agent.profile();
        if self.devices.contains_key(&p.device_id) {
            return Err(SimError::DuplicateDevice(p.device_id.clone()));
        }
        if self.network.slice(&p.slice).is_none() {
            return Err(SimError::InvalidConfig(format!("device {} uses unknown slice {}", p.device_id, p.slice)));
        }
        for gw in [&p.private_gateway, &p.public_gateway].into_iter().flatten() {
            if self.network.node(gw).is_none() {
                return Err(SimError::UnknownNode(gw.clone()));
            }
            if !self.network.in_slice(gw, &p.slice) {
                return Err(SimError::InvalidConfig(format!("gateway {gw} is not in slice {}", p.slice)));
            }
        }
        if !self.network.in_slice(&self.server, &p.slice) {
            return Err(SimError::InvalidConfig(format!("server {} is not in slice {}", self.server, p.slice)));
        }
        self.devices.insert(p.device_id.clone(), agent);
        Ok(())
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn device(&self, id: &DeviceId) -> Option<&DeviceAgent> {
        self.devices.get(id)
    }

    /// Next tick to be processed; external operations are stamped with it.
    pub fn now(&self) -> Tick {
        self.clock
    }

    pub fn events(&self) -> &[SimEvent] {
        &self.log
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    /// Envelope of a delivered device message, with its sender.
    pub fn take_envelope(&mut self, msg_id: MsgId) -> Option<(DeviceId, EncryptedEnvelope)> {
        self.delivered.remove(&msg_id)
    }

    fn schedule(&mut self, tick: Tick, class: u8, action: Action) {
        self.queue_seq += 1;
        self.queue.insert((tick, class, self.queue_seq), action);
    }

    fn known_device(&self, device: &DeviceId) -> Result<(), SimError> {
        if self.devices.contains_key(device) {
            Ok(())
        } else {
            Err(SimError::UnknownDevice(device.clone()))
        }
    }

    pub fn schedule_compromise(&mut self, device: DeviceId, profile: CompromiseProfile) -> Result<(), SimError> {
        self.known_device(&device)?;
        if profile.rate_multiplier < 2 {
            return Err(DeviceError::InvalidMultiplier(profile.rate_multiplier).into());
        }
        self.schedule(profile.start_tick, CONTROL, Action::Compromise { device, profile });
        Ok(())
    }

    pub fn schedule_resolve(&mut self, node: NodeId, tick: Tick) -> Result<(), SimError> {
        if self.network.node(&node).is_none() {
            return Err(SimError::UnknownNode(node));
        }
        self.schedule(tick, CONTROL, Action::Resolve { node });
        Ok(())
    }

    pub fn schedule_handover(&mut self, device: DeviceId, tick: Tick, to: NetworkKind) -> Result<(), SimError> {
        self.known_device(&device)?;
        self.schedule(tick, CONTROL, Action::HandoverStart { device, to });
        Ok(())
    }

    pub fn schedule_score_mode(&mut self, device: DeviceId, tick: Tick, mode: ScoreKind) -> Result<(), SimError> {
        self.known_device(&device)?;
        self.schedule(tick, CONTROL, Action::ScoreMode { device, mode });
        Ok(())
    }

    fn push(&mut self, tick: Tick, kind: EventKind) -> SimEvent {
        let event = SimEvent { tick, seq: self.log.len() as u64, kind };
        self.log.push(event.clone());
        event
    }

    /// Sends a bare message (no device, no envelope) from `src` now.
    pub fn inject_message(&mut self, src: NodeId, dst: NodeId, slice: SliceId) -> Result<MsgId, SimError> {
        for n in [&src, &dst] {
            if self.network.node(n).is_none() {
                return Err(SimError::UnknownNode(n.clone()));
            }
            if !self.network.in_slice(n, &slice) {
                return Err(RouteError::NotInSlice { node: n.clone(), slice: slice.clone() }.into());
            }
        }
        let id = self.next_msg_id;
        self.next_msg_id += 1;
        let msg = SimMessage::new(id, src, dst, slice, self.clock);
        self.launch(self.clock, msg, None, None, None);
        Ok(id)
    }

    /// Processes every tick up to and including `until`; returns the events
    /// produced.
    pub fn step(&mut self, until: Tick) -> Vec<SimEvent> {
        let start = self.log.len();
        while self.clock <= until {
            let t = self.clock;
            self.run_queue(t, |class| class < LATE);
            self.run_emissions(t);
            if t > 0 && t.is_multiple_of(self.config.anomaly.window) {
                self.run_observation(t);
            }
            self.run_queue(t, |_| true);
            self.clock += 1;
        }
        self.log[start..].to_vec()
    }

    /// Stops emitting and observing, then runs until every in-flight and
    /// buffered message has a terminal event. Pending control actions are
    /// discarded.
    pub fn drain(&mut self) -> Vec<SimEvent> {
        let start = self.log.len();
        self.queue
            .retain(|_, a| matches!(a, Action::Arrive { .. } | Action::HandoverComplete { .. }));
        while !self.in_flight.is_empty() || !self.handovers.is_empty() {
            let t = self.clock;
            self.run_queue(t, |_| true);
            self.clock += 1;
            if self.queue.is_empty() && (!self.in_flight.is_empty() || !self.handovers.is_empty()) {
                // nothing can move them any more
                break;
            }
        }
        self.log[start..].to_vec()
    }

    fn run_queue(&mut self, t: Tick, class_ok: impl Fn(u8) -> bool) {
        while let Some(key) = self.queue.range((t, 0, 0)..(t + 1, 0, 0)).map(|(k, _)| *k).find(|k| class_ok(k.1)) {
            let action = self.queue.remove(&key).expect("key just found");
            self.dispatch(t, action);
        }
    }

    fn dispatch(&mut self, t: Tick, action: Action) {
        match action {
            Action::Arrive { msg_id, generation } => self.arrive(t, msg_id, generation),
            Action::Compromise { device, profile } => {
                let agent = self.devices.get_mut(&device).expect("checked when scheduled");
                if agent.inject_compromise(profile).is_ok() {
                    let node = agent.gateway().clone();
                    self.push(t, EventKind::CompromiseStart { device, node, multiplier: profile.rate_multiplier });
                }
            }
            Action::Resolve { node } => {
                self.resolve_at(t, &node);
            }
            Action::Reintegrate { node } => {
                let _ = self.reintegrate_at(t, &node);
            }
            Action::HandoverStart { device, to } => {
                let from = self.devices[&device].attached();
                if from == to || self.handovers.contains_key(&device) {
                    return;
                }
                if let Err(SimError::TargetUnreachable { .. }) = self.handover_at(t, &device, from, to) {
                    self.push(
                        t,
                        EventKind::Handover { device, from, to, outcome: HandoverOutcome::TargetUnreachable, buffered: 0 },
                    );
                }
            }
            Action::HandoverComplete { device } => self.complete_handover(t, &device),
            Action::ScoreMode { device, mode } => {
                self.devices.get_mut(&device).expect("checked when scheduled").set_score_mode(mode);
                self.push(t, EventKind::ScoreMode { device, mode });
            }
        }
    }

    fn run_emissions(&mut self, t: Tick) {
        let ids: Vec<DeviceId> = self.devices.keys().cloned().collect();
        for id in ids {
            let agent = self.devices.get_mut(&id).expect("listed");
            let src = match self.handovers.get(&id) {
                Some(h) => agent.profile().gateway(h.to).expect("checked at handover start").clone(),
                None => agent.gateway().clone(),
            };
            let emissions = agent.emit(t, &self.registry, &src, &self.server, &mut self.next_msg_id);
            for e in emissions {
                match self.handovers.get_mut(&id) {
                    Some(h) if h.buffer.len() < self.config.handover_buffer => h.buffer.push(e),
                    Some(_) => {
                        self.log_emit(t, &e.message, Some(&id), Some(e.envelope.sequence_no), e.truth.clone());
                        self.push(t, EventKind::Drop { msg_id: e.message.msg_id, reason: DropReason::BufferOverflow, hops: vec![] });
                    }
                    None => self.launch(t, e.message, Some(e.envelope), Some(id.clone()), e.truth),
                }
            }
        }
    }

    fn run_observation(&mut self, t: Tick) {
        let counts = std::mem::take(&mut self.origin_counts);
        let nodes: Vec<NodeId> = self
            .network
            .nodes()
            .filter(|n| !n.isolation.is_isolated())
            .map(|n| n.node_id.clone())
            .collect();
        for node in nodes {
            let count = counts.get(&node).copied().unwrap_or(0);
            let _ = self.observe_window(&node, count);
        }
        let _ = t;
    }

    /// Feeds one window count into a node's baseline, logging a flag and,
    /// once the anomaly has persisted, isolating the node.
    pub fn observe_window(&mut self, node: &NodeId, count: u64) -> Result<Observation<f64>, SimError> {
        let t = self.clock;
        let n = self.network.node_mut(node).ok_or_else(|| SimError::UnknownNode(node.clone()))?;
        let obs = n.baseline.observe(count as f64);
        if obs.anomaly {
            self.push(t, EventKind::AnomalyFlagged { node: node.clone(), count, z: obs.z });
        }
        if obs.persistent {
            self.isolate_at(t, node)?;
        }
        Ok(obs)
    }

    fn log_emit(&mut self, t: Tick, msg: &SimMessage, device: Option<&DeviceId>, seq: Option<u64>, sample: Option<SampleTruth>) {
        self.push(
            t,
            EventKind::Emit {
                msg_id: msg.msg_id,
                device: device.cloned(),
                src: msg.src.clone(),
                dst: msg.dst.clone(),
                slice: msg.slice_id.clone(),
                sequence_no: seq,
                sample,
            },
        );
    }

    fn launch(
        &mut self,
        t: Tick,
        mut msg: SimMessage,
        envelope: Option<EncryptedEnvelope>,
        device: Option<DeviceId>,
        truth: Option<SampleTruth>,
    ) {
        self.log_emit(t, &msg, device.as_ref(), envelope.as_ref().map(|e| e.sequence_no), truth);
        *self.origin_counts.entry(msg.src.clone()).or_default() += 1;
        if self.network.is_isolated(&msg.src) {
            self.push(t, EventKind::Drop { msg_id: msg.msg_id, reason: DropReason::SourceIsolated, hops: vec![] });
            return;
        }
        msg.hops = vec![msg.src.clone()];
        let path = match route_within(&self.network, &msg.slice_id, &msg.src, &msg.dst, &BTreeSet::new()) {
            Ok(p) => p,
            Err(_) => {
                self.push(t, EventKind::Drop { msg_id: msg.msg_id, reason: DropReason::NoRoute, hops: msg.hops });
                return;
            }
        };
        let mut flight = InFlight { msg, plan: path[1..].to_vec(), generation: 0, envelope, device };
        if flight.plan.is_empty() {
            self.deliver(t, &mut flight);
            return;
        }
        let msg_id = flight.msg.msg_id;
        self.in_flight.insert(msg_id, flight);
        self.schedule(t + self.config.hop_latency, ARRIVAL, Action::Arrive { msg_id, generation: 0 });
    }

    fn deliver(&mut self, t: Tick, flight: &mut InFlight) {
        let msg_id = flight.msg.msg_id;
        self.push(t, EventKind::Deliver { msg_id, hops: flight.msg.hops.clone() });
        if let (Some(device), Some(env)) = (flight.device.take(), flight.envelope.take()) {
            self.delivered.insert(msg_id, (device, env));
        }
    }

    fn arrive(&mut self, t: Tick, msg_id: MsgId, generation: u32) {
        let Some(mut flight) = self.in_flight.remove(&msg_id) else { return };
        if flight.generation != generation {
            self.in_flight.insert(msg_id, flight);
            return;
        }
        let next = flight.plan.remove(0);
        if self.network.is_isolated(&next) {
            // isolation reroutes everything planned through a node, so this
            // only happens if the plan was built in the same tick
            self.push(t, EventKind::Drop { msg_id, reason: DropReason::Quarantined, hops: flight.msg.hops });
            return;
        }
        flight.msg.hops.push(next);
        if flight.plan.is_empty() {
            self.deliver(t, &mut flight);
        } else {
            self.in_flight.insert(msg_id, flight);
            self.schedule(t + self.config.hop_latency, ARRIVAL, Action::Arrive { msg_id, generation });
        }
    }

    /// Cuts `node` off. Messages it has already carried are quarantined;
    /// messages planned through it are rerouted from where they are, or
    /// dropped if no other path exists.
    pub fn isolate(&mut self, node: &NodeId) -> Result<Vec<SimEvent>, SimError> {
        let start = self.log.len();
        self.isolate_at(self.clock, node)?;
        Ok(self.log[start..].to_vec())
    }

    fn isolate_at(&mut self, t: Tick, node: &NodeId) -> Result<(), SimError> {
        let n = self.network.node_mut(node).ok_or_else(|| SimError::UnknownNode(node.clone()))?;
        if n.isolation.is_isolated() {
            return Err(SimError::AlreadyIsolated(node.clone()));
        }
        n.isolation = IsolationState::Isolated { since: t };
        n.baseline.reset_hits();
        self.push(t, EventKind::Isolate { node: node.clone() });

        let affected: Vec<MsgId> = self
            .in_flight
            .iter()
            .filter(|(_, f)| f.msg.hops.contains(node) || f.plan.contains(node))
            .map(|(id, _)| *id)
            .collect();
        for msg_id in affected {
            let mut flight = self.in_flight.remove(&msg_id).expect("listed");
            if flight.msg.hops.contains(node) {
                self.push(t, EventKind::Drop { msg_id, reason: DropReason::Quarantined, hops: flight.msg.hops });
                continue;
            }
            let (at, visited) = flight.msg.hops.split_last().expect("launched messages have a first hop");
            let avoid: BTreeSet<NodeId> = visited.iter().cloned().collect();
            match route_within(&self.network, &flight.msg.slice_id, at, &flight.msg.dst, &avoid) {
                Ok(path) => {
                    self.push(t, EventKind::Reroute { msg_id, at: at.clone(), path: path.clone() });
                    flight.plan = path[1..].to_vec();
                    flight.generation += 1;
                    let generation = flight.generation;
                    self.in_flight.insert(msg_id, flight);
                    self.schedule(t + self.config.hop_latency, ARRIVAL, Action::Arrive { msg_id, generation });
                }
                Err(_) => {
                    self.push(t, EventKind::Drop { msg_id, reason: DropReason::NoRoute, hops: flight.msg.hops });
                }
            }
        }
        Ok(())
    }

    /// Marks an isolated node as fixed and starts its cooldown. Open
    /// compromises of devices behind it end here too.
    pub fn resolve(&mut self, node: &NodeId) -> Result<Vec<SimEvent>, SimError> {
        match self.network.node(node).map(|n| n.isolation) {
            None => return Err(SimError::UnknownNode(node.clone())),
            Some(IsolationState::Isolated { .. }) => {}
            Some(_) => return Err(SimError::NotIsolated(node.clone())),
        }
        let start = self.log.len();
        self.resolve_at(self.clock, node);
        Ok(self.log[start..].to_vec())
    }

    fn resolve_at(&mut self, t: Tick, node: &NodeId) {
        self.push(t, EventKind::Resolve { node: node.clone() });
        for agent in self.devices.values_mut() {
            if agent.gateway() == node {
                agent.resolve_compromise(t);
            }
        }
        let n = self.network.node_mut(node).expect("validated");
        if let IsolationState::Isolated { since } = n.isolation {
            n.isolation = IsolationState::Resolving { since, resolved_at: t };
            let ready = t + self.config.cooldown;
            self.schedule(ready, LATE, Action::Reintegrate { node: node.clone() });
        }
    }

    /// Returns a resolved node to service once its cooldown has elapsed.
    pub fn reintegrate(&mut self, node: &NodeId) -> Result<Vec<SimEvent>, SimError> {
        let start = self.log.len();
        self.reintegrate_at(self.clock, node)?;
        Ok(self.log[start..].to_vec())
    }

    fn reintegrate_at(&mut self, t: Tick, node: &NodeId) -> Result<(), SimError> {
        let cooldown = self.config.cooldown;
        let n = self.network.node_mut(node).ok_or_else(|| SimError::UnknownNode(node.clone()))?;
        match n.isolation {
            IsolationState::Normal => return Err(SimError::NotIsolated(node.clone())),
            IsolationState::Isolated { .. } => return Err(SimError::NotResolved(node.clone())),
            IsolationState::Resolving { resolved_at, .. } if t < resolved_at + cooldown => {
                return Err(SimError::CooldownPending { node: node.clone(), ready_at: resolved_at + cooldown });
            }
            IsolationState::Resolving { .. } => {}
        }
        n.isolation = IsolationState::Normal;
        n.baseline.reset_hits();
        self.push(t, EventKind::Reintegrate { node: node.clone() });
        Ok(())
    }

    /// Starts moving `device` from one network to the other. Samples it
    /// produces while detached are buffered (up to the configured bound)
    /// and sent in order from the new gateway when the handover completes.
    pub fn handover(&mut self, device: &DeviceId, from: NetworkKind, to: NetworkKind) -> Result<Vec<SimEvent>, SimError> {
        let start = self.log.len();
        self.handover_at(self.clock, device, from, to)?;
        Ok(self.log[start..].to_vec())
    }

    fn handover_at(&mut self, t: Tick, device: &DeviceId, from: NetworkKind, to: NetworkKind) -> Result<(), SimError> {
        let agent = self.devices.get(device).ok_or_else(|| SimError::UnknownDevice(device.clone()))?;
        if self.handovers.contains_key(device) {
            return Err(SimError::HandoverInProgress(device.clone()));
        }
        if agent.attached() != from || from == to {
            return Err(SimError::NotAttached { device: device.clone(), attached: agent.attached() });
        }
        let unreachable = || SimError::TargetUnreachable { device: device.clone(), to };
        let gw = agent.profile().gateway(to).ok_or_else(unreachable)?;
        route_within(&self.network, &agent.profile().slice, gw, &self.server, &BTreeSet::new())
            .map_err(|_| unreachable())?;
        self.handovers.insert(device.clone(), Handover { from, to, buffer: Vec::new() });
        if self.config.handover_duration == 0 {
            self.complete_handover(t, device);
        } else {
            self.schedule(t + self.config.handover_duration, CONTROL, Action::HandoverComplete { device: device.clone() });
        }
        Ok(())
    }

    fn complete_handover(&mut self, t: Tick, device: &DeviceId) {
        let Some(h) = self.handovers.remove(device) else { return };
        let agent = self.devices.get_mut(device).expect("handover of known device");
        agent.attach(h.to);
        let gw = agent.gateway().clone();
        self.push(
            t,
            EventKind::Handover {
                device: device.clone(),
                from: h.from,
                to: h.to,
                outcome: HandoverOutcome::Completed,
                buffered: h.buffer.len() as u32,
            },
        );
        for mut e in h.buffer {
            e.message.src = gw.clone();
            self.launch(t, e.message, Some(e.envelope), Some(device.clone()), e.truth);
        }
    }
}
