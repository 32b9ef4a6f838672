use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devices::{DeviceKind, DeviceProfile, NetworkKind};
use crate::fixed::Fixed4;
use crate::ids::{DeviceId, NodeId, SliceId, Tick, UserId};
use crate::sim::{AnomalyParams, LinkSpec, NodeSpec, SimConfig, SliceSpec, TopologyConfig};
use crate::trust::{AccessPolicy, AccessTier, Modality, PolicyTier, TrustParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Home,
    Hospital,
    Road,
    Custom,
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioName::Home => "home",
            ScenarioName::Hospital => "hospital",
            ScenarioName::Road => "road",
            ScenarioName::Custom => "custom",
        })
    }
}

/// Bad scenario file. `location` is either `line N, column M` for syntax
/// and type errors or a field path such as `devices[1].private_gateway`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{location}: {message}")]
pub struct ConfigError {
    pub location: String,
    pub message: String,
}

impl ConfigError {
    pub fn at(location: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { location: location.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: ScenarioName,
    pub seed: u64,
    /// Ticks simulated; emissions happen at ticks `0..duration`.
    pub duration: Tick,
    /// Node hosting the authentication server.
    pub server: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub hop_latency: Tick,
    pub cooldown: Tick,
    pub handover_duration: Tick,
    pub handover_buffer: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        SimSection {
            hop_latency: d.hop_latency,
            cooldown: d.cooldown,
            handover_duration: d.handover_duration,
            handover_buffer: d.handover_buffer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrustSection {
    pub reward: f64,
    pub penalty: f64,
    pub threshold: f64,
}

impl Default for TrustSection {
    fn default() -> Self {
        TrustSection { reward: 0.05, penalty: 0.1, threshold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyEntry {
    pub tier: AccessTier,
    pub min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub id: UserId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub id: DeviceId,
    pub kind: DeviceKind,
    #[serde(default)]
    pub user: Option<UserId>,
    #[serde(default)]
    pub modalities: Vec<Modality>,
    pub period: Tick,
    #[serde(default)]
    pub jitter: Tick,
    pub network: NetworkKind,
    #[serde(default)]
    pub private_gateway: Option<NodeId>,
    #[serde(default)]
    pub public_gateway: Option<NodeId>,
    pub slice: SliceId,
    #[serde(default = "default_payload")]
    pub payload_size: u32,
}

fn default_payload() -> u32 {
    64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalSpec {
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerSpec {
    pub genuine: NormalSpec,
    pub impostor: NormalSpec,
}

impl ScorerSpec {
    /// Calibrated defaults. Touch gesture lands near 1.4% EER, keystroke
    /// near 10.6%.
    pub fn default_for(m: Modality) -> Self {
        let (gm, gs, im, is) = match m {
            Modality::TouchGesture => (0.80, 0.08, 0.45, 0.08),
            Modality::Keystroke => (0.65, 0.10, 0.40, 0.10),
            Modality::Face => (0.85, 0.06, 0.30, 0.08),
            Modality::Gait => (0.75, 0.08, 0.45, 0.10),
            Modality::Mouse => (0.70, 0.10, 0.45, 0.10),
        };
        ScorerSpec { genuine: NormalSpec { mean: gm, stddev: gs }, impostor: NormalSpec { mean: im, stddev: is } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompromiseSpec {
    pub device: DeviceId,
    pub tick: Tick,
    pub multiplier: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolveSpec {
    pub node: NodeId,
    pub tick: Tick,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandoverSpec {
    pub device: DeviceId,
    pub tick: Tick,
    pub to: NetworkKind,
}

/// Switches a device to its impostor score population from `tick` on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpostorSpec {
    pub device: DeviceId,
    pub tick: Tick,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub anomaly: AnomalyParams<f64>,
    #[serde(default)]
    pub trust: TrustSection,
    #[serde(default = "default_policy")]
    pub policy: Vec<PolicyEntry>,
    #[serde(default)]
    pub scorers: BTreeMap<Modality, ScorerSpec>,
    #[serde(default)]
    pub users: Vec<UserSpec>,
    #[serde(default)]
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub slices: Vec<SliceSpec>,
    #[serde(default)]
    pub devices: Vec<DeviceSpec>,
    #[serde(default)]
    pub compromise: Vec<CompromiseSpec>,
    #[serde(default)]
    pub resolve: Vec<ResolveSpec>,
    #[serde(default)]
    pub handover: Vec<HandoverSpec>,
    #[serde(default)]
    pub impostor: Vec<ImpostorSpec>,
}

fn default_policy() -> Vec<PolicyEntry> {
    vec![
        PolicyEntry { tier: AccessTier::Full, min: 0.7 },
        PolicyEntry { tier: AccessTier::Restricted, min: 0.4 },
        PolicyEntry { tier: AccessTier::Locked, min: 0.0 },
    ]
}

/// Reads a real that must sit on the 4-decimal grid.
fn grid_value(location: &str, x: f64) -> Result<Fixed4, ConfigError> {
    let v = Fixed4::from_f64(x).map_err(|e| ConfigError::at(location, e.to_string()))?;
    if (v.to_f64() - x).abs() > 1e-9 {
        return Err(ConfigError::at(location, format!("{x} has more than 4 decimals")));
    }
    Ok(v)
}

impl ScenarioConfig {
    /// Parses and validates a TOML scenario.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let location = match e.span() {
                Some(span) => {
                    let before = &text[..span.start.min(text.len())];
                    let line = before.matches('\n').count() + 1;
                    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
                    format!("line {line}, column {column}")
                }
                None => "config".to_string(),
            };
            ConfigError::at(location, e.message().trim())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn trust_params(&self) -> Result<TrustParams, ConfigError> {
        let t = &self.trust;
        TrustParams::new(
            grid_value("trust.reward", t.reward)?,
            grid_value("trust.penalty", t.penalty)?,
            grid_value("trust.threshold", t.threshold)?,
        )
        .map_err(|e| ConfigError::at("trust", e.to_string()))
    }

    pub fn access_policy(&self) -> Result<AccessPolicy, ConfigError> {
        let tiers = self
            .policy
            .iter()
            .enumerate()
            .map(|(i, p)| Ok(PolicyTier { lower_bound: grid_value(&format!("policy[{i}].min"), p.min)?, tier: p.tier }))
            .collect::<Result<Vec<_>, ConfigError>>()?;
        AccessPolicy::new(tiers).map_err(|e| ConfigError::at("policy", e.to_string()))
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            hop_latency: self.sim.hop_latency,
            cooldown: self.sim.cooldown,
            handover_duration: self.sim.handover_duration,
            handover_buffer: self.sim.handover_buffer,
            anomaly: self.anomaly,
        }
    }

    pub fn topology(&self) -> TopologyConfig {
        TopologyConfig { nodes: self.nodes.clone(), links: self.links.clone(), slices: self.slices.clone() }
    }

    pub fn scorer(&self, m: Modality) -> ScorerSpec {
        self.scorers.get(&m).copied().unwrap_or_else(|| ScorerSpec::default_for(m))
    }

    pub fn device_profile(&self, d: &DeviceSpec) -> DeviceProfile {
        DeviceProfile {
            device_id: d.id.clone(),
            kind: d.kind,
            user: d.user.clone(),
            modalities: d.modalities.clone(),
            period: d.period,
            jitter: d.jitter,
            attached_network: d.network,
            private_gateway: d.private_gateway.clone(),
            public_gateway: d.public_gateway.clone(),
            slice: d.slice.clone(),
            payload_size: d.payload_size,
        }
    }

    /// Checks every cross-reference and parameter. The first problem found
    /// is reported with its field path.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.scenario.duration == 0 {
            return Err(ConfigError::at("scenario.duration", "must be at least 1 tick"));
        }
        if self.sim.hop_latency == 0 {
            return Err(ConfigError::at("sim.hop_latency", "must be at least 1 tick"));
        }
        self.anomaly.validate().map_err(|m| ConfigError::at("anomaly", m))?;
        self.trust_params()?;
        self.access_policy()?;
        for (m, s) in &self.scorers {
            for (which, n) in [("genuine", s.genuine), ("impostor", s.impostor)] {
                crate::trust::ScoreSampler::new(n.mean, n.stddev)
                    .map_err(|e| ConfigError::at(format!("scorers.{m}.{which}"), e.to_string()))?;
            }
        }

        let nodes: BTreeSet<&NodeId> = self.nodes.iter().map(|n| &n.id).collect();
        crate::sim::build_topology(&self.topology(), &self.anomaly)
            .map_err(|e| ConfigError::at(e.element, e.reason))?;
        if !nodes.contains(&self.scenario.server) {
            return Err(ConfigError::at("scenario.server", format!("undeclared node {}", self.scenario.server)));
        }
        let slices: BTreeMap<&SliceId, &SliceSpec> = self.slices.iter().map(|s| (&s.id, s)).collect();

        let mut users = BTreeSet::new();
        for (i, u) in self.users.iter().enumerate() {
            if !users.insert(&u.id) {
                return Err(ConfigError::at(format!("users[{i}].id"), format!("duplicate user {}", u.id)));
            }
        }
        let mut devices = BTreeMap::new();
        for (i, d) in self.devices.iter().enumerate() {
            let at = |field: &str| format!("devices[{i}].{field}");
            if devices.insert(&d.id, d).is_some() {
                return Err(ConfigError::at(at("id"), format!("duplicate device {}", d.id)));
            }
            if let Some(u) = &d.user {
                if !users.contains(u) {
                    return Err(ConfigError::at(at("user"), format!("undeclared user {u}")));
                }
            }
            let slice = slices
                .get(&d.slice)
                .ok_or_else(|| ConfigError::at(at("slice"), format!("undeclared slice {}", d.slice)))?;
            for (field, gw) in [("private_gateway", &d.private_gateway), ("public_gateway", &d.public_gateway)] {
                if let Some(gw) = gw {
                    if !nodes.contains(gw) {
                        return Err(ConfigError::at(at(field), format!("undeclared node {gw}")));
                    }
                    if !slice.members.contains(gw) {
                        return Err(ConfigError::at(at(field), format!("{gw} is not in slice {}", d.slice)));
                    }
                }
            }
            if !slice.members.contains(&self.scenario.server) {
                return Err(ConfigError::at(
                    at("slice"),
                    format!("slice {} does not contain the server {}", d.slice, self.scenario.server),
                ));
            }
            self.device_profile(d)
                .validate()
                .map_err(|e| ConfigError::at(format!("devices[{i}]"), e.to_string()))?;
        }

        for (i, c) in self.compromise.iter().enumerate() {
            if !devices.contains_key(&c.device) {
                return Err(ConfigError::at(format!("compromise[{i}].device"), format!("undeclared device {}", c.device)));
            }
            if c.multiplier < 2 {
                return Err(ConfigError::at(format!("compromise[{i}].multiplier"), "must be at least 2"));
            }
        }
        for (i, r) in self.resolve.iter().enumerate() {
            if !nodes.contains(&r.node) {
                return Err(ConfigError::at(format!("resolve[{i}].node"), format!("undeclared node {}", r.node)));
            }
        }
        for (i, h) in self.handover.iter().enumerate() {
            let d = devices
                .get(&h.device)
                .ok_or_else(|| ConfigError::at(format!("handover[{i}].device"), format!("undeclared device {}", h.device)))?;
            let gw = match h.to {
                NetworkKind::Private => &d.private_gateway,
                NetworkKind::Public => &d.public_gateway,
            };
            if gw.is_none() {
                return Err(ConfigError::at(
                    format!("handover[{i}].to"),
                    format!("device {} has no {} gateway", h.device, h.to),
                ));
            }
        }
        for (i, m) in self.impostor.iter().enumerate() {
            let d = devices
                .get(&m.device)
                .ok_or_else(|| ConfigError::at(format!("impostor[{i}].device"), format!("undeclared device {}", m.device)))?;
            if d.user.is_none() || d.modalities.is_empty() {
                return Err(ConfigError::at(format!("impostor[{i}].device"), format!("device {} is not biometric", m.device)));
            }
        }
        Ok(())
    }
}
