use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use super::config::{ConfigError, ScenarioConfig};
use super::report::{report, MetricsReport};
use crate::authn::{AuditLog, AuthServer, DeviceKey, ScorerRegistry, ScorerSource};
use crate::devices::{CompromiseProfile, DeviceAgent};
use crate::ids::{DeviceId, SessionId};
use crate::sim::{build_topology, events_to_jsonl, EventKind, HandoverOutcome, SimEvent, Simulator};
use crate::trust::{Modality, ScoreDistributionSpec, ScoreKind};

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub events: Vec<SimEvent>,
    pub audit: AuditLog,
    pub report: MetricsReport,
    /// Session opened for each biometric device.
    pub sessions: BTreeMap<DeviceId, SessionId>,
}

impl RunOutput {
    pub fn events_jsonl(&self) -> String {
        events_to_jsonl(&self.events)
    }

    pub fn audit_jsonl(&self) -> String {
        self.audit.to_jsonl()
    }

    pub fn report_json(&self) -> String {
        self.report.to_json()
    }
}

/// Stable 64-bit sub-seed for a named component.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_be_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_be_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

fn registry(config: &ScenarioConfig) -> Result<ScorerRegistry, ConfigError> {
    let mut reg = ScorerRegistry::new();
    for m in Modality::ALL {
        let s = config.scorer(m);
        let seed = derive_seed(config.scenario.seed, &format!("scorer/{m}"));
        let genuine = ScoreDistributionSpec::new(ScoreKind::Genuine, s.genuine.mean, s.genuine.stddev, seed);
        let impostor = ScoreDistributionSpec::new(ScoreKind::Impostor, s.impostor.mean, s.impostor.stddev, seed ^ 1);
        let source = match (genuine, impostor) {
            (Ok(genuine), Ok(impostor)) => ScorerSource::Synthetic { genuine, impostor },
            (Err(e), _) | (_, Err(e)) => return Err(ConfigError::at(format!("scorers.{m}"), e.to_string())),
        };
        reg.register(m, source).map_err(|e| ConfigError::at(format!("scorers.{m}"), e.to_string()))?;
    }
    Ok(reg)
}

/// Wires devices, network and server from `config`, runs the simulation
/// for the configured duration, drains in-flight traffic, then feeds every
/// delivered biometric sample to the server in delivery order.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutput, ConfigError> {
    config.validate()?;
    let seed = config.scenario.seed;
    let sim_err = |e: crate::sim::SimError| ConfigError::at("scenario", e.to_string());

    let network = build_topology(&config.topology(), &config.anomaly).map_err(|e| ConfigError::at(e.element, e.reason))?;
    let registry = registry(config)?;
    let mut sim = Simulator::new(network, config.sim_config(), registry.clone(), config.scenario.server.clone())
        .map_err(sim_err)?;
    let mut server = AuthServer::new(registry);

    for (i, d) in config.devices.iter().enumerate() {
        let key = DeviceKey::derive(seed, &d.id);
        let agent = DeviceAgent::new(config.device_profile(d), derive_seed(seed, &format!("device/{}", d.id)), key.clone())
            .map_err(|e| ConfigError::at(format!("devices[{i}]"), e.to_string()))?;
        sim.add_device(agent).map_err(|e| ConfigError::at(format!("devices[{i}]"), e.to_string()))?;
        server.provision_device(d.id.clone(), key);
    }
    for c in &config.compromise {
        sim.schedule_compromise(c.device.clone(), CompromiseProfile::flood(c.tick, c.multiplier)).map_err(sim_err)?;
    }
    for r in &config.resolve {
        sim.schedule_resolve(r.node.clone(), r.tick).map_err(sim_err)?;
    }
    for h in &config.handover {
        sim.schedule_handover(h.device.clone(), h.tick, h.to).map_err(sim_err)?;
    }
    for m in &config.impostor {
        sim.schedule_score_mode(m.device.clone(), m.tick, ScoreKind::Impostor).map_err(sim_err)?;
    }

    let params = config.trust_params()?;
    let policy = config.access_policy()?;
    let mut sessions = BTreeMap::new();
    for d in &config.devices {
        if let (Some(user), false) = (&d.user, d.modalities.is_empty()) {
            let id = server
                .open_session(user.clone(), d.id.clone(), params, policy.clone(), 0)
                .map_err(|e| ConfigError::at("devices", e.to_string()))?;
            sessions.insert(d.id.clone(), id);
        }
    }

    sim.step(config.scenario.duration - 1);
    sim.drain();
    let events = sim.events().to_vec();

    for e in &events {
        match &e.kind {
            EventKind::Handover { device, outcome: HandoverOutcome::Completed, .. } => {
                if let Some(s) = sessions.get(device) {
                    let _ = server.require_reauth(s, e.tick);
                }
            }
            EventKind::Deliver { msg_id, .. } => {
                if let Some((device, envelope)) = sim.take_envelope(*msg_id) {
                    if let Some(s) = sessions.get(&device) {
                        // rejections are audited by the server; samples for a
                        // locked session are simply not honoured
                        let _ = server.ingest_sample(s, &envelope, e.tick);
                    }
                }
            }
            _ => {}
        }
    }

    let audit = server.audit_log();
    let report = report(&events, &audit);
    Ok(RunOutput { events, audit, report, sessions })
}
