//! Tier-1 medical IoT agents: scheduled emission of sealed samples and
//! flood-compromise injection.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::authn::{DeviceKey, EncryptedEnvelope, SamplePayload, ScorerRegistry};
use crate::ids::{DeviceId, NodeId, SliceId, Tick, UserId};
use crate::sim::{MsgId, SampleTruth, SimMessage};
use crate::trust::{Modality, ScoreKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    Wearable,
    Ambient,
    Implant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    Public,
    Private,
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetworkKind::Public => "public",
            NetworkKind::Private => "private",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device_id: DeviceId,
    pub kind: DeviceKind,
    /// Bound user; devices without one send plain telemetry.
    pub user: Option<UserId>,
    pub modalities: Vec<Modality>,
    pub period: Tick,
    pub jitter: Tick,
    pub attached_network: NetworkKind,
    pub private_gateway: Option<NodeId>,
    pub public_gateway: Option<NodeId>,
    pub slice: SliceId,
    pub payload_size: u32,
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<(), DeviceError> {
        if self.period == 0 {
            return Err(DeviceError::InvalidProfile("period must be at least 1".into()));
        }
        if self.jitter >= self.period {
            return Err(DeviceError::InvalidProfile("jitter must be below period".into()));
        }
        if self.gateway(self.attached_network).is_none() {
            return Err(DeviceError::InvalidProfile(format!(
                "no {} gateway for the attached network",
                self.attached_network
            )));
        }
        if self.user.is_some() && self.modalities.is_empty() {
            return Err(DeviceError::InvalidProfile("user-bound device needs at least one modality".into()));
        }
        Ok(())
    }

    pub fn gateway(&self, network: NetworkKind) -> Option<&NodeId> {
        match network {
            NetworkKind::Public => self.public_gateway.as_ref(),
            NetworkKind::Private => self.private_gateway.as_ref(),
        }
    }

    /// Whether samples from this device feed a trust score.
    pub fn is_biometric(&self) -> bool {
        self.user.is_some() && !self.modalities.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompromiseKind {
    Flood,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompromiseProfile {
    pub start_tick: Tick,
    pub rate_multiplier: u32,
    pub kind: CompromiseKind,
}

impl CompromiseProfile {
    pub fn flood(start_tick: Tick, rate_multiplier: u32) -> Self {
        CompromiseProfile { start_tick, rate_multiplier, kind: CompromiseKind::Flood }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeviceError {
    #[error("device is already compromised")]
    AlreadyCompromised,
    #[error("rate multiplier {0} must be at least 2")]
    InvalidMultiplier(u32),
    #[error("invalid device profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Compromise {
    profile: CompromiseProfile,
    resolved_at: Option<Tick>,
}

impl Compromise {
    fn active_at(&self, tick: Tick) -> bool {
        tick >= self.profile.start_tick && self.resolved_at.is_none_or(|r| tick < r)
    }
}

/// Sealed sample plus the network message that carries it.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub envelope: EncryptedEnvelope,
    pub message: SimMessage,
    pub truth: Option<SampleTruth>,
}

#[derive(Debug, Clone)]
pub struct DeviceAgent {
    profile: DeviceProfile,
    seed: u64,
    key: DeviceKey,
    next_seq: u64,
    compromise: Option<Compromise>,
    score_mode: ScoreKind,
    rng: ChaCha8Rng,
    samples_drawn: u64,
}

impl DeviceAgent {
    pub fn new(profile: DeviceProfile, seed: u64, key: DeviceKey) -> Result<Self, DeviceError> {
        profile.validate()?;
        Ok(DeviceAgent {
            profile,
            seed,
            key,
            next_seq: 1,
            compromise: None,
            score_mode: ScoreKind::Genuine,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x0005_EED5_C0E5_u64),
            samples_drawn: 0,
        })
    }

    pub fn profile(&self) -> &DeviceProfile {
        &self.profile
    }

    pub fn id(&self) -> &DeviceId {
        &self.profile.device_id
    }

    pub fn attached(&self) -> NetworkKind {
        self.profile.attached_network
    }

    pub fn gateway(&self) -> &NodeId {
        self.profile
            .gateway(self.profile.attached_network)
            .expect("validated profile has a gateway for its network")
    }

    pub(crate) fn attach(&mut self, network: NetworkKind) {
        debug_assert!(self.profile.gateway(network).is_some());
        self.profile.attached_network = network;
    }

    pub fn score_mode(&self) -> ScoreKind {
        self.score_mode
    }

    pub fn set_score_mode(&mut self, mode: ScoreKind) {
        self.score_mode = mode;
    }

    pub fn is_compromised_at(&self, tick: Tick) -> bool {
        self.compromise.is_some_and(|c| c.active_at(tick))
    }

    pub fn inject_compromise(&mut self, profile: CompromiseProfile) -> Result<(), DeviceError> {
        if profile.rate_multiplier < 2 {
            return Err(DeviceError::InvalidMultiplier(profile.rate_multiplier));
        }
        if self.compromise.is_some_and(|c| c.resolved_at.is_none()) {
            return Err(DeviceError::AlreadyCompromised);
        }
        self.compromise = Some(Compromise { profile, resolved_at: None });
        Ok(())
    }

    /// Ends an ongoing compromise from `tick` on. Returns whether one was open.
    pub fn resolve_compromise(&mut self, tick: Tick) -> bool {
        match &mut self.compromise {
            Some(c) if c.resolved_at.is_none() => {
                c.resolved_at = Some(tick.max(c.profile.start_tick));
                true
            }
            _ => false,
        }
    }

    /// Signed jitter for the `k`-th nominal emission, a pure function of
    /// `(seed, k)`.
    fn jitter_offset(&self, k: u64) -> i64 {
        let j = self.profile.jitter as i64;
        if j == 0 {
            return 0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        rng.random_range(-j..=j)
    }

    /// How many samples fall due at `tick`.
    pub fn emissions_at(&self, tick: Tick) -> u32 {
        let period = self.profile.period;
        if let Some(c) = self.compromise.filter(|c| c.active_at(tick)) {
            let m = c.profile.rate_multiplier as u64;
            let offset = (tick - c.profile.start_tick) % period;
            return (0..m).filter(|i| i * period / m == offset).count() as u32;
        }
        let jitter = self.profile.jitter;
        let first = tick.saturating_sub(jitter) / period;
        let last = (tick + jitter) / period;
        (first..=last)
            .filter(|&k| {
                let actual = (k as i64 * period as i64 + self.jitter_offset(k)).max(0) as u64;
                actual == tick
            })
            .count() as u32
    }

    /// Produces the samples due at `tick`, sealed and wrapped in messages
    /// from `src` to `dst`. Message ids are taken from `next_msg_id`.
    pub fn emit(
        &mut self,
        tick: Tick,
        registry: &ScorerRegistry,
        src: &NodeId,
        dst: &NodeId,
        next_msg_id: &mut MsgId,
    ) -> Vec<Emission> {
        let n = self.emissions_at(tick);
        let mut out = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let mut scores = Vec::with_capacity(self.profile.modalities.len());
            for &m in &self.profile.modalities {
                if let Some(v) = registry.draw(m, self.score_mode, self.samples_drawn, &mut self.rng) {
                    scores.push((m, v));
                }
            }
            self.samples_drawn += 1;
            let truth = self
                .profile
                .is_biometric()
                .then(|| SampleTruth { label: self.score_mode, scores: scores.clone() });
            let payload = SamplePayload { scores }.encode();
            let envelope = EncryptedEnvelope::seal(&self.key, self.profile.device_id.clone(), self.next_seq, &payload);
            self.next_seq += 1;
            let mut message = SimMessage::new(*next_msg_id, src.clone(), dst.clone(), self.profile.slice.clone(), tick);
            message.payload_size = self.profile.payload_size;
            *next_msg_id += 1;
            out.push(Emission { envelope, message, truth });
        }
        out
    }
}
