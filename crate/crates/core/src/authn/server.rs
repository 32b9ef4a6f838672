use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::Serialize;
use thiserror::Error;

use super::audit::{AuditEventKind, AuditFilter, AuditLog, AuditRecord};
use super::envelope::{DeviceKey, EncryptedEnvelope, SamplePayload};
use super::scorer::ScorerRegistry;
use crate::fixed::Fixed4;
use crate::ids::{DeviceId, SessionId, Tick, UserId};
use crate::trust::{
    decide_access, fuse_scores, update_trust, AccessPolicy, AccessTier, Modality, ModalityScore,
    TrustError, TrustParams, TrustState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SessionStatus {
    Active,
    Locked,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Session {
    pub session_id: SessionId,
    pub user_id: UserId,
    pub device_id: DeviceId,
    pub trust: TrustState,
    pub params: TrustParams,
    pub policy: AccessPolicy,
    pub status: SessionStatus,
    pub opened_at: Tick,
    /// Set by a network handover; cleared by the next accepted sample.
    pub reauth_pending: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum AuthError {
    #[error("an active session already exists for ({0}, {1})")]
    DuplicateSession(UserId, DeviceId),
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("session {0} is not active")]
    SessionNotActive(SessionId),
    #[error("no key provisioned for device {0}")]
    UnknownDevice(DeviceId),
    #[error("envelope from {got} does not belong to session device {expected}")]
    DeviceMismatch { expected: DeviceId, got: DeviceId },
    #[error("envelope failed verification")]
    TamperDetected,
    #[error("sequence number {got} not above last accepted {last}")]
    ReplayRejected { got: u64, last: u64 },
    #[error("modality {0} has no registered scorer")]
    UnknownModality(Modality),
    #[error("envelope payload is malformed")]
    MalformedPayload,
    #[error(transparent)]
    Trust(#[from] TrustError),
}

#[derive(Default)]
struct SessionTable {
    sessions: BTreeMap<SessionId, Arc<Mutex<Session>>>,
    /// Latest session per (user, device), whatever its status.
    latest: HashMap<(UserId, DeviceId), SessionId>,
    opened: u64,
}

/// Simulated authentication server.
///
/// Operations on one session are serialized by that session's lock;
/// different sessions proceed in parallel. Audit appends go through a
/// single lock, which fixes one global order.
pub struct AuthServer {
    keys: HashMap<DeviceId, DeviceKey>,
    registry: ScorerRegistry,
    table: Mutex<SessionTable>,
    last_seq: Mutex<HashMap<DeviceId, u64>>,
    audit: Mutex<AuditLog>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl AuthServer {
    pub fn new(registry: ScorerRegistry) -> Self {
        AuthServer {
            keys: HashMap::new(),
            registry,
            table: Mutex::new(SessionTable::default()),
            last_seq: Mutex::new(HashMap::new()),
            audit: Mutex::new(AuditLog::new()),
        }
    }

    pub fn provision_device(&mut self, device: DeviceId, key: DeviceKey) {
        self.keys.insert(device, key);
    }

    pub fn registry(&self) -> &ScorerRegistry {
        &self.registry
    }

    /// Opens a session at full trust. A Locked session for the same pair
    /// is closed first; an Active one is an error.
    pub fn open_session(
        &self,
        user_id: UserId,
        device_id: DeviceId,
        params: TrustParams,
        policy: AccessPolicy,
        tick: Tick,
    ) -> Result<SessionId, AuthError> {
        params.validate()?;
        let mut table = lock(&self.table);
        let pair = (user_id.clone(), device_id.clone());
        if let Some(prev_id) = table.latest.get(&pair).cloned() {
            let prev = table.sessions[&prev_id].clone();
            let mut prev = lock(&prev);
            match prev.status {
                SessionStatus::Active => return Err(AuthError::DuplicateSession(user_id, device_id)),
                SessionStatus::Locked => {
                    prev.status = SessionStatus::Closed;
                    self.record(tick, &prev, AuditEventKind::SessionClosed, None, prev.trust.value, None);
                }
                SessionStatus::Closed => {}
            }
        }
        table.opened += 1;
        let session_id = SessionId(format!("s-{}", table.opened));
        let session = Session {
            session_id: session_id.clone(),
            user_id,
            device_id,
            trust: TrustState::enrolled(tick),
            params,
            policy,
            status: SessionStatus::Active,
            opened_at: tick,
            reauth_pending: false,
        };
        self.record(tick, &session, AuditEventKind::SessionOpened, None, Fixed4::ONE, None);
        table.sessions.insert(session_id.clone(), Arc::new(Mutex::new(session)));
        table.latest.insert(pair, session_id.clone());
        Ok(session_id)
    }

    pub fn close_session(&self, session_id: &SessionId, tick: Tick) -> Result<(), AuthError> {
        let handle = self.handle(session_id)?;
        let mut s = lock(&handle);
        if s.status == SessionStatus::Closed {
            return Err(AuthError::SessionNotActive(session_id.clone()));
        }
        s.status = SessionStatus::Closed;
        self.record(tick, &s, AuditEventKind::SessionClosed, None, s.trust.value, None);
        Ok(())
    }

    /// Flags an active session for re-authentication after its device
    /// changed networks.
    pub fn require_reauth(&self, session_id: &SessionId, tick: Tick) -> Result<(), AuthError> {
        let handle = self.handle(session_id)?;
        let mut s = lock(&handle);
        if s.status != SessionStatus::Active {
            return Err(AuthError::SessionNotActive(session_id.clone()));
        }
        s.reauth_pending = true;
        self.record(tick, &s, AuditEventKind::ReauthRequired, None, s.trust.value, None);
        Ok(())
    }

    pub fn session(&self, session_id: &SessionId) -> Result<Session, AuthError> {
        let handle = self.handle(session_id)?;
        let session = lock(&handle).clone();
        Ok(session)
    }

    /// The decision the device may act on; `None` while re-authentication
    /// is pending.
    pub fn honored_tier(&self, session_id: &SessionId) -> Result<Option<AccessTier>, AuthError> {
        let s = self.session(session_id)?;
        Ok(match s.status {
            SessionStatus::Active if s.reauth_pending => None,
            SessionStatus::Active => Some(decide_access(&s.trust, &s.policy)),
            SessionStatus::Locked | SessionStatus::Closed => Some(AccessTier::Locked),
        })
    }

    /// Verifies, decodes, fuses and scores one sample, then updates the
    /// session trust and issues a decision.
    pub fn ingest_sample(
        &self,
        session_id: &SessionId,
        envelope: &EncryptedEnvelope,
        tick: Tick,
    ) -> Result<(AccessTier, TrustState), AuthError> {
        let handle = self.handle(session_id)?;
        let mut s = lock(&handle);
        if s.status != SessionStatus::Active {
            return Err(AuthError::SessionNotActive(session_id.clone()));
        }
        if envelope.sender_device_id != s.device_id {
            return Err(AuthError::DeviceMismatch {
                expected: s.device_id.clone(),
                got: envelope.sender_device_id.clone(),
            });
        }
        let key = self
            .keys
            .get(&s.device_id)
            .ok_or_else(|| AuthError::UnknownDevice(s.device_id.clone()))?;
        let plain = match envelope.open(key) {
            Ok(p) => p,
            Err(_) => {
                self.record(tick, &s, AuditEventKind::TamperDetected, None, s.trust.value, None);
                return Err(AuthError::TamperDetected);
            }
        };
        {
            let mut seqs = lock(&self.last_seq);
            if let Some(&last) = seqs.get(&s.device_id) {
                if envelope.sequence_no <= last {
                    drop(seqs);
                    self.record(tick, &s, AuditEventKind::ReplayRejected, None, s.trust.value, None);
                    return Err(AuthError::ReplayRejected { got: envelope.sequence_no, last });
                }
            }
            seqs.insert(s.device_id.clone(), envelope.sequence_no);
        }
        let payload = SamplePayload::decode(&plain).map_err(|_| AuthError::MalformedPayload)?;
        if let Some((m, _)) = payload.scores.iter().find(|(m, _)| !self.registry.contains(*m)) {
            return Err(AuthError::UnknownModality(*m));
        }
        let scores: Vec<ModalityScore> = payload
            .scores
            .iter()
            .map(|&(modality, value)| ModalityScore {
                modality,
                value,
                device_id: s.device_id.clone(),
                user_id: s.user_id.clone(),
                timestamp: tick,
            })
            .collect();
        let fused = fuse_scores(&scores)?;

        let before = s.trust;
        let after = update_trust(&before, fused, &s.params, tick);
        let tier = decide_access(&after, &s.policy);
        s.trust = after;

        let base = |kind, fused_score, tier| AuditRecord {
            tick,
            session_id: s.session_id.clone(),
            event_kind: kind,
            fused_score,
            trust_before: before.value,
            trust_after: after.value,
            tier,
        };
        let mut batch = vec![AuditRecord {
            trust_after: before.value,
            ..base(AuditEventKind::SampleAccepted, Some(fused.value), None)
        }];
        if s.reauth_pending {
            batch.push(AuditRecord {
                trust_after: before.value,
                ..base(AuditEventKind::Reauthenticated, Some(fused.value), None)
            });
        }
        batch.push(base(AuditEventKind::TrustUpdated, Some(fused.value), None));
        batch.push(base(AuditEventKind::DecisionIssued, Some(fused.value), Some(tier)));
        if tier == AccessTier::Locked {
            batch.push(base(AuditEventKind::SessionLocked, None, Some(tier)));
        }
        s.reauth_pending = false;
        if tier == AccessTier::Locked {
            s.status = SessionStatus::Locked;
        }
        let mut audit = lock(&self.audit);
        for r in batch {
            audit.append(r);
        }
        Ok((tier, after))
    }

    pub fn audit_query(&self, filter: &AuditFilter) -> Vec<AuditRecord> {
        lock(&self.audit).query(filter)
    }

    /// Snapshot of the whole log.
    pub fn audit_log(&self) -> AuditLog {
        lock(&self.audit).clone()
    }

    fn handle(&self, session_id: &SessionId) -> Result<Arc<Mutex<Session>>, AuthError> {
        lock(&self.table)
            .sessions
            .get(session_id)
            .cloned()
            .ok_or_else(|| AuthError::UnknownSession(session_id.clone()))
    }

    fn record(
        &self,
        tick: Tick,
        s: &Session,
        kind: AuditEventKind,
        fused_score: Option<Fixed4>,
        trust: Fixed4,
        tier: Option<AccessTier>,
    ) {
        lock(&self.audit).append(AuditRecord {
            tick,
            session_id: s.session_id.clone(),
            event_kind: kind,
            fused_score,
            trust_before: trust,
            trust_after: trust,
            tier,
        });
    }
}
