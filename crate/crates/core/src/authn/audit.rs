//! Append-only audit trail, persisted as one JSON object per line.

use std::fs;
use std::io::{self, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixed::Fixed4;
use crate::ids::{SessionId, Tick};
use crate::trust::AccessTier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AuditEventKind {
    SampleAccepted,
    TamperDetected,
    TrustUpdated,
    DecisionIssued,
    SessionOpened,
    SessionLocked,
    SessionClosed,
    ReplayRejected,
    /// Session flagged after a network handover.
    ReauthRequired,
    /// First accepted sample after a handover flag.
    Reauthenticated,
}

/// One line of the audit log. Field order here is the on-disk key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditRecord {
    pub tick: Tick,
    pub session_id: SessionId,
    pub event_kind: AuditEventKind,
    pub fused_score: Option<Fixed4>,
    pub trust_before: Fixed4,
    pub trust_after: Fixed4,
    pub tier: Option<AccessTier>,
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("corrupt audit record at line {line}: {message}")]
    CorruptLine { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditFilter {
    pub session: Option<SessionId>,
    pub kinds: Option<Vec<AuditEventKind>>,
    pub ticks: Option<RangeInclusive<Tick>>,
}

impl AuditFilter {
    pub fn session(mut self, id: SessionId) -> Self {
        self.session = Some(id);
        self
    }

    pub fn kind(mut self, kind: AuditEventKind) -> Self {
        self.kinds.get_or_insert_with(Vec::new).push(kind);
        self
    }

    pub fn ticks(mut self, range: RangeInclusive<Tick>) -> Self {
        self.ticks = Some(range);
        self
    }

    pub fn matches(&self, r: &AuditRecord) -> bool {
        self.session.as_ref().is_none_or(|s| *s == r.session_id)
            && self.kinds.as_ref().is_none_or(|k| k.contains(&r.event_kind))
            && self.ticks.as_ref().is_none_or(|t| t.contains(&r.tick))
    }
}

/// Records are kept in arrival order; there is no API to edit or remove one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditLog {
    records: Vec<AuditRecord>,
}

impl AuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, record: AuditRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[AuditRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn query(&self, filter: &AuditFilter) -> Vec<AuditRecord> {
        self.records.iter().filter(|r| filter.matches(r)).cloned().collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("audit records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, AuditError> {
        let mut records = Vec::new();
        for (i, line) in text.split_terminator('\n').enumerate() {
            let record = serde_json::from_str(line).map_err(|e| AuditError::CorruptLine {
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push(record);
        }
        Ok(AuditLog { records })
    }

    pub fn persist(&self, path: impl AsRef<Path>) -> Result<(), AuditError> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        f.sync_all()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AuditError> {
        Self::from_jsonl(&fs::read_to_string(path)?)
    }
}
