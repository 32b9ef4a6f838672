//! Tier-3 authentication service: sessions, envelope checks, trust
//! updates and the audit trail.

mod audit;
mod envelope;
mod scorer;
mod server;

pub use audit::{AuditError, AuditEventKind, AuditFilter, AuditLog, AuditRecord};
pub use envelope::{DeviceKey, EncryptedEnvelope, EnvelopeError, SamplePayload, TAG_LEN};
pub use scorer::{ScorerRegistry, ScorerSource};
pub use server::{AuthError, AuthServer, Session, SessionStatus};
