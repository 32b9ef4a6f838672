//! Continuous-authentication trust engine.
//!
//! Per-modality match scores are fused by arithmetic mean, the fused score
//! nudges a bounded global trust value up (reward) or down (penalty)
//! relative to a threshold, and the trust value is mapped onto an access
//! tier. Everything here is a pure function over immutable values.

mod eer;
mod policy;
mod score;
mod synth;
mod update;

use thiserror::Error;

pub use eer::{compute_eer, Eer};
pub use policy::{decide_access, steps_to_tier, AccessPolicy, AccessTier, PolicyTier, Stream};
pub use score::{fuse_scores, FusedScore, Modality, ModalityScore};
pub use synth::{generate_scores, ScoreDistributionSpec, ScoreKind, ScoreSampler};
pub use update::{update_trust, TrustBranch, TrustParams, TrustState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrustError {
    #[error("no modality scores captured in this window")]
    EmptyScoreList,
    #[error("scores belong to more than one (user, device) pair")]
    MixedIdentity,
    #[error("invalid trust parameter: {0}")]
    InvalidParams(String),
    #[error("invalid access policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid score distribution: {0}")]
    InvalidDistribution(String),
    #[error("target tier {0:?} is unreachable under the chosen stream")]
    Unreachable(AccessTier),
    #[error("EER needs non-empty genuine and impostor populations")]
    EmptyPopulation,
}
