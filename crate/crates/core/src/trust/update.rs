use serde::{Deserialize, Serialize};

use super::{FusedScore, TrustError};
use crate::fixed::Fixed4;
use crate::ids::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustParams {
    pub reward: Fixed4,
    pub penalty: Fixed4,
    pub threshold: Fixed4,
}

impl TrustParams {
    pub fn new(reward: Fixed4, penalty: Fixed4, threshold: Fixed4) -> Result<Self, TrustError> {
        if reward == Fixed4::ZERO {
            return Err(TrustError::InvalidParams("reward must be in (0, 1]".into()));
        }
        if penalty == Fixed4::ZERO {
            return Err(TrustError::InvalidParams("penalty must be in (0, 1]".into()));
        }
        if threshold == Fixed4::ZERO || threshold == Fixed4::ONE {
            return Err(TrustError::InvalidParams("threshold must be in (0, 1)".into()));
        }
        Ok(TrustParams { reward, penalty, threshold })
    }

    pub fn validate(&self) -> Result<(), TrustError> {
        TrustParams::new(self.reward, self.penalty, self.threshold).map(|_| ())
    }
}

impl Default for TrustParams {
    /// thr = 0.5, r = 0.05, p = 0.1
    fn default() -> Self {
        TrustParams {
            reward: Fixed4::lit(500),
            penalty: Fixed4::lit(1000),
            threshold: Fixed4::lit(5000),
        }
    }
}

/// Global trust value for one (user, device) session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustState {
    pub value: Fixed4,
    pub updates: u64,
    pub last_update: Tick,
}

impl TrustState {
    /// State right after an explicit enrollment or login.
    pub fn enrolled(at: Tick) -> Self {
        TrustState { value: Fixed4::ONE, updates: 0, last_update: at }
    }

    pub fn with_value(value: Fixed4) -> Self {
        TrustState { value, updates: 0, last_update: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrustBranch {
    Penalty,
    Reward,
    Hold,
}

impl TrustBranch {
    pub fn classify(fused: Fixed4, threshold: Fixed4) -> TrustBranch {
        match fused.cmp(&threshold) {
            std::cmp::Ordering::Less => TrustBranch::Penalty,
            std::cmp::Ordering::Greater => TrustBranch::Reward,
            std::cmp::Ordering::Equal => TrustBranch::Hold,
        }
    }
}

/// Applies one reward/penalty step and returns the new state.
pub fn update_trust(state: &TrustState, fused: FusedScore, params: &TrustParams, at: Tick) -> TrustState {
    let value = match TrustBranch::classify(fused.value, params.threshold) {
        TrustBranch::Penalty => state.value.saturating_sub(params.penalty),
        TrustBranch::Reward => state.value.saturating_add(params.reward),
        TrustBranch::Hold => state.value,
    };
    TrustState {
        value,
        updates: state.updates + 1,
        last_update: at,
    }
}
