use std::fmt;

use serde::{Deserialize, Serialize};

use super::{update_trust, FusedScore, TrustError, TrustParams, TrustState};
use crate::fixed::Fixed4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessTier {
    Full,
    Restricted,
    Locked,
}

impl fmt::Display for AccessTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccessTier::Full => "full",
            AccessTier::Restricted => "restricted",
            AccessTier::Locked => "locked",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyTier {
    pub lower_bound: Fixed4,
    pub tier: AccessTier,
}

/// Trust thresholds, strictly descending, ending at a zero lower bound.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PolicyTier>", into = "Vec<PolicyTier>")]
pub struct AccessPolicy {
    tiers: Vec<PolicyTier>,
}

impl AccessPolicy {
    pub fn new(tiers: Vec<PolicyTier>) -> Result<Self, TrustError> {
        let last = tiers
            .last()
            .ok_or_else(|| TrustError::InvalidPolicy("no tiers".into()))?;
        if last.lower_bound != Fixed4::ZERO {
            return Err(TrustError::InvalidPolicy(format!(
                "lowest tier must start at 0, found {}",
                last.lower_bound
            )));
        }
        if let Some(w) = tiers.windows(2).find(|w| w[0].lower_bound <= w[1].lower_bound) {
            return Err(TrustError::InvalidPolicy(format!(
                "bounds not strictly descending at {} -> {}",
                w[0].lower_bound, w[1].lower_bound
            )));
        }
        Ok(AccessPolicy { tiers })
    }

    pub fn tiers(&self) -> &[PolicyTier] {
        &self.tiers
    }

    pub fn decide(&self, trust: Fixed4) -> AccessTier {
        self.tiers
            .iter()
            .find(|t| trust >= t.lower_bound)
            .expect("validated policy ends at zero")
            .tier
    }
}

impl Default for AccessPolicy {
    /// Full >= 0.7, Restricted >= 0.4, Locked below.
    fn default() -> Self {
        AccessPolicy::new(vec![
            PolicyTier { lower_bound: Fixed4::lit(7000), tier: AccessTier::Full },
            PolicyTier { lower_bound: Fixed4::lit(4000), tier: AccessTier::Restricted },
            PolicyTier { lower_bound: Fixed4::ZERO, tier: AccessTier::Locked },
        ])
        .expect("default policy is valid")
    }
}

impl TryFrom<Vec<PolicyTier>> for AccessPolicy {
    type Error = TrustError;

    fn try_from(tiers: Vec<PolicyTier>) -> Result<Self, Self::Error> {
        AccessPolicy::new(tiers)
    }
}

impl From<AccessPolicy> for Vec<PolicyTier> {
    fn from(policy: AccessPolicy) -> Self {
        policy.tiers
    }
}

pub fn decide_access(state: &TrustState, policy: &AccessPolicy) -> AccessTier {
    policy.decide(state.value)
}

/// Constant score stream fed to [`steps_to_tier`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    AllPenalty,
    AllReward,
}

/// Number of updates under a constant stream until the policy first yields
/// `target`. Zero if the start state already sits in `target`.
pub fn steps_to_tier(
    start: &TrustState,
    params: &TrustParams,
    policy: &AccessPolicy,
    stream: Stream,
    target: AccessTier,
) -> Result<u32, TrustError> {
    // threshold is in (0, 1) so these always land on the intended branch
    let fused = FusedScore {
        value: match stream {
            Stream::AllPenalty => Fixed4::ZERO,
            Stream::AllReward => Fixed4::ONE,
        },
        n: 1,
    };
    let mut state = *start;
    let mut steps = 0u32;
    loop {
        if policy.decide(state.value) == target {
            return Ok(steps);
        }
        let next = update_trust(&state, fused, params, state.last_update);
        if next.value == state.value {
            // pinned at a clamp without reaching the target
            return Err(TrustError::Unreachable(target));
        }
        state = next;
        steps += 1;
    }
}
