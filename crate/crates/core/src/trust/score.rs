use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TrustError;
use crate::fixed::{Fixed4, SCALE};
use crate::ids::{DeviceId, Tick, UserId};

/// Biometric signal source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    TouchGesture,
    Keystroke,
    Face,
    Gait,
    Mouse,
}

impl Modality {
    pub const ALL: [Modality; 5] = [
        Modality::TouchGesture,
        Modality::Keystroke,
        Modality::Face,
        Modality::Gait,
        Modality::Mouse,
    ];

    /// Wire code used in envelope payloads.
    pub fn code(self) -> u8 {
        match self {
            Modality::TouchGesture => 1,
            Modality::Keystroke => 2,
            Modality::Face => 3,
            Modality::Gait => 4,
            Modality::Mouse => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Modality> {
        Modality::ALL.into_iter().find(|m| m.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::TouchGesture => "touch-gesture",
            Modality::Keystroke => "keystroke",
            Modality::Face => "face",
            Modality::Gait => "gait",
            Modality::Mouse => "mouse",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Modality::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown modality {s:?}"))
    }
}

/// One normalized match score from one modality on one device.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalityScore {
    pub modality: Modality,
    pub value: Fixed4,
    pub device_id: DeviceId,
    pub user_id: UserId,
    pub timestamp: Tick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusedScore {
    pub value: Fixed4,
    pub n: u32,
}

impl FusedScore {
    /// Fuses bare values; the caller vouches that they share an identity.
    pub fn from_values(values: &[Fixed4]) -> Result<FusedScore, TrustError> {
        if values.is_empty() {
            return Err(TrustError::EmptyScoreList);
        }
        let n = values.len() as u64;
        let sum: u64 = values.iter().map(|v| v.scaled() as u64).sum();
        // round-half-up of sum / n on the scaled integer
        let scaled = (2 * sum + n) / (2 * n);
        debug_assert!(scaled <= SCALE as u64);
        Ok(FusedScore {
            value: Fixed4::from_scaled(scaled as u32).expect("mean of unit values"),
            n: n as u32,
        })
    }
}

/// Sum-score fusion: the rounded arithmetic mean of the modality scores.
pub fn fuse_scores(scores: &[ModalityScore]) -> Result<FusedScore, TrustError> {
    let first = scores.first().ok_or(TrustError::EmptyScoreList)?;
    if scores
        .iter()
        .any(|s| s.user_id != first.user_id || s.device_id != first.device_id)
    {
        return Err(TrustError::MixedIdentity);
    }
    let values: Vec<Fixed4> = scores.iter().map(|s| s.value).collect();
    FusedScore::from_values(&values)
}
