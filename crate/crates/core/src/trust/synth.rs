//! Synthetic match-score populations standing in for per-modality models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::TrustError;
use crate::fixed::Fixed4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Genuine,
    Impostor,
}

/// Normal distribution clipped to `[0, 1]` and quantized to 4 decimals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistributionSpec {
    pub kind: ScoreKind,
    pub mean: f64,
    pub stddev: f64,
    pub seed: u64,
}

impl ScoreDistributionSpec {
    pub fn new(kind: ScoreKind, mean: f64, stddev: f64, seed: u64) -> Result<Self, TrustError> {
        ScoreSampler::new(mean, stddev)?;
        Ok(ScoreDistributionSpec { kind, mean, stddev, seed })
    }

    pub fn sampler(&self) -> Result<ScoreSampler, TrustError> {
        ScoreSampler::new(self.mean, self.stddev)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScoreSampler {
    normal: Normal<f64>,
}

impl ScoreSampler {
    pub fn new(mean: f64, stddev: f64) -> Result<Self, TrustError> {
        if !(0.0..=1.0).contains(&mean) {
            return Err(TrustError::InvalidDistribution(format!("mean {mean} outside [0, 1]")));
        }
        if !(stddev > 0.0 && stddev.is_finite()) {
            return Err(TrustError::InvalidDistribution(format!("stddev {stddev} must be positive")));
        }
        let normal = Normal::new(mean, stddev)
            .map_err(|e| TrustError::InvalidDistribution(e.to_string()))?;
        Ok(ScoreSampler { normal })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Fixed4 {
        Fixed4::saturating_from_f64(self.normal.sample(rng))
    }
}

/// Draws `count` scores; the sequence is a pure function of the spec.
pub fn generate_scores(spec: &ScoreDistributionSpec, count: usize) -> Result<Vec<Fixed4>, TrustError> {
    let sampler = spec.sampler()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..count).map(|_| sampler.sample(&mut rng)).collect())
}
