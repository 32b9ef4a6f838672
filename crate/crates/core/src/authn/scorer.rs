use std::collections::BTreeMap;

use rand::Rng;

use crate::fixed::Fixed4;
use crate::trust::{Modality, ScoreDistributionSpec, ScoreKind, ScoreSampler, TrustError};

/// Where a modality's match scores come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ScorerSource {
    Synthetic {
        genuine: ScoreDistributionSpec,
        impostor: ScoreDistributionSpec,
    },
    /// Fixed score stream, cycled; the same stream serves both kinds.
    Replay(Vec<Fixed4>),
}

/// Registered per-modality scoring models.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScorerRegistry {
    scorers: BTreeMap<Modality, ScorerSource>,
}

impl ScorerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, modality: Modality, source: ScorerSource) -> Result<(), TrustError> {
        match &source {
            ScorerSource::Synthetic { genuine, impostor } => {
                genuine.sampler()?;
                impostor.sampler()?;
            }
            ScorerSource::Replay(stream) if stream.is_empty() => {
                return Err(TrustError::InvalidDistribution(format!("empty replay stream for {modality}")));
            }
            ScorerSource::Replay(_) => {}
        }
        self.scorers.insert(modality, source);
        Ok(())
    }

    pub fn contains(&self, modality: Modality) -> bool {
        self.scorers.contains_key(&modality)
    }

    pub fn get(&self, modality: Modality) -> Option<&ScorerSource> {
        self.scorers.get(&modality)
    }

    pub fn modalities(&self) -> impl Iterator<Item = Modality> + '_ {
        self.scorers.keys().copied()
    }

    /// Draws one score. `index` selects the element of a replay stream.
    pub fn draw<R: Rng + ?Sized>(
        &self,
        modality: Modality,
        kind: ScoreKind,
        index: u64,
        rng: &mut R,
    ) -> Option<Fixed4> {
        Some(match self.scorers.get(&modality)? {
            ScorerSource::Synthetic { genuine, impostor } => {
                let spec = match kind {
                    ScoreKind::Genuine => genuine,
                    ScoreKind::Impostor => impostor,
                };
                let sampler = ScoreSampler::new(spec.mean, spec.stddev).expect("validated on register");
                sampler.sample(rng)
            }
            ScorerSource::Replay(stream) => stream[(index % stream.len() as u64) as usize],
        })
    }
}
