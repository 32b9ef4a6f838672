//! Per-node traffic baselines: EWMA mean and variance of the per-window
//! origination count, a z-score test and a persistence counter.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::ids::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound(deserialize = "F: Float + Deserialize<'de>"))]
pub struct AnomalyParams<F> {
    pub alpha: F,
    pub z_threshold: F,
    pub persistence_k: u32,
    /// Observation window length.
    pub window: Tick,
    /// Variance floor under the square root.
    pub epsilon: F,
}

impl<F: Float> Default for AnomalyParams<F> {
    /// alpha 0.2, z 3, k 3, W 10 ticks, variance floor 1 (message^2).
    fn default() -> Self {
        AnomalyParams {
            alpha: F::from(0.2).unwrap(),
            z_threshold: F::from(3.0).unwrap(),
            persistence_k: 3,
            window: 10,
            epsilon: F::one(),
        }
    }
}

impl<F: Float> AnomalyParams<F> {
    // negated comparisons so that NaN fails
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha > F::zero() && self.alpha < F::one()) {
            return Err("alpha must be in (0, 1)".into());
        }
        if !(self.z_threshold > F::zero()) {
            return Err("z_threshold must be positive".into());
        }
        if self.persistence_k == 0 {
            return Err("persistence_k must be at least 1".into());
        }
        if self.window == 0 {
            return Err("window must be at least 1 tick".into());
        }
        if !(self.epsilon > F::zero()) {
            return Err("epsilon must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnomalyBaseline<F> {
    pub ewma_rate: F,
    pub ewma_var: F,
    pub alpha: F,
    pub z_threshold: F,
    pub persistence_k: u32,
    pub consecutive_hits: u32,
    pub epsilon: F,
    pub windows_seen: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<F> {
    pub z: F,
    pub anomaly: bool,
    /// `persistence_k` anomalous windows in a row.
    pub persistent: bool,
}

impl<F: Float> AnomalyBaseline<F> {
    pub fn new(params: &AnomalyParams<F>) -> Self {
        AnomalyBaseline {
            ewma_rate: F::zero(),
            ewma_var: F::zero(),
            alpha: params.alpha,
            z_threshold: params.z_threshold,
            persistence_k: params.persistence_k,
            consecutive_hits: 0,
            epsilon: params.epsilon,
            windows_seen: 0,
        }
    }

    /// Feeds one window's count.
    ///
    /// The z-score is taken against the baseline as it stood before this
    /// window. Anomalous windows do not update the baseline, so a sustained
    /// flood keeps scoring against the pre-flood normal.
    pub fn observe(&mut self, count: F) -> Observation<F> {
        if self.windows_seen == 0 {
            self.windows_seen = 1;
            self.ewma_rate = count;
            return Observation { z: F::zero(), anomaly: false, persistent: false };
        }
        self.windows_seen += 1;
        let deviation = count - self.ewma_rate;
        let z = deviation / self.ewma_var.max(self.epsilon).sqrt();
        let anomaly = z > self.z_threshold;
        if anomaly {
            self.consecutive_hits = (self.consecutive_hits + 1).min(self.persistence_k);
        } else {
            self.consecutive_hits = 0;
            let one = F::one();
            self.ewma_rate = self.alpha * count + (one - self.alpha) * self.ewma_rate;
            self.ewma_var = self.alpha * deviation * deviation + (one - self.alpha) * self.ewma_var;
        }
        Observation {
            z,
            anomaly,
            persistent: anomaly && self.consecutive_hits == self.persistence_k,
        }
    }

    pub fn reset_hits(&mut self) {
        self.consecutive_hits = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn run<F: Float>(counts: &[f64]) -> Vec<(bool, bool)> {
        let mut b = AnomalyBaseline::<F>::new(&AnomalyParams::default());
        counts
            .iter()
            .map(|&c| {
                let o = b.observe(F::from(c).unwrap());
                (o.anomaly, o.persistent)
            })
            .collect()
    }

    #[test]
    fn constant_stream_never_flags() {
        assert!(run::<f64>(&[4.0; 200]).iter().all(|&(a, _)| !a));
        assert!(run::<f32>(&[4.0; 200]).iter().all(|&(a, _)| !a));
    }

    #[test]
    fn ten_x_flood_isolates_on_third_window() {
        // baseline 1/window, variance 0 -> floor 1; z = (10 - 1) / 1 = 9 each window
        let mut counts = vec![1.0; 10];
        counts.extend([10.0, 10.0, 10.0]);
        let out = run::<f64>(&counts);
        assert_eq!(&out[10..], &[(true, false), (true, false), (true, true)]);
        assert_eq!(out, run::<f32>(&counts));
    }

    #[test]
    fn single_spike_does_not_persist() {
        let mut counts = vec![1.0; 10];
        counts.push(10.0);
        counts.extend([1.0; 10]);
        let out = run::<f64>(&counts);
        assert_eq!(out.iter().filter(|o| o.0).count(), 1);
        assert!(out.iter().all(|o| !o.1));
    }

    #[test]
    fn hand_computed_ewma() {
        let p = AnomalyParams::<f64>::default();
        let mut b = AnomalyBaseline::new(&p);
        b.observe(2.0);
        let o = b.observe(4.0);
        // deviation 2, var floor 1 -> z 2; mean 0.2*4 + 0.8*2 = 2.4; var 0.2*4 = 0.8
        assert_eq!(o.z, 2.0);
        assert!((b.ewma_rate - 2.4).abs() < 1e-12);
        assert!((b.ewma_var - 0.8).abs() < 1e-12);
        let o = b.observe(6.0);
        // (6 - 2.4) / sqrt(max(0.8, 1)) = 3.6 > 3
        assert!((o.z - 3.6).abs() < 1e-12);
        assert!(o.anomaly);
        assert!((b.ewma_rate - 2.4).abs() < 1e-12);
    }

    #[test]
    fn params_validate() {
        assert!(AnomalyParams::<f64>::default().validate().is_ok());
        let bad = AnomalyParams::<f64> { alpha: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = AnomalyParams::<f64> { persistence_k: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn hits_bounded_and_reset(counts in prop::collection::vec(0u32..40, 1..100)) {
            let mut b = AnomalyBaseline::<f64>::new(&AnomalyParams::default());
            for c in counts {
                let o = b.observe(c as f64);
                prop_assert!(b.consecutive_hits <= b.persistence_k);
                if !o.anomaly {
                    prop_assert_eq!(b.consecutive_hits, 0);
                }
                prop_assert!(b.ewma_var >= 0.0);
            }
        }
    }
}
