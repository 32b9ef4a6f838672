//! Equal error rate over the 4-decimal threshold grid.

use num_traits::Float;
use serde::Serialize;

use super::TrustError;
use crate::fixed::{Fixed4, SCALE};

/// Operating point where false accepts and false rejects balance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eer<F> {
    pub eer: F,
    pub threshold: Fixed4,
    pub far: F,
    pub frr: F,
}

/// Sweeps every grid threshold `t`; FAR(t) is the impostor share at or
/// above `t`, FRR(t) the genuine share below it. Picks the lowest `t`
/// minimising `|FAR - FRR|` and reports their mean there.
///
/// The minimisation compares cross-multiplied integer counts, so the
/// selected threshold does not depend on the float type.
pub fn compute_eer<F: Float>(genuine: &[Fixed4], impostor: &[Fixed4]) -> Result<Eer<F>, TrustError> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(TrustError::EmptyPopulation);
    }
    let bins = SCALE as usize + 1;
    let mut gen_hist = vec![0u64; bins];
    let mut imp_hist = vec![0u64; bins];
    for g in genuine {
        gen_hist[g.scaled() as usize] += 1;
    }
    for i in impostor {
        imp_hist[i.scaled() as usize] += 1;
    }
    let n_gen = genuine.len() as u64;
    let n_imp = impostor.len() as u64;

    let mut gen_below = 0u64;
    let mut imp_at_or_above = n_imp;
    let mut best: Option<(u128, Fixed4, u64, u64)> = None;
    for t in Fixed4::grid() {
        let idx = t.scaled() as usize;
        if idx > 0 {
            gen_below += gen_hist[idx - 1];
            imp_at_or_above -= imp_hist[idx - 1];
        }
        let a = imp_at_or_above as u128 * n_gen as u128;
        let b = gen_below as u128 * n_imp as u128;
        let gap = a.abs_diff(b);
        if best.is_none_or(|(g, ..)| gap < g) {
            best = Some((gap, t, imp_at_or_above, gen_below));
        }
    }
    let (_, threshold, far_count, frr_count) = best.expect("grid is non-empty");
    Ok(rates(threshold, far_count, n_imp, frr_count, n_gen))
}

pub(crate) fn rates<F: Float>(threshold: Fixed4, far_count: u64, n_imp: u64, frr_count: u64, n_gen: u64) -> Eer<F> {
    let far = F::from(far_count).unwrap() / F::from(n_imp).unwrap();
    let frr = F::from(frr_count).unwrap() / F::from(n_gen).unwrap();
    Eer {
        eer: (far + frr) / F::from(2.0).unwrap(),
        threshold,
        far,
        frr,
    }
}
