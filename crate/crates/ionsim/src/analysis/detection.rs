use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::state::bitstring;
use crate::error::{Error, Result};

/// Shots per independently seeded generator stream.
const BATCH: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    pub per_ion_fidelity: Vec<f64>,
    pub shots: u64,
    pub rng_seed: u64,
}

impl DetectionModel {
    pub fn uniform(n_ions: usize, fidelity: f64, shots: u64, rng_seed: u64) -> Self {
        Self { per_ion_fidelity: vec![fidelity; n_ions], shots, rng_seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::InvalidInput("shots must be at least 1".into()));
        }
        if self.per_ion_fidelity.iter().any(|f| !(*f > 0.5 && *f <= 1.0)) {
            return Err(Error::InvalidInput("detection fidelities must lie in (0.5, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub counts: Vec<u64>,
    pub histogram: Vec<f64>,
    /// Measured configuration index of every shot, in shot order.
    pub outcomes: Vec<usize>,
}

impl SampleResult {
    pub fn shot_lines(&self, n: usize) -> String {
        let mut s = String::with_capacity(self.outcomes.len() * (n + 1));
        for &k in &self.outcomes {
            s.push_str(&bitstring(k, n));
            s.push('\n');
        }
        s
    }
}

fn n_spins_of(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::Mismatch(format!("histogram length {len} is not 2^N")));
    }
    Ok(len.trailing_zeros() as usize)
}

/// Draw shots from `probabilities`, then flip each bit with probability 1 - fidelity.
pub fn apply_detection_and_sample(probabilities: &[f64], det: &DetectionModel) -> Result<SampleResult> {
    det.validate()?;
    let n = n_spins_of(probabilities.len())?;
    if det.per_ion_fidelity.len() != n {
        return Err(Error::Mismatch(format!("{} fidelities for {n} ions", det.per_ion_fidelity.len())));
    }
    if probabilities.iter().any(|p| *p < 0.0) {
        return Err(Error::InvalidInput("negative probability".into()));
    }
    let mut cdf = Vec::with_capacity(probabilities.len());
    let mut acc = 0.0;
    for p in probabilities {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let flips: Vec<f64> = det.per_ion_fidelity.iter().map(|f| 1.0 - f).collect();
    let batches = det.shots.div_ceil(BATCH);
    let outcomes: Vec<usize> = (0..batches)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(det.rng_seed);
            rng.set_stream(b);
            let count = BATCH.min(det.shots - b * BATCH);
            let cdf = &cdf;
            let flips = &flips;
            (0..count)
                .map(move |_| {
                    let u: f64 = rng.gen::<f64>() * total;
                    let mut k = cdf.partition_point(|c| *c <= u).min(cdf.len() - 1);
                    for (i, q) in flips.iter().enumerate() {
                        if rng.gen::<f64>() < *q {
                            k ^= 1 << (n - 1 - i);
                        }
                    }
                    k
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mut counts = vec![0u64; probabilities.len()];
    for &k in &outcomes {
        counts[k] += 1;
    }
    let histogram = counts.iter().map(|&c| c as f64 / det.shots as f64).collect();
    Ok(SampleResult { counts, histogram, outcomes })
}

/// Exact readout distribution after independent symmetric bit flips.
pub fn detection_channel(probabilities: &[f64], per_ion_fidelity: &[f64]) -> Result<Vec<f64>> {
    let n = n_spins_of(probabilities.len())?;
    if per_ion_fidelity.len() != n {
        return Err(Error::Mismatch(format!("{} fidelities for {n} ions", per_ion_fidelity.len())));
    }
    let mut p = probabilities.to_vec();
    for (i, f) in per_ion_fidelity.iter().enumerate() {
        let bit = 1usize << (n - 1 - i);
        let prev = p.clone();
        for (k, v) in p.iter_mut().enumerate() {
            *v = f * prev[k] + (1.0 - f) * prev[k ^ bit];
        }
    }
    Ok(p)
}
