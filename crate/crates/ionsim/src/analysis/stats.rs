use crate::analysis::manifold::GroundManifold;
use crate::dynamics::state::{Basis, QuantumState};
use crate::error::{Error, Result};

/// Born probabilities in `basis`, binary order with ion 1 as the most significant bit.
pub fn population_histogram(state: &QuantumState, basis: Basis) -> Vec<f64> {
    state.spin_reduced().to_basis(basis).probabilities()
}

/// Distribution of S_x = sum sigma_x / 2 over its N+1 values, lowest first.
pub fn sx_distribution(state: &QuantumState) -> Vec<f64> {
    sx_from_x_histogram(&population_histogram(state, Basis::X), state.n_spins)
}

/// Bin an x-basis histogram by Hamming weight into the S_x distribution.
pub fn sx_from_x_histogram(histogram: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for (k, v) in histogram.iter().enumerate() {
        out[k.count_ones() as usize] += v;
    }
    out
}

/// Mean of S_x for a distribution returned by [`sx_distribution`].
pub fn sx_mean(dist: &[f64]) -> f64 {
    let n = dist.len() as f64 - 1.0;
    dist.iter().enumerate().map(|(k, p)| p * (k as f64 - n / 2.0)).sum()
}

/// Mass of the histogram on the manifold's configurations.
pub fn manifold_population(histogram: &[f64], manifold: &GroundManifold) -> Result<f64> {
    if manifold.is_empty() {
        return Err(Error::InvalidInput("manifold is empty".into()));
    }
    let mut total = 0.0;
    for &k in &manifold.indices {
        let p = histogram.get(k).ok_or(Error::Index { index: k, len: histogram.len() })?;
        total += p;
    }
    Ok(total)
}

/// Bhattacharyya coefficient sum sqrt(p q), normalized by sqrt(sum p * sum q)
/// so rounding in the input normalization cannot move identical inputs off 1.
pub fn bhattacharyya(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Mismatch(format!("supports differ: {} vs {}", p.len(), q.len())));
    }
    if p.iter().chain(q).any(|x| *x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidInput("distributions must be non-negative".into()));
    }
    let sp: f64 = p.iter().sum();
    let sq: f64 = q.iter().sum();
    if sp == 0.0 || sq == 0.0 {
        return Err(Error::InvalidInput("distribution has zero mass".into()));
    }
    // sqrt(p p) is written as p so identical inputs stay exact even where p^2 underflows.
    let bc: f64 = p.iter().zip(q).map(|(a, b)| if a == b { *a } else { (a * b).sqrt() }).sum();
    Ok((bc / (sp * sq).sqrt()).min(1.0))
}

/// Product over ions of the single-ion overlap with an unbiased coin:
/// prod_i (sqrt(1/2) sqrt(p_i) + sqrt(1/2) sqrt(1 - p_i)).
pub fn single_ion_bhattacharyya(p_up: &[f64]) -> Result<f64> {
    if p_up.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidInput("probabilities must lie in [0, 1]".into()));
    }
    let h = 0.5f64.sqrt();
    Ok(p_up.iter().map(|p| h * p.sqrt() + h * (1.0 - p).sqrt()).product())
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Probability that ion `i` reads +1 given a histogram.
pub fn marginal_up(histogram: &[f64], n: usize, i: usize) -> f64 {
    let bit = 1usize << (n - 1 - i);
    histogram.iter().enumerate().filter(|(k, _)| k & bit != 0).map(|(_, p)| p).sum()
}
