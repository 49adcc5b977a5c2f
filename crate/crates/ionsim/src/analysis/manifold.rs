use serde::{Deserialize, Serialize};

use crate::coupling::CouplingMatrix;
use crate::dynamics::state::{index_of, spins_of};

/// Degenerate lowest-energy classical configurations of a coupling matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundManifold {
    /// Spin strings (+1/-1), ion 1 first, ascending binary index.
    pub configurations: Vec<Vec<i8>>,
    /// Binary indices of the configurations (bit 1 = spin +1, ion 1 most significant).
    pub indices: Vec<usize>,
    /// Classical energy sum_{i<j} J_ij s_i s_j, rad/s.
    pub energy: f64,
    /// Distance to the first level above the tolerance window; `None` if every
    /// configuration is degenerate.
    pub gap: Option<f64>,
    pub eps_deg: f64,
}

impl GroundManifold {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }
}

/// 1e-6 of the largest coupling magnitude.
pub fn default_eps_deg(jm: &CouplingMatrix) -> f64 {
    1e-6 * jm.max_abs()
}

pub fn classical_energy(jm: &CouplingMatrix, spins: &[i8]) -> f64 {
    let n = spins.len();
    let mut e = 0.0;
    for i in 0..n {
        for k in (i + 1)..n {
            e += jm.j[(i, k)] * f64::from(spins[i]) * f64::from(spins[k]);
        }
    }
    e
}

/// Visit every configuration in Gray-code order with its energy.
fn for_each_energy(jm: &CouplingMatrix, mut visit: impl FnMut(usize, f64)) {
    let n = jm.n();
    let mut spins = vec![-1i8; n];
    // Local fields h_i = sum_k J_ik s_k.
    let mut h: Vec<f64> = (0..n).map(|i| (0..n).map(|k| -jm.j[(i, k)]).sum()).collect();
    let mut e = classical_energy(jm, &spins);
    let mut index = 0usize;
    visit(index, e);
    for step in 1usize..(1usize << n) {
        let bit = step.trailing_zeros() as usize;
        let i = n - 1 - bit;
        let s_old = f64::from(spins[i]);
        e -= 2.0 * s_old * h[i];
        spins[i] = -spins[i];
        for k in 0..n {
            h[k] -= 2.0 * jm.j[(k, i)] * s_old;
        }
        index ^= 1 << bit;
        visit(index, e);
    }
}

/// Exhaustive search for all configurations within `eps_deg` of the minimum.
pub fn classical_ground_manifold(jm: &CouplingMatrix, eps_deg: f64) -> GroundManifold {
    let n = jm.n();
    assert!(n <= 24, "brute-force enumeration limited to 24 spins");
    let mut emin = f64::INFINITY;
    for_each_energy(jm, |_, e| emin = emin.min(e));
    // Incremental updates drift slightly; widen the first pass by a rounding margin
    // and settle membership on directly recomputed energies.
    let margin = eps_deg + 1e-9 * jm.max_abs() * (n * n) as f64;
    let mut candidates = Vec::new();
    for_each_energy(jm, |k, e| {
        if e <= emin + margin {
            candidates.push(k);
        }
    });
    let exact: Vec<(usize, f64)> = candidates.iter().map(|&k| (k, classical_energy(jm, &spins_of(k, n)))).collect();
    let e0 = exact.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let mut indices: Vec<usize> = exact.iter().filter(|x| x.1 <= e0 + eps_deg).map(|x| x.0).collect();
    indices.sort_unstable();
    let mut gap = f64::INFINITY;
    for_each_energy(jm, |_, e| {
        if e > e0 + margin && e - e0 < gap {
            gap = e - e0;
        }
    });
    // Candidates inside the margin but outside eps_deg are also excited levels.
    for &(k, e) in &exact {
        if !indices.contains(&k) && e - e0 < gap {
            gap = e - e0;
        }
    }
    GroundManifold {
        configurations: indices.iter().map(|&k| spins_of(k, n)).collect(),
        indices,
        energy: e0,
        gap: gap.is_finite().then_some(gap),
        eps_deg,
    }
}

/// Indices of a manifold given as spin strings.
pub fn indices_of(configurations: &[Vec<i8>]) -> Vec<usize> {
    let mut v: Vec<usize> = configurations.iter().map(|c| index_of(c)).collect();
    v.sort_unstable();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn matrix(n: usize, f: impl Fn(usize, usize) -> f64) -> CouplingMatrix {
        let j = DMatrix::from_fn(n, n, |i, k| if i == k { 0.0 } else { f(i.min(k), i.max(k)) });
        CouplingMatrix::from_matrix(j).unwrap()
    }

    /// Independent enumeration in descending index order with direct energies.
    fn oracle(jm: &CouplingMatrix, eps: f64) -> (Vec<usize>, f64) {
        let n = jm.n();
        let all: Vec<(usize, f64)> = (0..(1usize << n)).rev().map(|k| (k, classical_energy(jm, &spins_of(k, n)))).collect();
        let e0 = all.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        let mut idx: Vec<usize> = all.iter().filter(|x| x.1 <= e0 + eps).map(|x| x.0).collect();
        idx.sort_unstable();
        (idx, e0)
    }

    #[test]
    fn afm_chain_has_two_neel_states() {
        let jm = matrix(7, |i, k| if k == i + 1 { 1.0 } else { 0.0 });
        let gm = classical_ground_manifold(&jm, default_eps_deg(&jm));
        assert_eq!(gm.len(), 2);
        assert_eq!(gm.configurations[0], vec![-1, 1, -1, 1, -1, 1, -1]);
        assert_eq!(gm.energy, -6.0);
        assert_eq!(gm.gap, Some(2.0));
    }

    #[test]
    fn zero_coupling_is_fully_degenerate() {
        let jm = matrix(3, |_, _| 0.0);
        let gm = classical_ground_manifold(&jm, 0.0);
        assert_eq!(gm.len(), 8);
        assert_eq!(gm.gap, None);
    }

    #[test]
    fn triangle_is_frustrated() {
        let jm = matrix(3, |_, _| 1.0);
        let gm = classical_ground_manifold(&jm, 1e-9);
        assert_eq!(gm.len(), 6);
        assert_eq!(gm.energy, -1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn matches_oracle_and_is_flip_closed(vals in proptest::collection::vec(-1.0f64..1.0, 28), n in 2usize..8) {
            let jm = matrix(n, |i, k| vals[(i * 7 + k) % vals.len()]);
            let eps = default_eps_deg(&jm);
            let gm = classical_ground_manifold(&jm, eps);
            let (idx, e0) = oracle(&jm, eps);
            prop_assert_eq!(&gm.indices, &idx);
            prop_assert!((gm.energy - e0).abs() < 1e-12);
            let full = (1usize << n) - 1;
            for &k in &gm.indices {
                prop_assert!(gm.contains(full ^ k));
            }
        }
    }
}
