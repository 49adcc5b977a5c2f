//! Phonon-mediated Ising couplings from the transverse mode spectrum.
//!
//! `J_ij = W_i W_j hbar dk^2 / (2M) sum_m b_im b_jm / (mu^2 - w_m^2)` where `W_i`
//! is the Rabi frequency of ion i. Positive J is antiferromagnetic under
//! `H = sum_{i<j} J_ij sy_i sy_j + B sum_i sx_i`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::manifold::{classical_ground_manifold, default_eps_deg};
use crate::error::{Error, Result};
use crate::modes::{ModeSpectrum, SpectrumKind};
use crate::units::{HBAR, RAMAN_WAVELENGTH};

/// Default exclusion half-width around each mode frequency.
pub const DEFAULT_GUARD_BAND: f64 = 2.0 * PI * 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamanConfig {
    pub wavelength: f64,
    pub delta_k: f64,
    /// Per-ion Rabi frequencies, rad/s.
    pub rabi: Vec<f64>,
    pub detuning_mu: f64,
    pub b_field: f64,
    pub sdf_carrier_phase_offset: f64,
}

impl RamanConfig {
    /// Uniform Rabi frequency on every ion, 355 nm counter-propagating geometry.
    pub fn uniform(n_ions: usize, rabi: f64, detuning_mu: f64, b_field: f64) -> Self {
        Self {
            wavelength: RAMAN_WAVELENGTH,
            delta_k: default_delta_k(RAMAN_WAVELENGTH),
            rabi: vec![rabi; n_ions],
            detuning_mu,
            b_field,
            sdf_carrier_phase_offset: -PI / 2.0,
        }
    }

    pub fn with_detuning(&self, mu: f64) -> Self {
        Self { detuning_mu: mu, ..self.clone() }
    }

    pub fn validate(&self, n_ions: usize) -> Result<()> {
        if self.rabi.len() != n_ions {
            return Err(Error::InvalidInput(format!(
                "rabi has {} entries, expected {n_ions}",
                self.rabi.len()
            )));
        }
        if self.rabi.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput("Rabi frequencies must be finite and non-negative".into()));
        }
        if !(self.delta_k > 0.0) {
            return Err(Error::InvalidInput("delta_k must be positive".into()));
        }
        if !(self.detuning_mu > 0.0) {
            return Err(Error::InvalidInput("detuning mu must be positive".into()));
        }
        Ok(())
    }
}

/// Net wavevector 2 pi sqrt(2) / lambda of the two Raman beams.
pub fn default_delta_k(wavelength: f64) -> f64 {
    2.0 * PI * 2f64.sqrt() / wavelength
}

/// Rabi frequency of a drive written as `H = W0 sigma` (flopping at 2 W0).
pub fn rabi_from_drive_strength(strength: f64) -> f64 {
    2.0 * strength
}

/// Lamb-Dicke factor of ion i in mode m: dk * b_im * sqrt(hbar / (2 M w_m)).
pub fn lamb_dicke(delta_k: f64, b_im: f64, mass: f64, omega_m: f64) -> f64 {
    delta_k * b_im * (HBAR / (2.0 * mass * omega_m)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    /// Symmetric, zero diagonal, rad/s.
    pub j: DMatrix<f64>,
    pub detuning_mu: f64,
    pub spectrum_ref: String,
}

impl CouplingMatrix {
    pub fn from_matrix(j: DMatrix<f64>) -> Result<Self> {
        if !j.is_square() {
            return Err(Error::InvalidInput("coupling matrix must be square".into()));
        }
        let n = j.nrows();
        for i in 0..n {
            if j[(i, i)] != 0.0 {
                return Err(Error::InvalidInput("coupling matrix diagonal must be zero".into()));
            }
            for k in 0..i {
                if j[(i, k)] != j[(k, i)] {
                    return Err(Error::InvalidInput("coupling matrix must be symmetric".into()));
                }
            }
        }
        Ok(Self { j, detuning_mu: 0.0, spectrum_ref: "user".into() })
    }

    pub fn n(&self) -> usize {
        self.j.nrows()
    }

    pub fn max_abs(&self) -> f64 {
        self.j.amax()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { j: &self.j * factor, ..self.clone() }
    }

    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut s = String::from("i");
        for k in 0..n {
            s.push_str(&format!(",J_{}_rad_s", k + 1));
        }
        s.push('\n');
        for i in 0..n {
            s.push_str(&format!("{}", i + 1));
            for k in 0..n {
                s.push_str(&format!(",{}", self.j[(i, k)]));
            }
            s.push('\n');
        }
        s
    }
}

pub fn compute_couplings(spec: &ModeSpectrum, raman: &RamanConfig, mass: f64) -> Result<CouplingMatrix> {
    compute_couplings_with_guard(spec, raman, mass, DEFAULT_GUARD_BAND)
}

pub fn compute_couplings_with_guard(
    spec: &ModeSpectrum,
    raman: &RamanConfig,
    mass: f64,
    guard_band: f64,
) -> Result<CouplingMatrix> {
    if spec.kind != SpectrumKind::TransverseZ {
        return Err(Error::Mismatch("couplings need the transverse spectrum".into()));
    }
    let n = spec.n_modes();
    raman.validate(n)?;
    let mu = raman.detuning_mu;
    for (m, w) in spec.frequencies.iter().enumerate() {
        if (mu - w).abs() <= guard_band {
            return Err(Error::Resonance { mode: m, mode_hz: w / (2.0 * PI), mu_hz: mu / (2.0 * PI) });
        }
    }
    let weights: Vec<f64> = spec.frequencies.iter().map(|w| 1.0 / (mu * mu - w * w)).collect();
    let b = &spec.mode_matrix;
    let bw = DMatrix::from_fn(n, n, |i, m| b[(i, m)] * weights[m]);
    let core = bw * b.transpose();
    let pref = HBAR * raman.delta_k.powi(2) / (2.0 * mass);
    let mut j = DMatrix::from_fn(n, n, |i, k| pref * raman.rabi[i] * raman.rabi[k] * core[(i, k)]);
    for i in 0..n {
        j[(i, i)] = 0.0;
        for k in 0..i {
            let avg = 0.5 * (j[(i, k)] + j[(k, i)]);
            j[(i, k)] = avg;
            j[(k, i)] = avg;
        }
    }
    Ok(CouplingMatrix { j, detuning_mu: mu, spectrum_ref: spec.geometry_ref.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EdgeSign {
    Afm,
    Fm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    #[serde(rename = "J_rad_s")]
    pub j_rad_s: f64,
    pub sign: EdgeSign,
}

/// Edges with |J| at least `edge_threshold * max|J|`, zero-based ion indices.
pub fn interaction_graph(jm: &CouplingMatrix, edge_threshold: f64) -> Result<Vec<Edge>> {
    if !(edge_threshold > 0.0 && edge_threshold < 1.0) {
        return Err(Error::InvalidInput("edge threshold must lie in (0, 1)".into()));
    }
    let jmax = jm.max_abs();
    let mut edges = Vec::new();
    if jmax == 0.0 {
        return Ok(edges);
    }
    let n = jm.n();
    for i in 0..n {
        for k in (i + 1)..n {
            let v = jm.j[(i, k)];
            if v.abs() >= edge_threshold * jmax {
                let sign = if v > 0.0 { EdgeSign::Afm } else { EdgeSign::Fm };
                edges.push(Edge { i, j: k, j_rad_s: v, sign });
            }
        }
    }
    Ok(edges)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSummary {
    pub degeneracy: usize,
    pub energy: f64,
    pub gap: Option<f64>,
    pub configurations: Vec<Vec<i8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub mu: f64,
    /// Mode index whose guard band swallowed this point, if any.
    pub skipped_resonance: Option<usize>,
    pub coupling: Option<CouplingMatrix>,
    pub manifold: Option<ManifoldSummary>,
}

/// Evaluate couplings and the classical ground manifold on an inclusive grid
/// of detunings. Points inside a guard band are kept but flagged.
pub fn scan_detuning(
    spec: &ModeSpectrum,
    raman_template: &RamanConfig,
    mu_lo: f64,
    mu_hi: f64,
    step: f64,
    mass: f64,
) -> Result<Vec<ScanPoint>> {
    if !(step > 0.0) || !(mu_hi >= mu_lo) {
        return Err(Error::EmptyRange);
    }
    let count = ((mu_hi - mu_lo) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .into_par_iter()
        .map(|k| {
            let mu = mu_lo + k as f64 * step;
            let raman = raman_template.with_detuning(mu);
            match compute_couplings(spec, &raman, mass) {
                Ok(jm) => {
                    let gm = classical_ground_manifold(&jm, default_eps_deg(&jm));
                    let summary = ManifoldSummary {
                        degeneracy: gm.configurations.len(),
                        energy: gm.energy,
                        gap: gm.gap,
                        configurations: gm.configurations,
                    };
                    Ok(ScanPoint { mu, skipped_resonance: None, coupling: Some(jm), manifold: Some(summary) })
                }
                Err(Error::Resonance { mode, .. }) => {
                    Ok(ScanPoint { mu, skipped_resonance: Some(mode), coupling: None, manifold: None })
                }
                Err(e) => Err(e),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{solve_equilibrium, TrapConfig};
    use crate::modes::transverse_modes;
    use crate::units::{khz, mhz};
    use proptest::prelude::*;

    fn rhombus_modes() -> (TrapConfig, ModeSpectrum) {
        let cfg = TrapConfig::yb171(4, 0.626, 0.404, 1.503);
        let geom = solve_equilibrium(&cfg, 8, 3).unwrap();
        let spec = transverse_modes(&cfg, &geom).unwrap();
        (cfg, spec)
    }

    /// Plain loop over modes, written independently of the matrix form.
    fn brute_force(spec: &ModeSpectrum, raman: &RamanConfig, mass: f64) -> Vec<Vec<f64>> {
        let n = spec.n_modes();
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..n {
                if i == k {
                    continue;
                }
                let mut sum = 0.0;
                for m in 0..n {
                    let w = spec.frequencies[m];
                    sum += spec.mode_matrix[(i, m)] * spec.mode_matrix[(k, m)] / (raman.detuning_mu.powi(2) - w * w);
                }
                out[i][k] = raman.rabi[i] * raman.rabi[k] * HBAR * raman.delta_k * raman.delta_k / (2.0 * mass) * sum;
            }
        }
        out
    }

    #[test]
    fn matches_brute_force_summation() {
        let (cfg, spec) = rhombus_modes();
        for mu in [mhz(1.513), mhz(1.39), mhz(1.2), mhz(1.43)] {
            let mut raman = RamanConfig::uniform(4, khz(100.0), mu, khz(29.0));
            raman.rabi = vec![khz(90.0), khz(100.0), khz(105.0), khz(97.0)];
            let jm = compute_couplings(&spec, &raman, cfg.mass).unwrap();
            let bf = brute_force(&spec, &raman, cfg.mass);
            for i in 0..4 {
                for k in 0..4 {
                    let d = (jm.j[(i, k)] - bf[i][k]).abs();
                    assert!(d <= 1e-12 * bf[i][k].abs().max(1e-300), "{i}{k}: {} vs {}", jm.j[(i, k)], bf[i][k]);
                }
            }
        }
    }

    #[test]
    fn blue_of_com_is_uniform_antiferromagnet() {
        let (cfg, spec) = rhombus_modes();
        let mu = spec.frequencies[0] + khz(10.0);
        let jm = compute_couplings(&spec, &RamanConfig::uniform(4, khz(100.0), mu, khz(29.0)), cfg.mass).unwrap();
        let vals: Vec<f64> = (0..4).flat_map(|i| ((i + 1)..4).map(move |k| (i, k))).map(|(i, k)| jm.j[(i, k)]).collect();
        assert!(vals.iter().all(|v| *v > 0.0));
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let dev = vals.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max) / mean;
        assert!(dev < 0.15, "relative deviation {dev}");
    }

    #[test]
    fn red_of_third_mode_gives_afm_ring_and_fm_diagonals() {
        let (cfg, spec) = rhombus_modes();
        let mu = spec.frequencies[2] - khz(10.0);
        let jm = compute_couplings(&spec, &RamanConfig::uniform(4, khz(100.0), mu, khz(29.0)), cfg.mass).unwrap();
        for i in 0..4 {
            assert!(jm.j[(i, (i + 1) % 4)] > 0.0);
        }
        assert!(jm.j[(0, 2)] < 0.0 && jm.j[(1, 3)] < 0.0);
    }

    #[test]
    fn dark_ion_decouples() {
        let (cfg, spec) = rhombus_modes();
        let mut raman = RamanConfig::uniform(4, khz(100.0), mhz(1.45), khz(29.0));
        raman.rabi[2] = 0.0;
        let jm = compute_couplings(&spec, &raman, cfg.mass).unwrap();
        for k in 0..4 {
            assert_eq!(jm.j[(2, k)], 0.0);
            assert_eq!(jm.j[(k, 2)], 0.0);
        }
    }

    #[test]
    fn guard_band_names_the_mode() {
        let (cfg, spec) = rhombus_modes();
        let raman = RamanConfig::uniform(4, khz(100.0), spec.frequencies[1] + khz(0.5), 0.0);
        match compute_couplings(&spec, &raman, cfg.mass) {
            Err(Error::Resonance { mode, .. }) => assert_eq!(mode, 1),
            other => panic!("expected resonance, got {other:?}"),
        }
    }

    #[test]
    fn couplings_flip_sign_across_a_pole_and_decay_far_above() {
        let (cfg, spec) = rhombus_modes();
        let w = spec.frequencies[0];
        let at = |mu: f64| compute_couplings(&spec, &RamanConfig::uniform(4, khz(100.0), mu, 0.0), cfg.mass).unwrap();
        let above = at(w + khz(2.0));
        let below = at(w - khz(2.0));
        let closer = at(w + khz(1.1));
        assert!(above.j[(0, 1)] > 0.0 && below.j[(0, 1)] < 0.0);
        assert!(closer.j[(0, 1)] > above.j[(0, 1)]);
        let far1 = at(20.0 * w);
        let far2 = at(40.0 * w);
        assert!(far1.j[(0, 1)] > 0.0 && far2.j[(0, 1)] > 0.0);
        // Mode completeness cancels the 1/mu^2 term off the diagonal, leaving 1/mu^4.
        let ratio = far1.j[(0, 1)] / far2.j[(0, 1)];
        assert!((ratio - 16.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn graph_labels_signs() {
        let j = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, -0.6, 1.0, 0.0, 0.1, -0.6, 0.1, 0.0]);
        let jm = CouplingMatrix::from_matrix(j).unwrap();
        let g = interaction_graph(&jm, 0.5).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].sign, EdgeSign::Afm);
        assert_eq!(g[1].sign, EdgeSign::Fm);
        let zero = CouplingMatrix::from_matrix(DMatrix::zeros(3, 3)).unwrap();
        assert!(interaction_graph(&zero, 0.5).unwrap().is_empty());
        assert!(interaction_graph(&jm, 1.0).is_err());
    }

    #[test]
    fn uniform_positive_coupling_gives_complete_afm_graph() {
        let j = DMatrix::from_fn(5, 5, |i, k| if i == k { 0.0 } else { 2.0 });
        let g = interaction_graph(&CouplingMatrix::from_matrix(j).unwrap(), 0.5).unwrap();
        assert_eq!(g.len(), 10);
        assert!(g.iter().all(|e| e.sign == EdgeSign::Afm));
    }

    #[test]
    fn scan_flags_guard_bands_and_rejects_empty_ranges() {
        let (cfg, spec) = rhombus_modes();
        let raman = RamanConfig::uniform(4, khz(100.0), mhz(1.5), 0.0);
        let w = spec.frequencies[0];
        let pts = scan_detuning(&spec, &raman, w - khz(2.25), w + khz(2.25), khz(0.5), cfg.mass).unwrap();
        assert_eq!(pts.len(), 10);
        assert_eq!(pts.iter().filter(|p| p.skipped_resonance == Some(0)).count(), 4);
        assert!(scan_detuning(&spec, &raman, w, w - 1.0, 1.0, cfg.mass).is_err());
        let blue = scan_detuning(&spec, &raman, w + khz(5.0), w + khz(15.0), khz(1.0), cfg.mass).unwrap();
        for p in &blue {
            let jm = p.coupling.as_ref().unwrap();
            assert!((0..4).all(|i| (0..4).all(|k| i == k || jm.j[(i, k)] > 0.0)));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn rabi_scaling_is_quadratic(c in 0.1f64..5.0, off in 3.0f64..40.0) {
            let (cfg, spec) = rhombus_modes();
            let raman = RamanConfig::uniform(4, khz(100.0), spec.frequencies[0] + khz(off), 0.0);
            let mut scaled = raman.clone();
            scaled.rabi.iter_mut().for_each(|w| *w *= c);
            let a = compute_couplings(&spec, &raman, cfg.mass).unwrap();
            let b = compute_couplings(&spec, &scaled, cfg.mass).unwrap();
            for i in 0..4 {
                prop_assert_eq!(b.j[(i, i)], 0.0);
                for k in 0..4 {
                    prop_assert_eq!(b.j[(i, k)], b.j[(k, i)]);
                    prop_assert!((b.j[(i, k)] - c * c * a.j[(i, k)]).abs() <= 1e-12 * a.j[(i, k)].abs());
                }
            }
        }
    }
}
