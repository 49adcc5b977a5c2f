//! TOML experiment configuration. Frequencies are entered in MHz (linear),
//! durations in microseconds, and converted to SI / rad/s on use.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::detection::DetectionModel;
use crate::coupling::{default_delta_k, rabi_from_drive_strength, RamanConfig};
use crate::crystal::TrapConfig;
use crate::dynamics::{Direction, NoiseModel, RampSchedule};
use crate::error::{Error, Result};
use crate::modes::ModeSpectrum;
use crate::units::{khz, mhz, AMU};

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub trap: TrapSection,
    pub raman: Option<RamanSection>,
    pub schedule: Option<ScheduleSection>,
    pub engine: Option<EngineSection>,
    pub noise: Option<NoiseSection>,
    pub detection: Option<DetectionSection>,
    pub scan: Option<ScanSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    pub n_ions: usize,
    pub freq_x_mhz: f64,
    pub freq_y_mhz: f64,
    pub freq_z_mhz: f64,
    #[serde(default = "default_mass_amu")]
    pub mass_amu: f64,
    #[serde(default = "default_n_starts")]
    pub n_starts: usize,
}

fn default_mass_amu() -> f64 {
    171.0
}

fn default_n_starts() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamanSection {
    /// Raman beam strength W0 in the `H = W0 sigma` convention; the Rabi
    /// frequency entering the couplings is twice this value.
    pub drive_strength_mhz: Option<f64>,
    /// Per-ion Rabi frequencies W_i / 2pi of the coupling formula.
    pub rabi_mhz: Option<Vec<f64>>,
    /// Absolute beat-note detuning mu / 2pi.
    pub detuning_mhz: Option<f64>,
    /// Detuning relative to a transverse mode, positive to the blue.
    pub detuning_offset_khz: Option<f64>,
    /// Mode the offset is measured from; 0 is the COM mode.
    #[serde(default)]
    pub offset_mode: usize,
    #[serde(default = "default_wavelength_nm")]
    pub wavelength_nm: f64,
    #[serde(default = "default_guard_band_khz")]
    pub guard_band_khz: f64,
}

fn default_wavelength_nm() -> f64 {
    355.0
}

fn default_guard_band_khz() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub b0_mhz: f64,
    pub duration_us: f64,
    /// B(0) / B(duration); mutually exclusive with `ramp_alpha_per_us`.
    pub end_ratio: Option<f64>,
    pub ramp_alpha_per_us: Option<f64>,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    /// +1 prepares the ground state of H, -1 the highest excited state.
    #[serde(default = "default_sign")]
    pub sign: i8,
    #[serde(default = "default_integrator_tol")]
    pub integrator_tol: f64,
}

fn default_direction() -> Direction {
    Direction::Forward
}

fn default_n_samples() -> usize {
    31
}

fn default_sign() -> i8 {
    1
}

fn default_integrator_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    /// Closed transverse-field Ising model with all-mode couplings.
    Tfim,
    /// Spins coupled to a single mode, with optional heating.
    SpinBoson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    pub kind: EngineKind,
    /// Mode index for the spin-boson engine; 0 is the COM mode.
    #[serde(default)]
    pub mode: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Quanta per second.
    pub heating_rate: f64,
    #[serde(default = "default_phonon_cutoff")]
    pub phonon_cutoff: usize,
    #[serde(default)]
    pub initial_nbar: f64,
}

fn default_phonon_cutoff() -> usize {
    15
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    pub fidelity: Option<f64>,
    pub per_ion_fidelity: Option<Vec<f64>>,
    /// Absent means exact probabilities only.
    pub shots: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    /// [lo, hi, step] in MHz.
    pub mu_range_mhz: Option<[f64; 3]>,
    /// Also run the configured ramp at every scan point.
    #[serde(default)]
    pub evolve: bool,
}

fn config_err(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Structural checks that need no physics; raised as configuration errors.
    pub fn validate(&self) -> Result<()> {
        self.trap_config()?;
        if self.trap.n_starts == 0 {
            return Err(config_err("trap.n_starts", "must be at least 1"));
        }
        if let Some(r) = &self.raman {
            match (r.drive_strength_mhz, &r.rabi_mhz) {
                (Some(_), Some(_)) | (None, None) => {
                    return Err(config_err("raman", "set exactly one of drive_strength_mhz and rabi_mhz"))
                }
                (Some(s), None) if !(s >= 0.0) => return Err(config_err("raman.drive_strength_mhz", "must be non-negative")),
                (None, Some(v)) if v.len() != self.trap.n_ions => {
                    return Err(config_err("raman.rabi_mhz", format!("needs {} entries", self.trap.n_ions)))
                }
                _ => {}
            }
            match (r.detuning_mhz, r.detuning_offset_khz) {
                (Some(_), Some(_)) | (None, None) => {
                    return Err(config_err("raman", "set exactly one of detuning_mhz and detuning_offset_khz"))
                }
                (Some(d), None) if !(d > 0.0) => return Err(config_err("raman.detuning_mhz", "must be positive")),
                _ => {}
            }
            if r.offset_mode >= self.trap.n_ions {
                return Err(config_err("raman.offset_mode", "exceeds the number of modes"));
            }
            if !(r.wavelength_nm > 0.0) {
                return Err(config_err("raman.wavelength_nm", "must be positive"));
            }
            if !(r.guard_band_khz >= 0.0) {
                return Err(config_err("raman.guard_band_khz", "must be non-negative"));
            }
        }
        if let Some(s) = &self.schedule {
            self.schedule_from(s)?;
            if s.sign != 1 && s.sign != -1 {
                return Err(config_err("schedule.sign", "must be 1 or -1"));
            }
            if !(s.integrator_tol > 0.0) {
                return Err(config_err("schedule.integrator_tol", "must be positive"));
            }
        }
        if let Some(e) = &self.engine {
            if e.mode >= self.trap.n_ions {
                return Err(config_err("engine.mode", "exceeds the number of modes"));
            }
        }
        if let Some(n) = &self.noise {
            self.noise_model_from(n).validate().map_err(|e| config_err("noise", e))?;
        }
        if let Some(d) = &self.detection {
            self.detection_model_from(d, 1)?;
        }
        if let Some(sc) = &self.scan {
            if let Some(r) = sc.mu_range_mhz {
                parse_range_checked(r).map_err(|e| config_err("scan.mu_range_mhz", e))?;
            }
        }
        Ok(())
    }

    pub fn trap_config(&self) -> Result<TrapConfig> {
        let t = &self.trap;
        let mut cfg = TrapConfig::yb171(t.n_ions, t.freq_x_mhz, t.freq_y_mhz, t.freq_z_mhz);
        cfg.mass = t.mass_amu * AMU;
        cfg.validate().map_err(|e| config_err("trap", e))?;
        Ok(cfg)
    }

    pub fn raman_section(&self) -> Result<&RamanSection> {
        self.raman.as_ref().ok_or_else(|| config_err("raman", "section is required for this command"))
    }

    pub fn schedule_section(&self) -> Result<&ScheduleSection> {
        self.schedule.as_ref().ok_or_else(|| config_err("schedule", "section is required for this command"))
    }

    /// Rabi frequencies in rad/s.
    pub fn rabi(&self) -> Result<Vec<f64>> {
        let r = self.raman_section()?;
        Ok(match (&r.rabi_mhz, r.drive_strength_mhz) {
            (Some(v), _) => v.iter().map(|w| mhz(*w)).collect(),
            (None, Some(s)) => vec![rabi_from_drive_strength(mhz(s)); self.trap.n_ions],
            (None, None) => unreachable!("validated"),
        })
    }

    /// Beat-note detuning in rad/s; offsets are resolved against `spec`.
    pub fn detuning(&self, spec: &ModeSpectrum) -> Result<f64> {
        let r = self.raman_section()?;
        Ok(match (r.detuning_mhz, r.detuning_offset_khz) {
            (Some(d), _) => mhz(d),
            (None, Some(off)) => spec.frequencies[r.offset_mode] + khz(off),
            (None, None) => unreachable!("validated"),
        })
    }

    pub fn guard_band(&self) -> Result<f64> {
        Ok(khz(self.raman_section()?.guard_band_khz))
    }

    pub fn raman_config(&self, spec: &ModeSpectrum) -> Result<RamanConfig> {
        let r = self.raman_section()?;
        let wavelength = r.wavelength_nm * 1e-9;
        let b_field = self.schedule.as_ref().map_or(0.0, |s| mhz(s.b0_mhz));
        let mut rc = RamanConfig::uniform(self.trap.n_ions, 0.0, self.detuning(spec)?, b_field);
        rc.rabi = self.rabi()?;
        rc.wavelength = wavelength;
        rc.delta_k = default_delta_k(wavelength);
        Ok(rc)
    }

    fn schedule_from(&self, s: &ScheduleSection) -> Result<RampSchedule> {
        if !(s.b0_mhz > 0.0) {
            return Err(config_err("schedule.b0_mhz", "must be positive"));
        }
        if !(s.duration_us > 0.0) {
            return Err(config_err("schedule.duration_us", "must be positive"));
        }
        if s.n_samples < 2 {
            return Err(config_err("schedule.n_samples", "must be at least 2"));
        }
        let duration = s.duration_us * 1e-6;
        let alpha = match (s.end_ratio, s.ramp_alpha_per_us) {
            (Some(r), None) if r > 1.0 => (r - 1.0) / duration,
            (Some(_), None) => return Err(config_err("schedule.end_ratio", "must exceed 1")),
            (None, Some(a)) if a > 0.0 => a * 1e6,
            (None, Some(_)) => return Err(config_err("schedule.ramp_alpha_per_us", "must be positive")),
            _ => return Err(config_err("schedule", "set exactly one of end_ratio and ramp_alpha_per_us")),
        };
        let mut sched = RampSchedule::with_end_ratio(mhz(s.b0_mhz), duration, 2.0, s.direction, s.n_samples);
        sched.ramp_alpha = alpha;
        Ok(sched)
    }

    pub fn schedule(&self) -> Result<RampSchedule> {
        self.schedule_from(self.schedule_section()?)
    }

    pub fn engine(&self) -> EngineSection {
        self.engine.clone().unwrap_or(EngineSection { kind: EngineKind::Tfim, mode: 0 })
    }

    fn noise_model_from(&self, n: &NoiseSection) -> NoiseModel {
        NoiseModel { heating_rate: n.heating_rate, phonon_cutoff: n.phonon_cutoff, initial_nbar: n.initial_nbar }
    }

    pub fn noise_model(&self) -> Option<NoiseModel> {
        self.noise.as_ref().map(|n| self.noise_model_from(n))
    }

    fn detection_model_from(&self, d: &DetectionSection, default_shots: u64) -> Result<DetectionModel> {
        let n = self.trap.n_ions;
        let per_ion = match (d.fidelity, &d.per_ion_fidelity) {
            (Some(f), None) => vec![f; n],
            (None, Some(v)) => v.clone(),
            (None, None) => vec![1.0; n],
            (Some(_), Some(_)) => {
                return Err(config_err("detection", "set at most one of fidelity and per_ion_fidelity"))
            }
        };
        if per_ion.len() != n {
            return Err(config_err("detection.per_ion_fidelity", format!("needs {n} entries")));
        }
        let model = DetectionModel { per_ion_fidelity: per_ion, shots: d.shots.unwrap_or(default_shots), rng_seed: self.seed };
        model.validate().map_err(|e| config_err("detection", e))?;
        Ok(model)
    }

    /// Detection model with the run seed; `shots` is 1 when only exact
    /// probabilities are requested.
    pub fn detection_model(&self) -> Result<Option<DetectionModel>> {
        self.detection.as_ref().map(|d| self.detection_model_from(d, 1)).transpose()
    }

    pub fn shots(&self) -> Option<u64> {
        self.detection.as_ref().and_then(|d| d.shots)
    }
}

fn parse_range_checked(r: [f64; 3]) -> std::result::Result<(f64, f64, f64), String> {
    let [lo, hi, step] = r;
    if !(step > 0.0) {
        return Err("step must be positive".into());
    }
    if !(hi >= lo) || !(lo > 0.0) {
        return Err("range must satisfy 0 < lo <= hi".into());
    }
    Ok((lo, hi, step))
}

/// Parse `LO:HI:STEP` in MHz.
pub fn parse_mu_range(text: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(config_err("--mu-range", "expected LO:HI:STEP"));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.trim().parse().map_err(|_| config_err("--mu-range", format!("cannot parse '{p}'")))?;
    }
    parse_range_checked(v).map_err(|e| config_err("--mu-range", e))?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 7
[trap]
n_ions = 4
freq_x_mhz = 0.626
freq_y_mhz = 0.404
freq_z_mhz = 1.503
[raman]
drive_strength_mhz = 0.05
detuning_offset_khz = 10.0
[schedule]
b0_mhz = 0.029
duration_us = 300
end_ratio = 20
sign = -1
"#;

    #[test]
    fn parses_and_converts_units() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.seed, 7);
        let rabi = cfg.rabi().unwrap();
        assert!((rabi[0] - 2.0 * std::f64::consts::PI * 100e3).abs() < 1e-6);
        let s = cfg.schedule().unwrap();
        assert!((s.end_field() - s.b0 / 20.0).abs() < 1e-9 * s.b0);
        assert_eq!(cfg.engine().kind, EngineKind::Tfim);
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_are_named() {
        let text = BASE.replace("sign = -1", "sign = -1\nramp_speed = 3");
        match ExperimentConfig::from_toml(&text) {
            Err(Error::Config(msg)) => assert!(msg.contains("ramp_speed"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn conflicting_keys_are_rejected() {
        let text = BASE.replace("end_ratio = 20", "end_ratio = 20\nramp_alpha_per_us = 0.1");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config(_))));
        let text = BASE.replace("detuning_offset_khz = 10.0", "detuning_offset_khz = 10.0\ndetuning_mhz = 1.5");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config(_))));
        let text = BASE.replace("freq_y_mhz = 0.404", "freq_y_mhz = 0.626");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let err = crate::crystal::solve_equilibrium(&cfg.trap_config().unwrap(), 1, 0).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn mu_range_parsing() {
        assert_eq!(parse_mu_range("1.2:1.3:0.001").unwrap(), [1.2, 1.3, 0.001]);
        assert!(parse_mu_range("1.3:1.2:0.001").is_err());
        assert!(parse_mu_range("1.2:1.3").is_err());
        assert!(parse_mu_range("a:1.3:0.1").is_err());
    }
}
