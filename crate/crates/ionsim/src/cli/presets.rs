//! Built-in experiment configurations, one per reproduced figure.

use crate::cli::config::ExperimentConfig;
use crate::error::{Error, Result};

/// Which command a preset runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetCommand {
    Evolve,
    Reverse,
}

pub struct Preset {
    pub id: &'static str,
    pub description: &'static str,
    pub command: PresetCommand,
    /// One or more runs; multi-run presets write into named subdirectories.
    pub runs: Vec<(&'static str, String)>,
}

const FOUR_ION_TRAP: &str = "[trap]\nn_ions = 4\nfreq_x_mhz = 0.626\nfreq_y_mhz = 0.404\nfreq_z_mhz = 1.503\n";
const SEVEN_ION_TRAP: &str = "[trap]\nn_ions = 7\nfreq_x_mhz = 0.486\nfreq_y_mhz = 0.407\nfreq_z_mhz = 1.482\n";
const TEN_ION_TRAP: &str = "[trap]\nn_ions = 10\nfreq_x_mhz = 0.626\nfreq_y_mhz = 0.404\nfreq_z_mhz = 1.503\n";

fn four_ion_spin_boson(noise: Option<f64>, duration_us: f64) -> String {
    let mut s = format!(
        "seed = 1\n{FOUR_ION_TRAP}
[raman]
drive_strength_mhz = 0.05
detuning_offset_khz = 7.5
offset_mode = 0

[schedule]
b0_mhz = 0.029
duration_us = {duration_us:.1}
end_ratio = 20.0
n_samples = 31
sign = -1

[engine]
kind = \"spin_boson\"
mode = 0

[detection]
fidelity = 0.982
shots = 10000
"
    );
    if let Some(rate) = noise {
        s.push_str(&format!("\n[noise]\nheating_rate = {rate:.1}\nphonon_cutoff = 15\n"));
    }
    s
}

/// B0 is about 20 max|J| at the given detuning, the ratio of the 4-ion runs.
fn seven_ion(detuning_mhz: f64, b0_mhz: f64, direction: &str) -> String {
    format!(
        "seed = 1\n{SEVEN_ION_TRAP}
[raman]
drive_strength_mhz = 0.05
detuning_mhz = {detuning_mhz}

[schedule]
b0_mhz = {b0_mhz}
duration_us = 300.0
end_ratio = 20.0
direction = \"{direction}\"
n_samples = 31
sign = 1

[engine]
kind = \"tfim\"

[detection]
fidelity = 0.978
shots = 10000
"
    )
}

fn preset_list() -> Vec<Preset> {
    vec![
        Preset {
            id: "fig2b",
            description: "4 ions, ferromagnetic ground state with heating, optimized detuning above the COM mode",
            command: PresetCommand::Evolve,
            runs: vec![("", four_ion_spin_boson(Some(3200.0), 300.0))],
        },
        Preset {
            id: "fig2d",
            description: "4 ions, couplings from all modes, detuning 10 kHz below mode 3",
            command: PresetCommand::Evolve,
            runs: vec![(
                "",
                format!(
                    "seed = 1\n{FOUR_ION_TRAP}
[raman]
drive_strength_mhz = 0.05
detuning_offset_khz = -10.0
offset_mode = 2

[schedule]
b0_mhz = 0.029
duration_us = 300.0
end_ratio = 20.0
n_samples = 31
sign = 1

[engine]
kind = \"tfim\"

[detection]
fidelity = 0.982
shots = 10000
"
                ),
            )],
        },
        Preset {
            id: "fig3b",
            description: "7 ions, frustrated ring with a free center",
            command: PresetCommand::Evolve,
            runs: vec![("", seven_ion(1.328, 0.013, "forward"))],
        },
        Preset {
            id: "fig3d",
            description: "7 ions, two-domain ground state",
            command: PresetCommand::Evolve,
            runs: vec![("", seven_ion(1.231, 0.0034, "forward"))],
        },
        Preset {
            id: "fig3f",
            description: "7 ions, half-ring domains with a free center",
            command: PresetCommand::Evolve,
            runs: vec![("", seven_ion(1.416, 0.057, "forward"))],
        },
        Preset {
            id: "fig4",
            description: "7 ions, round-trip ramp and S_x return",
            command: PresetCommand::Reverse,
            runs: vec![("", seven_ion(1.328, 0.013, "round_trip"))],
        },
        Preset {
            id: "fig5",
            description: "10 ions, two centers and an eight-ion ring",
            command: PresetCommand::Evolve,
            runs: vec![(
                "",
                format!(
                    "seed = 1\n{TEN_ION_TRAP}
[raman]
drive_strength_mhz = 0.05
detuning_mhz = 1.296

[schedule]
b0_mhz = 0.035
duration_us = 300.0
end_ratio = 20.0
n_samples = 31
sign = 1

[engine]
kind = \"tfim\"

[detection]
fidelity = 0.980
shots = 10000
"
                ),
            )],
        },
        Preset {
            id: "figS4",
            description: "4 ions, spin-boson evolution without and with motional heating",
            command: PresetCommand::Evolve,
            runs: vec![
                ("noiseless", four_ion_spin_boson(None, 400.0)),
                ("heating", four_ion_spin_boson(Some(3200.0), 400.0)),
            ],
        },
    ]
}

pub fn preset_ids() -> Vec<&'static str> {
    preset_list().iter().map(|p| p.id).collect()
}

pub fn preset(id: &str) -> Result<Preset> {
    preset_list()
        .into_iter()
        .find(|p| p.id.eq_ignore_ascii_case(id))
        .ok_or_else(|| Error::Config(format!("unknown figure '{id}'; known: {}", preset_ids().join(", "))))
}

impl Preset {
    pub fn configs(&self) -> Result<Vec<(&'static str, ExperimentConfig)>> {
        self.runs.iter().map(|(name, text)| Ok((*name, ExperimentConfig::from_toml(text)?))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for id in preset_ids() {
            let p = preset(id).unwrap();
            assert!(!p.configs().unwrap().is_empty(), "{id}");
        }
    }

    #[test]
    fn unknown_figure_is_a_config_error() {
        assert!(matches!(preset("fig9"), Err(Error::Config(_))));
    }
}
