//! Command-line front end.

pub mod config;
pub mod output;
pub mod pipeline;
pub mod presets;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use config::{DetectionSection, ExperimentConfig};
use output::OutputDir;
use presets::PresetCommand;

#[derive(Debug, Parser)]
#[command(name = "ionsim", version, about = "Trapped-ion 2D quantum magnet simulator")]
pub struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for all stochastic stages; overrides `seed` from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of detection shots to sample.
    #[arg(long, global = true)]
    pub shots: Option<u64>,
    /// Drop the noise section and run closed dynamics.
    #[arg(long, global = true)]
    pub no_noise: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Equilibrium crystal positions.
    Geometry,
    /// Transverse and full normal modes.
    Modes,
    /// Ising couplings, interaction graph and classical ground manifold.
    Couplings,
    /// Classical ground manifold across a detuning range.
    Scan {
        /// Detuning range LO:HI:STEP in MHz.
        #[arg(long)]
        mu_range: Option<String>,
    },
    /// Adiabatic ramp and final-state statistics.
    Evolve,
    /// Round-trip ramp and S_x return distributions.
    Reverse,
    /// Run a built-in figure configuration.
    Reproduce {
        /// Figure id: fig2b, fig2d, fig3b, fig3d, fig3f, fig4, fig5 or figS4.
        #[arg(long)]
        figure: String,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Geometry => "geometry",
            Command::Modes => "modes",
            Command::Couplings => "couplings",
            Command::Scan { .. } => "scan",
            Command::Evolve => "evolve",
            Command::Reverse => "reverse",
            Command::Reproduce { .. } => "reproduce",
        }
    }
}

fn apply_overrides(cli: &Cli, cfg: &mut ExperimentConfig) -> Result<()> {
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if cli.no_noise {
        cfg.noise = None;
    }
    if let Some(shots) = cli.shots {
        let d = cfg.detection.get_or_insert(DetectionSection { fidelity: None, per_ion_fidelity: None, shots: None });
        d.shots = Some(shots);
    }
    cfg.validate()
}

fn run_command(cmd: &Command, cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    match cmd {
        Command::Geometry => pipeline::geometry(cfg, out).map(|_| ()),
        Command::Modes => pipeline::modes(cfg, out),
        Command::Couplings => pipeline::couplings_cmd(cfg, out),
        Command::Scan { mu_range } => {
            let range = mu_range.as_deref().map(config::parse_mu_range).transpose()?;
            pipeline::scan(cfg, range, out)
        }
        Command::Evolve => pipeline::evolve(cfg, out),
        Command::Reverse => pipeline::reverse(cfg, out),
        Command::Reproduce { .. } => unreachable!("handled by run"),
    }
}

/// Execute a parsed command line; returns the output directories written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    if let Command::Reproduce { figure } = &cli.command {
        let preset = presets::preset(figure)?;
        let cmd = match preset.command {
            PresetCommand::Evolve => Command::Evolve,
            PresetCommand::Reverse => Command::Reverse,
        };
        let base = cli.out.clone().unwrap_or_else(|| PathBuf::from("out").join(preset.id));
        let mut dirs = Vec::new();
        for (name, mut cfg) in preset.configs()? {
            apply_overrides(cli, &mut cfg)?;
            cfg.output_dir = if name.is_empty() { base.clone() } else { base.join(name) };
            let mut out = OutputDir::create(&cfg.output_dir)?;
            run_command(&cmd, &cfg, &mut out)?;
            out.note("figure", serde_json::json!(preset.id));
            dirs.push(out.finish(cmd.name(), &cfg)?);
        }
        return Ok(dirs);
    }
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config: required for this command".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    apply_overrides(cli, &mut cfg)?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    run_command(&cli.command, &cfg, &mut out)?;
    Ok(vec![out.finish(cli.command.name(), &cfg)?])
}
