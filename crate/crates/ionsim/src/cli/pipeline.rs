//! Command implementations shared by the subcommands and the figure presets.

use serde::Serialize;
use serde_json::json;

use crate::analysis::detection::{apply_detection_and_sample, detection_channel, DetectionModel};
use crate::analysis::manifold::GroundManifold;
use crate::analysis::stats::{sx_from_x_histogram, sx_mean};
use crate::cli::config::{EngineKind, ExperimentConfig};
use crate::cli::output::OutputDir;
use crate::coupling::{compute_couplings_with_guard, interaction_graph, scan_detuning, CouplingMatrix};
use crate::crystal::{solve_equilibrium, CrystalGeometry, TrapConfig};
use crate::dynamics::spin_boson::{evolve_spin_boson, evolve_spin_boson_pure, SpinBosonParams};
use crate::dynamics::state::bitstring;
use crate::dynamics::tfim::{evolve_tfim, initial_state_for_sign, EvolveOptions};
use crate::dynamics::{run_reversal_experiment, Direction, ReversalEngine};
use crate::error::{Error, Result};
use crate::modes::{full_modes, transverse_modes, ModeSpectrum};
use crate::units::mhz;

const GRAPH_THRESHOLD: f64 = 0.1;
const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

fn to_mhz(w: f64) -> f64 {
    w / TWO_PI / 1e6
}

/// Crystal and transverse spectrum for a configuration.
pub struct Prepared {
    pub trap: TrapConfig,
    pub geometry: CrystalGeometry,
    pub spectrum: ModeSpectrum,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let trap = cfg.trap_config()?;
    let geometry = solve_equilibrium(&trap, cfg.trap.n_starts, cfg.seed)?;
    let spectrum = transverse_modes(&trap, &geometry)?;
    Ok(Prepared { trap, geometry, spectrum })
}

pub fn couplings(cfg: &ExperimentConfig, prep: &Prepared) -> Result<CouplingMatrix> {
    let raman = cfg.raman_config(&prep.spectrum)?;
    compute_couplings_with_guard(&prep.spectrum, &raman, prep.trap.mass, cfg.guard_band()?)
}

fn evolve_options(cfg: &ExperimentConfig) -> Result<EvolveOptions> {
    let s = cfg.schedule_section()?;
    Ok(EvolveOptions { integrator_tol: s.integrator_tol, sign: s.sign, ..Default::default() })
}

fn spin_boson_params(cfg: &ExperimentConfig, prep: &Prepared, mode: usize) -> Result<SpinBosonParams> {
    let raman = cfg.raman_config(&prep.spectrum)?;
    let spec = &prep.spectrum;
    Ok(SpinBosonParams {
        rabi: raman.rabi,
        mode_frequency: spec.frequencies[mode],
        mode_vector: spec.mode_matrix.column(mode).iter().copied().collect(),
        detuning_mu: raman.detuning_mu,
        delta_k: raman.delta_k,
        mass: prep.trap.mass,
    })
}

pub fn geometry(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Prepared> {
    let prep = prepare(cfg)?;
    out.write("geometry.csv", &prep.geometry.to_csv())?;
    out.write_json(
        "geometry.json",
        &json!({
            "id": prep.geometry.id(),
            "geometry": prep.geometry,
            "min_separation_m": prep.geometry.min_separation(),
        }),
    )?;
    Ok(prep)
}

pub fn modes(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let prep = geometry(cfg, out)?;
    let full = full_modes(&prep.trap, &prep.geometry)?;
    out.write("modes.csv", &prep.spectrum.to_csv())?;
    out.write("modes_full.csv", &full.to_csv())?;
    let mhz_list: Vec<f64> = prep.spectrum.frequencies.iter().map(|w| to_mhz(*w)).collect();
    out.write_json("modes.json", &json!({ "transverse_mhz": mhz_list, "transverse": prep.spectrum, "full": full }))
}

#[derive(Serialize)]
struct ManifoldReport<'a> {
    degeneracy: usize,
    energy_rad_s: f64,
    gap_rad_s: Option<f64>,
    bitstrings: Vec<String>,
    manifold: &'a GroundManifold,
}

fn manifold_report(m: &GroundManifold, n: usize) -> ManifoldReport<'_> {
    ManifoldReport {
        degeneracy: m.len(),
        energy_rad_s: m.energy,
        gap_rad_s: m.gap,
        bitstrings: m.indices.iter().map(|&k| bitstring(k, n)).collect(),
        manifold: m,
    }
}

fn sign_of(cfg: &ExperimentConfig) -> f64 {
    cfg.schedule.as_ref().map_or(1.0, |s| f64::from(s.sign))
}

pub fn couplings_cmd(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let prep = geometry(cfg, out)?;
    out.write("modes.csv", &prep.spectrum.to_csv())?;
    let jm = couplings(cfg, &prep)?;
    let n = jm.n();
    out.write("couplings.csv", &jm.to_csv())?;
    let edges = interaction_graph(&jm, GRAPH_THRESHOLD)?;
    out.write_json("graph.json", &json!({ "threshold": GRAPH_THRESHOLD, "edges": edges }))?;
    let manifold = crate::dynamics::tfim::signed_manifold(&jm, sign_of(cfg));
    out.write_json("manifold.json", &manifold_report(&manifold, n))
}

pub fn scan(cfg: &ExperimentConfig, mu_range: Option<[f64; 3]>, out: &mut OutputDir) -> Result<()> {
    let range = mu_range
        .or_else(|| cfg.scan.as_ref().and_then(|s| s.mu_range_mhz))
        .ok_or_else(|| Error::Config("scan.mu_range_mhz: required for scan (or pass --mu-range)".into()))?;
    let evolve = cfg.scan.as_ref().is_some_and(|s| s.evolve);
    let prep = prepare(cfg)?;
    let mut template = cfg.raman_config(&prep.spectrum)?;
    template.detuning_mu = mhz(range[0]);
    let points = scan_detuning(&prep.spectrum, &template, mhz(range[0]), mhz(range[1]), mhz(range[2]), prep.trap.mass)?;
    let sign = sign_of(cfg);
    let mut csv = String::from("mu_mhz,skipped_mode,degeneracy,energy_rad_s,gap_rad_s,max_abs_j_rad_s");
    if evolve {
        csv.push_str(",final_manifold_pop");
    }
    csv.push('\n');
    let mut rows = Vec::new();
    for p in &points {
        let mut row = json!({ "mu_mhz": to_mhz(p.mu), "skipped_mode": p.skipped_resonance });
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        let (deg, energy, gap, jmax, pop) = match &p.coupling {
            Some(jm) => {
                let m = crate::dynamics::tfim::signed_manifold(jm, sign);
                row["degeneracy"] = json!(m.len());
                row["bitstrings"] = json!(manifold_report(&m, jm.n()).bitstrings);
                row["gap_rad_s"] = json!(m.gap);
                let pop = if evolve {
                    let traj = evolve_tfim(jm, &cfg.schedule()?, &initial_state_for_sign(jm.n(), sign as i8), &EvolveOptions {
                        track_exact_ground: false,
                        ..evolve_options(cfg)?
                    })?;
                    let v = traj.final_sample().ground_manifold_pop;
                    row["final_manifold_pop"] = json!(v);
                    Some(v)
                } else {
                    None
                };
                (m.len().to_string(), m.energy.to_string(), opt(m.gap), jm.max_abs().to_string(), pop)
            }
            None => Default::default(),
        };
        csv.push_str(&format!(
            "{},{},{deg},{energy},{gap},{jmax}",
            to_mhz(p.mu),
            p.skipped_resonance.map_or(String::new(), |m| m.to_string())
        ));
        if evolve {
            csv.push_str(&format!(",{}", opt(pop)));
        }
        csv.push('\n');
        rows.push(row);
    }
    out.write("scan.csv", &csv)?;
    out.write_json("scan.json", &json!({ "mu_range_mhz": range, "points": rows }))
}

fn histogram_csv(n: usize, probs: &[f64], detected: &[f64]) -> String {
    let mut s = String::from("index,bitstring,probability,detected\n");
    for (k, (p, d)) in probs.iter().zip(detected).enumerate() {
        s.push_str(&format!("{k},{},{p},{d}\n", bitstring(k, n)));
    }
    s
}

fn detection_or_ideal(cfg: &ExperimentConfig) -> Result<DetectionModel> {
    Ok(cfg
        .detection_model()?
        .unwrap_or_else(|| DetectionModel::uniform(cfg.trap.n_ions, 1.0, 1, cfg.seed)))
}

/// Final spin populations plus engine-specific summary fields.
struct EvolveOutcome {
    populations: Vec<f64>,
    manifold: GroundManifold,
    summary: serde_json::Value,
}

pub fn evolve(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let prep = prepare(cfg)?;
    let n = cfg.trap.n_ions;
    let opts = evolve_options(cfg)?;
    let schedule = cfg.schedule()?;
    let initial = initial_state_for_sign(n, opts.sign);
    let engine = cfg.engine();
    let outcome = match engine.kind {
        EngineKind::Tfim => {
            let jm = couplings(cfg, &prep)?;
            out.write("couplings.csv", &jm.to_csv())?;
            let traj = evolve_tfim(&jm, &schedule, &initial, &opts)?;
            out.write("trajectory.csv", &traj.to_csv(false))?;
            out.write("populations.csv", &traj.to_csv(true))?;
            let last = traj.final_sample();
            EvolveOutcome {
                populations: last.populations.clone(),
                manifold: traj.manifold.clone(),
                summary: json!({
                    "engine": "tfim",
                    "overlap_exact_ground": last.overlap_exact_ground,
                    "exact_ground_manifold_pop": last.exact_ground_manifold_pop,
                    "final_norm": last.norm,
                    "ode_accepted_steps": traj.stats.accepted,
                    "ode_rejected_steps": traj.stats.rejected,
                }),
            }
        }
        EngineKind::SpinBoson => {
            let params = spin_boson_params(cfg, &prep, engine.mode)?;
            out.write("couplings.csv", &params.effective_couplings().to_csv())?;
            let traj = match cfg.noise_model() {
                Some(noise) => evolve_spin_boson(&params, &noise, &schedule, &initial, &opts)?,
                None => evolve_spin_boson_pure(&params, 15, &schedule, &initial, &opts)?,
            };
            out.write("trajectory.csv", &traj.to_csv(false))?;
            out.write("populations.csv", &traj.to_csv(true))?;
            let last = traj.final_sample();
            EvolveOutcome {
                populations: last.populations.clone(),
                manifold: traj.manifold.clone(),
                summary: json!({
                    "engine": "spin_boson",
                    "mode": engine.mode,
                    "mode_mhz": to_mhz(params.mode_frequency),
                    "open_system": cfg.noise.is_some(),
                    "n_cut_used": traj.n_cut_used,
                    "cutoff_retried": traj.retried,
                    "max_top_level_pop": traj.max_top_level_pop,
                    "final_nbar": last.nbar,
                    "final_trace": last.trace,
                    "min_eigenvalue": last.min_eigenvalue,
                    "final_sx_distribution": last.sx_distribution,
                    "ode_accepted_steps": traj.stats.accepted,
                    "ode_rejected_steps": traj.stats.rejected,
                }),
            }
        }
    };
    let det = detection_or_ideal(cfg)?;
    let detected = detection_channel(&outcome.populations, &det.per_ion_fidelity)?;
    out.write("final_histogram.csv", &histogram_csv(n, &outcome.populations, &detected))?;
    out.write_json("manifold.json", &manifold_report(&outcome.manifold, n))?;
    let ideal_pop: f64 = outcome.manifold.indices.iter().map(|&k| outcome.populations[k]).sum();
    let detected_pop: f64 = outcome.manifold.indices.iter().map(|&k| detected[k]).sum();
    let mut summary = outcome.summary;
    summary["n_ions"] = json!(n);
    summary["detuning_mhz"] = json!(to_mhz(cfg.detuning(&prep.spectrum)?));
    summary["sign"] = json!(opts.sign);
    summary["manifold_degeneracy"] = json!(outcome.manifold.len());
    summary["ground_manifold_pop"] = json!(ideal_pop);
    summary["ground_manifold_pop_detected"] = json!(detected_pop);
    summary["detection_fidelity"] = json!(det.per_ion_fidelity);
    if let Some(shots) = cfg.shots() {
        let model = DetectionModel { shots, ..det };
        let sampled = apply_detection_and_sample(&outcome.populations, &model)?;
        out.write("shots.txt", &sampled.shot_lines(n))?;
        let mut csv = String::from("index,bitstring,count,frequency\n");
        for (k, (c, f)) in sampled.counts.iter().zip(&sampled.histogram).enumerate() {
            csv.push_str(&format!("{k},{},{c},{f}\n", bitstring(k, n)));
        }
        out.write("sampled_histogram.csv", &csv)?;
        let sampled_pop: f64 = outcome.manifold.indices.iter().map(|&k| sampled.histogram[k]).sum();
        summary["ground_manifold_pop_sampled"] = json!(sampled_pop);
        out.note("sampling", json!({ "shots": shots, "rng": "ChaCha8", "seed": model.rng_seed }));
    }
    out.write_json("summary.json", &summary)
}

pub fn reverse(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let prep = prepare(cfg)?;
    let n = cfg.trap.n_ions;
    let opts = evolve_options(cfg)?;
    let mut schedule = cfg.schedule()?;
    schedule.direction = Direction::RoundTrip;
    let engine_cfg = cfg.engine();
    let engine = match engine_cfg.kind {
        EngineKind::Tfim => ReversalEngine::Closed { jm: couplings(cfg, &prep)? },
        EngineKind::SpinBoson => ReversalEngine::SpinBoson {
            params: spin_boson_params(cfg, &prep, engine_cfg.mode)?,
            noise: cfg.noise_model(),
            phonon_cutoff: cfg.noise.as_ref().map_or(15, |s| s.phonon_cutoff),
        },
    };
    let result = run_reversal_experiment(&engine, &schedule, &initial_state_for_sign(n, opts.sign), &opts)?;
    let det = detection_or_ideal(cfg)?;
    let detected: Vec<Vec<f64>> = result
        .x_histograms
        .iter()
        .map(|h| detection_channel(h, &det.per_ion_fidelity).map(|d| sx_from_x_histogram(&d, n)))
        .collect::<Result<_>>()?;
    let mut csv = String::from("sx,initial,turning_point,final,initial_detected,turning_point_detected,final_detected\n");
    for k in 0..=n {
        let sx = k as f64 - n as f64 / 2.0;
        csv.push_str(&format!(
            "{sx},{},{},{},{},{},{}\n",
            result.initial_sx[k], result.mid_sx[k], result.final_sx[k], detected[0][k], detected[1][k], detected[2][k]
        ));
    }
    out.write("reversal.csv", &csv)?;
    out.write_json(
        "reversal.json",
        &json!({
            "return_population": result.return_population,
            "turning_point_manifold_pop": result.mid_manifold_pop,
            "mean_sx": [sx_mean(&result.initial_sx), sx_mean(&result.mid_sx), sx_mean(&result.final_sx)],
            "initial_sx": result.initial_sx,
            "turning_point_sx": result.mid_sx,
            "final_sx": result.final_sx,
            "detected_sx": detected,
        }),
    )
}
