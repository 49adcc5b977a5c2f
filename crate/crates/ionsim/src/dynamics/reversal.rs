//! Round-trip ramps: ramp the field down, mirror it back up, and compare the
//! returned S_x distribution with the starting one.

use serde::Serialize;

use crate::analysis::stats::{population_histogram, sx_from_x_histogram};
use crate::coupling::CouplingMatrix;
use crate::dynamics::ramp::{Direction, RampSchedule};
use crate::dynamics::spin_boson::{evolve_spin_boson, evolve_spin_boson_pure, NoiseModel, SpinBosonParams};
use crate::dynamics::state::{Basis, QuantumState};
use crate::dynamics::tfim::{evolve_tfim, EvolveOptions};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum ReversalEngine {
    /// Closed transverse-field Ising dynamics with fixed couplings.
    Closed { jm: CouplingMatrix },
    /// Single-mode spin-boson dynamics; `noise = None` runs the pure-state engine.
    SpinBoson { params: SpinBosonParams, noise: Option<NoiseModel>, phonon_cutoff: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct ReversalResult {
    /// x-basis histograms at the start, turning point and end.
    pub x_histograms: [Vec<f64>; 3],
    pub initial_sx: Vec<f64>,
    /// At the turning point of the ramp.
    pub mid_sx: Vec<f64>,
    pub final_sx: Vec<f64>,
    /// Final population of the S_x value the initial product state occupies.
    pub return_population: f64,
    /// Ground-manifold population at the turning point.
    pub mid_manifold_pop: f64,
}

/// Run a round-trip schedule and collect S_x distributions at its start,
/// turning point and end. Sample times of `schedule` are replaced.
pub fn run_reversal_experiment(
    engine: &ReversalEngine,
    schedule: &RampSchedule,
    initial: &QuantumState,
    opts: &EvolveOptions,
) -> Result<ReversalResult> {
    if schedule.direction != Direction::RoundTrip {
        return Err(Error::InvalidInput("reversal needs a round_trip schedule".into()));
    }
    let mut sched = schedule.clone();
    sched.sample_times = vec![0.0, schedule.duration, schedule.total_duration()];
    let (dists, mid_manifold_pop) = match engine {
        ReversalEngine::Closed { jm } => {
            let o = EvolveOptions { record_states: true, track_exact_ground: false, ..*opts };
            let traj = evolve_tfim(jm, &sched, initial, &o)?;
            let d: Vec<Vec<f64>> = traj
                .samples
                .iter()
                .map(|s| population_histogram(s.state.as_ref().expect("states recorded"), Basis::X))
                .collect();
            (d, traj.samples[1].ground_manifold_pop)
        }
        ReversalEngine::SpinBoson { params, noise, phonon_cutoff } => {
            let traj = match noise {
                Some(nm) => evolve_spin_boson(params, nm, &sched, initial, opts)?,
                None => evolve_spin_boson_pure(params, *phonon_cutoff, &sched, initial, opts)?,
            };
            let d: Vec<Vec<f64>> = traj.samples.iter().map(|s| s.x_populations.clone()).collect();
            (d, traj.samples[1].ground_manifold_pop)
        }
    };
    let x_histograms: [Vec<f64>; 3] =
        dists.try_into().map_err(|_| Error::Integration("missing reversal samples".into()))?;
    let n = initial.n_spins;
    let [initial_sx, mid_sx, final_sx] = [0, 1, 2].map(|k| sx_from_x_histogram(&x_histograms[k], n));
    let start = initial_sx
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, p)| if *p > best.1 { (k, *p) } else { best })
        .0;
    Ok(ReversalResult { return_population: final_sx[start], x_histograms, initial_sx, mid_sx, final_sx, mid_manifold_pop })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::tfim::initial_state_for_sign;
    use nalgebra::DMatrix;

    #[test]
    fn free_spins_return_exactly() {
        let jm = CouplingMatrix::from_matrix(DMatrix::zeros(3, 3)).unwrap();
        let sched = RampSchedule::with_end_ratio(2e4, 3e-4, 20.0, Direction::RoundTrip, 2);
        let r = run_reversal_experiment(&ReversalEngine::Closed { jm }, &sched, &initial_state_for_sign(3, 1), &EvolveOptions::default())
            .unwrap();
        assert!((r.return_population - 1.0).abs() < 1e-9);
        assert!((r.mid_sx[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn slow_round_trip_returns() {
        let n = 3;
        let jm = CouplingMatrix::from_matrix(DMatrix::from_fn(n, n, |i, k| if i == k { 0.0 } else { 1e3 * (1.0 + 0.2 * (i + k) as f64) }))
            .unwrap();
        let sched = RampSchedule::with_end_ratio(5e4, 0.05, 100.0, Direction::RoundTrip, 2);
        let opts = EvolveOptions { sign: -1, ..Default::default() };
        let r = run_reversal_experiment(&ReversalEngine::Closed { jm }, &sched, &initial_state_for_sign(n, -1), &opts).unwrap();
        assert!(r.return_population >= 0.99, "{}", r.return_population);
        assert!((r.initial_sx[n] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_one_way_schedules() {
        let jm = CouplingMatrix::from_matrix(DMatrix::zeros(2, 2)).unwrap();
        let sched = RampSchedule::with_end_ratio(2e4, 3e-4, 20.0, Direction::Forward, 2);
        assert!(run_reversal_experiment(&ReversalEngine::Closed { jm }, &sched, &initial_state_for_sign(2, 1), &EvolveOptions::default())
            .is_err());
    }
}
