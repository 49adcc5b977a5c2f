//! Single-mode spin-boson model with motional heating:
//! `H = sum_i g_i sy_i (a e^{-i nu t} + a^dag e^{i nu t}) + B(t) sum_i sx_i`,
//! `g_i = eta_i W_i / 2`, `nu = w_m - mu`, and Lindblad operators
//! `sqrt(G) a`, `sqrt(G) a^dag` for a heating rate `G` (quanta/s).

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::manifold::GroundManifold;
use crate::analysis::stats::{population_histogram, sx_from_x_histogram};
use crate::dynamics::state::Basis;
use crate::coupling::{lamb_dicke, CouplingMatrix};
use crate::dynamics::ode::{Dopri5, OdeStats, Stepper};
use crate::dynamics::ramp::RampSchedule;
use crate::dynamics::state::{QuantumState, StateData};
use crate::dynamics::tfim::{signed_manifold, EvolveOptions};
use crate::error::{Error, Result};

/// Allowed population of the highest retained Fock level.
pub const LEAKAGE_LIMIT: f64 = 1e-3;
/// Allowed trace drift of the density matrix.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-7;
/// Largest density-matrix dimension accepted.
const DENSITY_DIM_BUDGET: usize = 1024;
/// Largest dimension for which the full density matrix is diagonalized at samples.
const FULL_POSITIVITY_DIM: usize = 512;
/// Evenly spaced leakage checkpoints added to the sample times.
const LEAKAGE_CHECKPOINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Mean phonon number growth rate, quanta/s.
    pub heating_rate: f64,
    /// Highest retained Fock level.
    pub phonon_cutoff: usize,
    pub initial_nbar: f64,
}

impl NoiseModel {
    pub fn noiseless(phonon_cutoff: usize) -> Self {
        Self { heating_rate: 0.0, phonon_cutoff, initial_nbar: 0.0 }
    }

    /// Amplitude of the jump operators, sqrt(heating_rate).
    pub fn heating_alpha(&self) -> f64 {
        self.heating_rate.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.heating_rate >= 0.0) || !self.heating_rate.is_finite() {
            return Err(Error::InvalidInput("heating_rate must be non-negative".into()));
        }
        if self.phonon_cutoff < 1 {
            return Err(Error::InvalidInput("phonon_cutoff must be at least 1".into()));
        }
        if !(self.initial_nbar >= 0.0) || !self.initial_nbar.is_finite() {
            return Err(Error::InvalidInput("initial_nbar must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinBosonParams {
    /// Per-ion Rabi frequencies, rad/s.
    pub rabi: Vec<f64>,
    /// Mode angular frequency w_m, rad/s.
    pub mode_frequency: f64,
    /// Normalized participation b_{i,m} of each ion.
    pub mode_vector: Vec<f64>,
    pub detuning_mu: f64,
    pub delta_k: f64,
    pub mass: f64,
}

impl SpinBosonParams {
    pub fn n(&self) -> usize {
        self.rabi.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.rabi.len() != self.mode_vector.len() || self.rabi.is_empty() {
            return Err(Error::Mismatch("rabi and mode_vector lengths differ".into()));
        }
        if !(self.mode_frequency > 0.0) || !(self.delta_k > 0.0) || !(self.mass > 0.0) || !(self.detuning_mu > 0.0) {
            return Err(Error::InvalidInput("mode frequency, delta_k, mass and mu must be positive".into()));
        }
        if self.detuning_mu == self.mode_frequency {
            return Err(Error::InvalidInput("detuning coincides with the mode".into()));
        }
        Ok(())
    }

    /// Spin-phonon couplings g_i = eta_i W_i / 2, rad/s.
    pub fn couplings(&self) -> Vec<f64> {
        self.rabi
            .iter()
            .zip(&self.mode_vector)
            .map(|(w, b)| 0.5 * w * lamb_dicke(self.delta_k, *b, self.mass, self.mode_frequency))
            .collect()
    }

    /// nu = w_m - mu.
    pub fn nu(&self) -> f64 {
        self.mode_frequency - self.detuning_mu
    }

    /// Phonon-mediated couplings of this single mode, 2 g_i g_j / (mu - w_m).
    pub fn effective_couplings(&self) -> CouplingMatrix {
        let g = self.couplings();
        let n = g.len();
        let nu = self.nu();
        let j = DMatrix::from_fn(n, n, |i, k| if i == k { 0.0 } else { -2.0 * g[i] * g[k] / nu });
        CouplingMatrix { j, detuning_mu: self.detuning_mu, spectrum_ref: "single-mode".into() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpinBosonSample {
    pub t: f64,
    pub b: f64,
    /// Spin-reduced y-basis populations.
    pub populations: Vec<f64>,
    pub ground_manifold_pop: f64,
    /// Spin-reduced x-basis populations.
    pub x_populations: Vec<f64>,
    /// Distribution of S_x over its N+1 values, lowest first.
    pub sx_distribution: Vec<f64>,
    pub nbar: f64,
    pub top_level_pop: f64,
    pub trace: f64,
    /// Lowest eigenvalue of the density matrix (spin-reduced when the full one is too large).
    pub min_eigenvalue: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SpinBosonTrajectory {
    pub samples: Vec<SpinBosonSample>,
    /// Spin-phonon state in the y basis with the phonon factor attached.
    pub final_state: QuantumState,
    /// Classical ground manifold of sign times the single-mode effective couplings.
    pub manifold: GroundManifold,
    pub n_cut_used: usize,
    pub retried: bool,
    /// Largest top-level population seen at any checkpoint.
    pub max_top_level_pop: f64,
    pub stats: OdeStats,
}

impl SpinBosonTrajectory {
    pub fn final_sample(&self) -> &SpinBosonSample {
        self.samples.last().expect("trajectory has samples")
    }

    pub fn to_csv(&self, with_populations: bool) -> String {
        let n_pop = self.samples.first().map_or(0, |s| s.populations.len());
        let mut s = String::from("time_us,b_rad_s,ground_manifold_pop,nbar,top_level_pop,trace,min_eigenvalue");
        if with_populations {
            for k in 0..n_pop {
                s.push_str(&format!(",p_{k}"));
            }
        }
        s.push('\n');
        for p in &self.samples {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}",
                p.t * 1e6,
                p.b,
                p.ground_manifold_pop,
                p.nbar,
                p.top_level_pop,
                p.trace,
                p.min_eigenvalue.map_or(String::new(), |v| v.to_string())
            ));
            if with_populations {
                for v in &p.populations {
                    s.push_str(&format!(",{v}"));
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Sparse generator acting on rows indexed by `s * levels + p` in the Ising frame.
struct Generator {
    n: usize,
    levels: usize,
    /// sum_i g_i sy_i for each spin configuration.
    force: Vec<f64>,
    nu: f64,
    heating: f64,
}

impl Generator {
    fn new(params: &SpinBosonParams, levels: usize, heating: f64) -> Self {
        let n = params.n();
        let g = params.couplings();
        let force = (0..(1usize << n))
            .map(|s| (0..n).map(|i| if s >> (n - 1 - i) & 1 == 1 { g[i] } else { -g[i] }).sum())
            .collect();
        Self { n, levels, force, nu: params.nu(), heating }
    }

    fn dim(&self) -> usize {
        (1usize << self.n) * self.levels
    }

    /// <p|a a^dag + a^dag a|p> for the truncated ladder operators.
    fn ladder_sum(&self, p: usize) -> f64 {
        let up = if p + 1 < self.levels { (p + 1) as f64 } else { 0.0 };
        p as f64 + up
    }

    /// dst = K src on blocks of `width` entries, with K = H(t) minus
    /// (i/2) G (a a^dag + a^dag a) when `dissipative`.
    fn apply_rows(&self, t: f64, b: f64, src: &[C64], dst: &mut [C64], width: usize, dissipative: bool) {
        let l = self.levels;
        let lower = C64::from_polar(1.0, -self.nu * t);
        let upper = lower.conj();
        dst.par_chunks_mut(width).enumerate().for_each(|(r, out)| {
            let s = r / l;
            let p = r % l;
            let row = |k: usize| &src[k * width..(k + 1) * width];
            let diag = if dissipative { C64::new(0.0, -0.5 * self.heating * self.ladder_sum(p)) } else { C64::new(0.0, 0.0) };
            let cur = row(r);
            for (o, x) in out.iter_mut().zip(cur) {
                *o = diag * x;
            }
            let f = self.force[s];
            if p + 1 < l {
                let c = lower * (f * ((p + 1) as f64).sqrt());
                for (o, x) in out.iter_mut().zip(row(r + 1)) {
                    *o += c * x;
                }
            }
            if p >= 1 {
                let c = upper * (f * (p as f64).sqrt());
                for (o, x) in out.iter_mut().zip(row(r - 1)) {
                    *o += c * x;
                }
            }
            let fb = b;
            for q in 0..self.n {
                let k = (s ^ (1 << q)) * l + p;
                for (o, x) in out.iter_mut().zip(row(k)) {
                    *o += fb * x;
                }
            }
        });
    }

    /// Lindblad right-hand side on a row-major density matrix.
    fn density_rhs(&self, t: f64, b: f64, rho: &[C64], drho: &mut [C64], scratch: &mut [C64]) {
        let d = self.dim();
        let l = self.levels;
        self.apply_rows(t, b, rho, scratch, d, true);
        let x: &[C64] = scratch;
        let g = self.heating;
        drho.par_chunks_mut(d).enumerate().for_each(|(r, out)| {
            let p = r % l;
            for c in 0..d {
                let q = c % l;
                let xr = x[r * d + c];
                let xc = x[c * d + r].conj();
                // -i X + i X^dag
                let mut v = C64::new(xr.im - xc.im, xc.re - xr.re);
                if g > 0.0 {
                    if p + 1 < l && q + 1 < l {
                        v += rho[(r + 1) * d + c + 1] * (g * (((p + 1) * (q + 1)) as f64).sqrt());
                    }
                    if p >= 1 && q >= 1 {
                        v += rho[(r - 1) * d + c - 1] * (g * ((p * q) as f64).sqrt());
                    }
                }
                out[c] = v;
            }
        });
    }
}

fn thermal_populations(nbar: f64, levels: usize) -> Vec<f64> {
    let mut p: Vec<f64> = if nbar == 0.0 {
        (0..levels).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect()
    } else {
        let r = nbar / (1.0 + nbar);
        (0..levels).map(|k| r.powi(k as i32) / (1.0 + nbar)).collect()
    };
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}

fn check_inputs(params: &SpinBosonParams, noise: &NoiseModel, schedule: &RampSchedule, initial: &QuantumState) -> Result<()> {
    params.validate()?;
    noise.validate()?;
    schedule.validate()?;
    if initial.n_spins != params.n() || initial.phonon_levels != 1 {
        return Err(Error::Mismatch("initial state must be a spin-only state matching the ion count".into()));
    }
    let norm = initial.norm();
    let expected = if initial.is_pure() { norm * norm } else { norm };
    if (expected - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidInput(format!("initial state normalization {expected} is not 1")));
    }
    Ok(())
}

/// Integration stops: schedule stops plus evenly spaced leakage checkpoints.
fn checkpoints(schedule: &RampSchedule) -> Vec<f64> {
    let total = schedule.total_duration();
    let mut v = schedule.stops();
    v.extend((1..LEAKAGE_CHECKPOINTS).map(|k| total * k as f64 / LEAKAGE_CHECKPOINTS as f64));
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * total);
    v
}

fn lowest_eigenvalue(m: DMatrix<C64>) -> f64 {
    let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

struct Attempt {
    samples: Vec<SpinBosonSample>,
    data: StateData,
    max_top: f64,
    stats: OdeStats,
}

fn run_density(
    params: &SpinBosonParams,
    noise: &NoiseModel,
    levels: usize,
    schedule: &RampSchedule,
    initial: &QuantumState,
    opts: &EvolveOptions,
    manifold: &GroundManifold,
) -> Result<Attempt> {
    let n = params.n();
    let gen = Generator::new(params, levels, noise.heating_rate);
    let d = gen.dim();
    if d > DENSITY_DIM_BUDGET {
        return Err(Error::InvalidInput(format!(
            "density dimension {d} exceeds the budget of {DENSITY_DIM_BUDGET}; reduce ions or phonon_cutoff"
        )));
    }
    let ds = 1usize << n;
    let spin = initial.ising_density();
    let phon = thermal_populations(noise.initial_nbar, levels);
    let mut rho = vec![C64::new(0.0, 0.0); d * d];
    for a in 0..ds {
        for b in 0..ds {
            for (p, w) in phon.iter().enumerate() {
                rho[(a * levels + p) * d + b * levels + p] = spin[(a, b)] * *w;
            }
        }
    }
    let top = |rho: &[C64]| (0..ds).map(|s| rho[(s * levels + levels - 1) * (d + 1)].re).sum::<f64>();
    let record = |t: f64, rho: &[C64]| -> Result<SpinBosonSample> {
        let mut populations = vec![0.0; ds];
        let mut nbar = 0.0;
        let mut trace = 0.0;
        for s in 0..ds {
            for p in 0..levels {
                let v = rho[(s * levels + p) * (d + 1)].re;
                populations[s] += v;
                nbar += p as f64 * v;
                trace += v;
            }
        }
        if (trace - 1.0).abs() > TRACE_DRIFT_LIMIT {
            return Err(Error::Integration(format!("trace drift {:.3e} at t = {t:.3e} s", trace - 1.0)));
        }
        let red = DMatrix::from_fn(ds, ds, |a, b| (0..levels).map(|p| rho[(a * levels + p) * d + b * levels + p]).sum());
        let x_populations = population_histogram(&QuantumState::from_ising(n, 1, StateData::Density(red.clone())), Basis::X);
        let sx_distribution = sx_from_x_histogram(&x_populations, n);
        let min_eigenvalue = if d <= FULL_POSITIVITY_DIM {
            lowest_eigenvalue(DMatrix::from_row_slice(d, d, rho))
        } else {
            lowest_eigenvalue(red)
        };
        Ok(SpinBosonSample {
            t,
            b: schedule.field(t),
            ground_manifold_pop: manifold.indices.iter().map(|&k| populations[k]).sum(),
            populations,
            x_populations,
            sx_distribution,
            nbar,
            top_level_pop: top(rho),
            trace,
            min_eigenvalue: Some(min_eigenvalue),
        })
    };
    let mut scratch = vec![C64::new(0.0, 0.0); d * d];
    let mut stepper = Stepper::new(Dopri5::new(opts.integrator_tol), d * d);
    let mut samples = Vec::new();
    let mut max_top = top(&rho);
    let total = schedule.total_duration();
    let at = |a: f64, b: f64| (a - b).abs() <= 1e-12 * total;
    let mut next = 0usize;
    let mut t = 0.0;
    while next < schedule.sample_times.len() && at(schedule.sample_times[next], 0.0) {
        samples.push(record(0.0, &rho)?);
        next += 1;
    }
    for stop in checkpoints(schedule) {
        if stop <= t {
            continue;
        }
        let mut rhs = |tt: f64, x: &[C64], dx: &mut [C64]| gen.density_rhs(tt, schedule.field(tt), x, dx, &mut scratch);
        stepper.integrate(&mut rhs, t, stop, &mut rho)?;
        t = stop;
        let tp = top(&rho);
        max_top = max_top.max(tp);
        if tp > LEAKAGE_LIMIT {
            return Err(Error::Cutoff { n_cut: levels - 1, population: tp });
        }
        while next < schedule.sample_times.len() && at(schedule.sample_times[next], t) {
            samples.push(record(t, &rho)?);
            next += 1;
        }
    }
    if samples.is_empty() {
        samples.push(record(t, &rho)?);
    }
    Ok(Attempt { samples, data: StateData::Density(DMatrix::from_row_slice(d, d, &rho)), max_top, stats: stepper.stats })
}

fn run_pure(
    params: &SpinBosonParams,
    levels: usize,
    schedule: &RampSchedule,
    initial: &QuantumState,
    opts: &EvolveOptions,
    manifold: &GroundManifold,
) -> Result<Attempt> {
    let n = params.n();
    let gen = Generator::new(params, levels, 0.0);
    let d = gen.dim();
    let ds = 1usize << n;
    let spin = initial.ising_amplitudes()?;
    let mut psi = vec![C64::new(0.0, 0.0); d];
    for s in 0..ds {
        psi[s * levels] = spin[s];
    }
    let top = |psi: &[C64]| (0..ds).map(|s| psi[s * levels + levels - 1].norm_sqr()).sum::<f64>();
    let record = |t: f64, psi: &[C64]| -> Result<SpinBosonSample> {
        let mut populations = vec![0.0; ds];
        let mut nbar = 0.0;
        for s in 0..ds {
            for p in 0..levels {
                let v = psi[s * levels + p].norm_sqr();
                populations[s] += v;
                nbar += p as f64 * v;
            }
        }
        let trace: f64 = populations.iter().sum();
        if (trace - 1.0).abs() > TRACE_DRIFT_LIMIT {
            return Err(Error::Integration(format!("norm drift {:.3e} at t = {t:.3e} s", trace - 1.0)));
        }
        let state = QuantumState::from_ising(n, levels, StateData::Pure(psi.to_vec()));
        let x_populations = population_histogram(&state, Basis::X);
        let sx_distribution = sx_from_x_histogram(&x_populations, n);
        Ok(SpinBosonSample {
            t,
            b: schedule.field(t),
            ground_manifold_pop: manifold.indices.iter().map(|&k| populations[k]).sum(),
            populations,
            x_populations,
            sx_distribution,
            nbar,
            top_level_pop: top(psi),
            trace,
            min_eigenvalue: None,
        })
    };
    let mut scratch = vec![C64::new(0.0, 0.0); d];
    let mut stepper = Stepper::new(Dopri5::new(opts.integrator_tol), d);
    let mut samples = Vec::new();
    let mut max_top = 0.0f64;
    let total = schedule.total_duration();
    let at = |a: f64, b: f64| (a - b).abs() <= 1e-12 * total;
    let mut next = 0usize;
    let mut t = 0.0;
    while next < schedule.sample_times.len() && at(schedule.sample_times[next], 0.0) {
        samples.push(record(0.0, &psi)?);
        next += 1;
    }
    for stop in checkpoints(schedule) {
        if stop <= t {
            continue;
        }
        let mut rhs = |tt: f64, x: &[C64], dx: &mut [C64]| {
            gen.apply_rows(tt, schedule.field(tt), x, &mut scratch, 1, false);
            for (o, v) in dx.iter_mut().zip(scratch.iter()) {
                *o = C64::new(v.im, -v.re);
            }
        };
        stepper.integrate(&mut rhs, t, stop, &mut psi)?;
        t = stop;
        let tp = top(&psi);
        max_top = max_top.max(tp);
        if tp > LEAKAGE_LIMIT {
            return Err(Error::Cutoff { n_cut: levels - 1, population: tp });
        }
        while next < schedule.sample_times.len() && at(schedule.sample_times[next], t) {
            samples.push(record(t, &psi)?);
            next += 1;
        }
    }
    if samples.is_empty() {
        samples.push(record(t, &psi)?);
    }
    Ok(Attempt { samples, data: StateData::Pure(psi), max_top, stats: stepper.stats })
}

fn with_retry(
    n: usize,
    n_cut: usize,
    manifold: GroundManifold,
    run: impl Fn(usize) -> Result<Attempt>,
) -> Result<SpinBosonTrajectory> {
    let (attempt, n_cut_used, retried) = match run(n_cut + 1) {
        Ok(a) => (a, n_cut, false),
        Err(Error::Cutoff { .. }) => (run(2 * n_cut + 1)?, 2 * n_cut, true),
        Err(e) => return Err(e),
    };
    Ok(SpinBosonTrajectory {
        samples: attempt.samples,
        final_state: QuantumState::from_ising(n, n_cut_used + 1, attempt.data),
        manifold,
        n_cut_used,
        retried,
        max_top_level_pop: attempt.max_top,
        stats: attempt.stats,
    })
}

/// Lindblad evolution of spins coupled to one mode. `initial` is a spin-only
/// state; the mode starts thermal with `noise.initial_nbar`. A tripped leakage
/// monitor triggers one retry with the cutoff doubled.
///
/// The dynamics always run under +H. Flipping H here would not flip the
/// phonon-mediated coupling, which is second order in the force, so
/// `opts.sign = -1` instead means the run starts from the top of the spectrum
/// (|+x...>) and the tracked manifold is the classical ground manifold of -J.
pub fn evolve_spin_boson(
    params: &SpinBosonParams,
    noise: &NoiseModel,
    schedule: &RampSchedule,
    initial: &QuantumState,
    opts: &EvolveOptions,
) -> Result<SpinBosonTrajectory> {
    check_inputs(params, noise, schedule, initial)?;
    let manifold = signed_manifold(&params.effective_couplings(), f64::from(opts.sign));
    with_retry(params.n(), noise.phonon_cutoff, manifold.clone(), |levels| {
        run_density(params, noise, levels, schedule, initial, opts, &manifold)
    })
}

/// Noiseless spin-boson evolution on a pure state with the mode in its ground state.
pub fn evolve_spin_boson_pure(
    params: &SpinBosonParams,
    phonon_cutoff: usize,
    schedule: &RampSchedule,
    initial: &QuantumState,
    opts: &EvolveOptions,
) -> Result<SpinBosonTrajectory> {
    let noise = NoiseModel::noiseless(phonon_cutoff);
    check_inputs(params, &noise, schedule, initial)?;
    if !initial.is_pure() {
        return Err(Error::InvalidInput("pure evolution needs a pure initial state".into()));
    }
    let manifold = signed_manifold(&params.effective_couplings(), f64::from(opts.sign));
    with_retry(params.n(), phonon_cutoff, manifold.clone(), |levels| {
        run_pure(params, levels, schedule, initial, opts, &manifold)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ramp::Direction;
    use crate::dynamics::tfim::initial_state_for_sign;
    use crate::units::{khz, mhz, YB171_MASS};
    use std::f64::consts::PI;

    fn params(n: usize, rabi: f64, delta: f64) -> SpinBosonParams {
        let w = mhz(1.5);
        SpinBosonParams {
            rabi: vec![rabi; n],
            mode_frequency: w,
            mode_vector: vec![1.0 / (n as f64).sqrt(); n],
            detuning_mu: w + delta,
            delta_k: crate::coupling::default_delta_k(355e-9),
            mass: YB171_MASS,
        }
    }

    #[test]
    fn heating_alpha_in_microsecond_units() {
        let noise = NoiseModel { heating_rate: 8e-4 * 1e6, phonon_cutoff: 5, initial_nbar: 0.0 };
        // sqrt(quanta/us) = sqrt(quanta/s) / 1e3
        assert!((noise.heating_alpha() / 1e3 - 0.028).abs() < 5e-4);
    }

    #[test]
    fn pure_heating_grows_linearly() {
        let p = params(1, 0.0, khz(10.0));
        let rate = 3200.0;
        let noise = NoiseModel { heating_rate: rate, phonon_cutoff: 30, initial_nbar: 0.0 };
        let mut sched = RampSchedule::with_end_ratio(khz(1.0), 1e-3, 2.0, Direction::Forward, 11);
        sched.sample_times = sched.uniform_samples(11);
        let traj = evolve_spin_boson(&p, &noise, &sched, &initial_state_for_sign(1, 1), &EvolveOptions::default()).unwrap();
        for s in &traj.samples {
            assert!((s.nbar - rate * s.t).abs() <= 0.01 * rate * s.t + 1e-9, "t {} nbar {}", s.t, s.nbar);
            assert!((s.trace - 1.0).abs() < TRACE_DRIFT_LIMIT);
            assert!(s.min_eigenvalue.unwrap() > -1e-8);
        }
    }

    #[test]
    fn cutoff_retry_doubles_levels() {
        let p = params(1, 0.0, khz(10.0));
        let noise = NoiseModel { heating_rate: 2000.0, phonon_cutoff: 8, initial_nbar: 0.0 };
        let sched = RampSchedule::with_end_ratio(khz(1.0), 1e-4, 2.0, Direction::Forward, 3);
        let traj = evolve_spin_boson(&p, &noise, &sched, &initial_state_for_sign(1, 1), &EvolveOptions::default()).unwrap();
        assert!(!traj.retried);
        let hot = NoiseModel { heating_rate: 4e4, phonon_cutoff: 3, ..noise };
        let sched = RampSchedule::with_end_ratio(khz(1.0), 1e-3, 2.0, Direction::Forward, 3);
        match evolve_spin_boson(&p, &hot, &sched, &initial_state_for_sign(1, 1), &EvolveOptions::default()) {
            Err(Error::Cutoff { n_cut, .. }) => assert_eq!(n_cut, 6),
            other => panic!("expected cutoff error, got {:?}", other.map(|t| t.n_cut_used)),
        }
    }

    #[test]
    fn pure_and_density_engines_agree() {
        let p = params(2, 2.0 * PI * 200e3, khz(15.0));
        let sched = RampSchedule::with_end_ratio(khz(5.0), 1e-4, 10.0, Direction::Forward, 4);
        let init = initial_state_for_sign(2, -1);
        let opts = EvolveOptions { sign: -1, integrator_tol: 1e-10, ..Default::default() };
        let a = evolve_spin_boson_pure(&p, 8, &sched, &init, &opts).unwrap();
        let b = evolve_spin_boson(&p, &NoiseModel::noiseless(8), &sched, &init, &opts).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            for (u, v) in x.populations.iter().zip(&y.populations) {
                assert!((u - v).abs() < 1e-7);
            }
            assert!((x.nbar - y.nbar).abs() < 1e-7);
        }
    }

    #[test]
    fn sign_selects_the_tracked_manifold_only() {
        let p = params(3, 2.0 * PI * 200e3, khz(15.0));
        let sched = RampSchedule::with_end_ratio(khz(5.0), 1e-4, 10.0, Direction::Forward, 2);
        let init = initial_state_for_sign(3, -1);
        let neg = EvolveOptions { sign: -1, ..Default::default() };
        let pos = EvolveOptions { sign: 1, ..Default::default() };
        let a = evolve_spin_boson_pure(&p, 8, &sched, &init, &neg).unwrap();
        let b = evolve_spin_boson_pure(&p, 8, &sched, &init, &pos).unwrap();
        assert_eq!(a.final_sample().populations, b.final_sample().populations);
        // Uniform positive couplings: -J is ferromagnetic, +J frustrated.
        assert_eq!(a.manifold.indices, vec![0, 7]);
        assert_eq!(b.manifold.len(), 6);
    }

    #[test]
    fn effective_coupling_sign_and_size() {
        let p = params(3, 2.0 * PI * 100e3, khz(10.0));
        let j = p.effective_couplings();
        let g = p.couplings();
        assert!(j.j[(0, 1)] > 0.0);
        assert!((j.j[(0, 1)] - 2.0 * g[0] * g[1] / khz(10.0)).abs() < 1e-9 * j.j[(0, 1)]);
    }
}
