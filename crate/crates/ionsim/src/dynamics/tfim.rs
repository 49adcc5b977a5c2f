//! Closed-system transverse-field Ising dynamics,
//! `H = sum_{i<j} J_ij sy_i sy_j + B sum_i sx_i`, in the real Ising frame.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::analysis::manifold::{classical_ground_manifold, default_eps_deg, GroundManifold};
use crate::coupling::CouplingMatrix;
use crate::dynamics::lanczos;
use crate::dynamics::ode::{Dopri5, OdeStats, Stepper};
use crate::dynamics::ramp::RampSchedule;
use crate::dynamics::state::{spins_of, QuantumState, StateData};
use crate::error::{Error, Result};

pub const MAX_SPINS: usize = 14;
/// Largest Hilbert space handled by dense diagonalization.
const DENSE_DIM: usize = 256;
/// Allowed drift of the state norm over a trajectory.
pub const NORM_DRIFT_LIMIT: f64 = 1e-7;

/// Diagonal of the Ising term and the operator action in the Ising frame.
pub(crate) struct IsingFrameOperator {
    pub n: usize,
    pub diag: Vec<f64>,
    pub scale: f64,
}

impl IsingFrameOperator {
    pub fn new(jm: &CouplingMatrix) -> Self {
        let n = jm.n();
        let diag = (0..(1usize << n))
            .map(|s| {
                let sp = spins_of(s, n);
                let mut e = 0.0;
                for i in 0..n {
                    for k in (i + 1)..n {
                        e += jm.j[(i, k)] * f64::from(sp[i] * sp[k]);
                    }
                }
                e
            })
            .collect();
        let mut scale = 0.0;
        for i in 0..n {
            for k in (i + 1)..n {
                scale += jm.j[(i, k)].abs();
            }
        }
        Self { n, diag, scale }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn norm_bound(&self, b: f64) -> f64 {
        self.scale + self.n as f64 * b.abs()
    }

    /// y = sign (D + b X) x for real vectors.
    pub fn apply_real(&self, b: f64, sign: f64, x: &[f64], y: &mut [f64]) {
        for s in 0..x.len() {
            let mut acc = self.diag[s] * x[s];
            for i in 0..self.n {
                acc += b * x[s ^ (1 << i)];
            }
            y[s] = sign * acc;
        }
    }

    /// x <- exp(-i theta sum_i X_i) x, one commuting two-level rotation per spin.
    pub fn rotate_field(&self, theta: f64, x: &mut [C64]) {
        let (s, c) = theta.sin_cos();
        let mis = C64::new(0.0, -s);
        for i in 0..self.n {
            let bit = 1usize << i;
            for k in 0..x.len() {
                if k & bit == 0 {
                    let (a, b) = (x[k], x[k | bit]);
                    x[k] = a * c + b * mis;
                    x[k | bit] = b * c + a * mis;
                }
            }
        }
    }

    /// Interaction-picture generator with the field phase `theta` removed:
    /// dy = -i sign R(theta)^dag D R(theta) x, with R(theta) = exp(-i theta X).
    pub fn apply_interaction(&self, theta: f64, sign: f64, x: &[C64], y: &mut [C64]) {
        y.copy_from_slice(x);
        self.rotate_field(theta, y);
        for (v, d) in y.iter_mut().zip(&self.diag) {
            *v = C64::new(v.im * d, -v.re * d) * sign;
        }
        self.rotate_field(-theta, y);
    }

    pub fn dense(&self, b: f64, sign: f64) -> DMatrix<f64> {
        let d = self.dim();
        let mut h = DMatrix::zeros(d, d);
        for s in 0..d {
            h[(s, s)] = sign * self.diag[s];
            for i in 0..self.n {
                h[(s, s ^ (1 << i))] += sign * b;
            }
        }
        h
    }

    pub fn expectation(&self, b: f64, sign: f64, x: &[C64]) -> f64 {
        let mut acc = 0.0;
        for s in 0..x.len() {
            let mut hx = self.diag[s] * x[s];
            for i in 0..self.n {
                hx += b * x[s ^ (1 << i)];
            }
            acc += (x[s].conj() * hx).re;
        }
        sign * acc
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    /// Lowest eigenvalue of sign * H, rad/s.
    pub energy: f64,
    /// One state, or an orthonormal basis of a degenerate ground space (y basis).
    pub states: Vec<QuantumState>,
    pub degenerate: bool,
}

fn check_sign(sign: i8) -> Result<f64> {
    match sign {
        1 => Ok(1.0),
        -1 => Ok(-1.0),
        _ => Err(Error::InvalidInput("sign must be +1 or -1".into())),
    }
}

fn real_state(n: usize, v: &[f64]) -> QuantumState {
    let amps = v.iter().map(|x| C64::new(*x, 0.0)).collect();
    QuantumState::from_ising(n, 1, StateData::Pure(amps))
}

/// Ising-frame ground vectors of sign * H(b).
fn ground_vectors(op: &IsingFrameOperator, b: f64, sign: f64) -> Result<(f64, Vec<Vec<f64>>)> {
    let d = op.dim();
    let scale = op.norm_bound(b).max(1e-300);
    let tol = 1e-10 * scale;
    if b == 0.0 {
        let e0 = op.diag.iter().map(|e| sign * e).fold(f64::INFINITY, f64::min);
        let vecs = (0..d)
            .filter(|&s| sign * op.diag[s] <= e0 + tol)
            .map(|s| {
                let mut v = vec![0.0; d];
                v[s] = 1.0;
                v
            })
            .collect();
        return Ok((e0, vecs));
    }
    if d <= DENSE_DIM {
        let eig = SymmetricEigen::new(op.dense(b, sign));
        let e0 = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let mut vecs = Vec::new();
        for k in 0..d {
            if eig.eigenvalues[k] <= e0 + tol {
                vecs.push(eig.eigenvectors.column(k).iter().copied().collect::<Vec<f64>>());
            }
        }
        for v in vecs.iter_mut() {
            fix_phase(v);
        }
        return Ok((e0, vecs));
    }
    // With b != 0 the ground state is non-degenerate (Perron-Frobenius after
    // conjugating by the global sigma_z parity when needed).
    let p = lanczos::lowest(|x, y| op.apply_real(b, sign, x, y), d, scale, 1e-12)?;
    let mut v = p.vector;
    fix_phase(&mut v);
    Ok((p.value, vec![v]))
}

fn fix_phase(v: &mut [f64]) {
    let amax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(k) = v.iter().position(|x| x.abs() >= amax * (1.0 - 1e-9)) {
        if v[k] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Exact ground state of sign * H with field `b`; for sign = -1 this is the
/// highest excited state of H.
pub fn ground_state_tfim(jm: &CouplingMatrix, b: f64, sign: i8) -> Result<GroundState> {
    let n = jm.n();
    if n > MAX_SPINS {
        return Err(Error::InvalidInput(format!("{n} spins exceed the limit of {MAX_SPINS}")));
    }
    let sign = check_sign(sign)?;
    let op = IsingFrameOperator::new(jm);
    let (energy, vecs) = ground_vectors(&op, b, sign)?;
    let degenerate = vecs.len() > 1;
    Ok(GroundState { energy, states: vecs.iter().map(|v| real_state(n, v)).collect(), degenerate })
}

/// Ground state of sign * B sum sx: |-x...> for +1, |+x...> for -1.
pub fn initial_state_for_sign(n: usize, sign: i8) -> QuantumState {
    QuantumState::product_x(n, sign < 0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub integrator_tol: f64,
    pub sign: i8,
    /// Compute the instantaneous exact ground state at every sample.
    pub track_exact_ground: bool,
    pub record_states: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { integrator_tol: 1e-12, sign: 1, track_exact_ground: true, record_states: false }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub b: f64,
    /// y-basis populations in binary order.
    pub populations: Vec<f64>,
    pub ground_manifold_pop: f64,
    pub overlap_exact_ground: Option<f64>,
    /// Manifold population of the instantaneous exact ground state.
    pub exact_ground_manifold_pop: Option<f64>,
    /// <sign * H(t)>, rad/s.
    pub energy: f64,
    pub norm: f64,
    #[serde(skip)]
    pub state: Option<QuantumState>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub final_state: QuantumState,
    /// Classical ground manifold of sign * J.
    pub manifold: GroundManifold,
    pub stats: OdeStats,
}

impl Trajectory {
    pub fn final_sample(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has samples")
    }

    pub fn to_csv(&self, with_populations: bool) -> String {
        let n_pop = self.samples.first().map_or(0, |s| s.populations.len());
        let mut s = String::from("time_us,b_rad_s,ground_manifold_pop,overlap_exact_ground,exact_ground_manifold_pop,energy_rad_s");
        if with_populations {
            for k in 0..n_pop {
                s.push_str(&format!(",p_{k}"));
            }
        }
        s.push('\n');
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        for p in &self.samples {
            s.push_str(&format!(
                "{},{},{},{},{},{}",
                p.t * 1e6,
                p.b,
                p.ground_manifold_pop,
                opt(p.overlap_exact_ground),
                opt(p.exact_ground_manifold_pop),
                p.energy
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

pub(crate) fn signed_manifold(jm: &CouplingMatrix, sign: f64) -> GroundManifold {
    let signed = jm.scaled(sign);
    classical_ground_manifold(&signed, default_eps_deg(&signed))
}

/// Integrate i d|psi>/dt = sign * H(t) |psi> along the schedule, stepping in
/// the interaction picture of the transverse field.
pub fn evolve_tfim(
    jm: &CouplingMatrix,
    schedule: &RampSchedule,
    initial: &QuantumState,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let n = jm.n();
    if n > MAX_SPINS {
        return Err(Error::InvalidInput(format!("{n} spins exceed the limit of {MAX_SPINS}")));
    }
    if initial.n_spins != n || initial.phonon_levels != 1 {
        return Err(Error::Mismatch("initial state does not match the coupling matrix".into()));
    }
    schedule.validate()?;
    let sign = check_sign(opts.sign)?;
    let mut phi = initial.ising_amplitudes()?;
    let norm0: f64 = phi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if (norm0 - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidInput(format!("initial state norm {norm0} is not 1")));
    }
    let op = IsingFrameOperator::new(jm);
    let manifold = signed_manifold(jm, sign);
    // The integrator carries phi = R(sign * int B)^dag psi, so a field-only
    // Hamiltonian leaves phi untouched and the rotation back is exact.
    let to_lab = |t: f64, phi: &[C64]| {
        let mut v = phi.to_vec();
        op.rotate_field(sign * schedule.field_integral(t), &mut v);
        v
    };
    let mut stepper = Stepper::new(Dopri5::new(opts.integrator_tol), op.dim());
    let mut samples = Vec::with_capacity(schedule.sample_times.len());
    let mut next_sample = 0usize;
    let mut t = 0.0;
    let record = |t: f64, psi: &[C64]| -> Result<TrajectorySample> {
        let b = schedule.field(t);
        let populations: Vec<f64> = psi.iter().map(|a| a.norm_sqr()).collect();
        let norm = populations.iter().sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_DRIFT_LIMIT {
            return Err(Error::Integration(format!("norm drift {:.3e} at t = {t:.3e} s", norm - 1.0)));
        }
        let ground_manifold_pop = manifold.indices.iter().map(|&k| populations[k]).sum();
        let (overlap, gm_pop) = if opts.track_exact_ground {
            let (_, vecs) = ground_vectors(&op, b, sign)?;
            let mut ov = 0.0;
            let mut mp = 0.0;
            for v in &vecs {
                let ip: C64 = v.iter().zip(psi).map(|(g, a)| *g * a).sum();
                ov += ip.norm_sqr();
                mp += manifold.indices.iter().map(|&k| v[k] * v[k]).sum::<f64>() / vecs.len() as f64;
            }
            (Some(ov), Some(mp))
        } else {
            (None, None)
        };
        let state = opts
            .record_states
            .then(|| QuantumState::from_ising(n, 1, StateData::Pure(psi.to_vec())));
        Ok(TrajectorySample {
            t,
            b,
            ground_manifold_pop,
            overlap_exact_ground: overlap,
            exact_ground_manifold_pop: gm_pop,
            energy: op.expectation(b, sign, psi),
            norm,
            populations,
            state,
        })
    };
    let total = schedule.total_duration();
    let at = |a: f64, b: f64| (a - b).abs() <= 1e-12 * total;
    while next_sample < schedule.sample_times.len() && at(schedule.sample_times[next_sample], 0.0) {
        samples.push(record(0.0, &phi)?);
        next_sample += 1;
    }
    for stop in schedule.stops() {
        if stop <= t {
            continue;
        }
        let mut rhs = |tt: f64, x: &[C64], dx: &mut [C64]| {
            op.apply_interaction(sign * schedule.field_integral(tt), sign, x, dx)
        };
        stepper.integrate(&mut rhs, t, stop, &mut phi)?;
        t = stop;
        while next_sample < schedule.sample_times.len() && at(schedule.sample_times[next_sample], t) {
            samples.push(record(t, &to_lab(t, &phi))?);
            next_sample += 1;
        }
    }
    let psi = to_lab(t, &phi);
    let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > NORM_DRIFT_LIMIT {
        return Err(Error::Integration(format!("norm drift {:.3e} at end of run", norm - 1.0)));
    }
    if samples.is_empty() {
        samples.push(record(t, &psi)?);
    }
    Ok(Trajectory {
        samples,
        final_state: QuantumState::from_ising(n, 1, StateData::Pure(psi)),
        manifold,
        stats: stepper.stats,
    })
}
