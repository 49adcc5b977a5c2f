//! Spin states and measurement-basis bookkeeping.
//!
//! Index convention: ion 1 is the most significant bit and bit value 1 is the
//! `+1` eigenstate of the basis axis. Single-spin vectors are written in the
//! (down_z, up_z) order, so `|+x> = (1, 1)/sqrt2`, `|-x> = (-1, 1)/sqrt2`,
//! `|+y> = (i, 1)/sqrt2`, `|-y> = (-i, 1)/sqrt2`.
//!
//! The engines work in an "Ising frame" spanned by `|+y>` and `i|-y>`. There
//! sigma_y is diagonal and sigma_x is a plain bit flip, so the transverse-field
//! Ising Hamiltonian is a real symmetric matrix. Converting to y-basis
//! amplitudes multiplies each entry by `i^(number of down spins)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Z,
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateData {
    Pure(Vec<C64>),
    Density(DMatrix<C64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub n_spins: usize,
    /// Number of phonon Fock levels carried alongside the spins (1 = none).
    /// Composite index is `spin_index * phonon_levels + n`.
    pub phonon_levels: usize,
    pub basis: Basis,
    pub data: StateData,
}

/// Columns are the basis states (bit 0, bit 1) in (down_z, up_z) components.
fn frame(b: Frame) -> [[C64; 2]; 2] {
    let s = FRAC_1_SQRT_2;
    let r = |x: f64| C64::new(x, 0.0);
    let i = |x: f64| C64::new(0.0, x);
    // frame[row][col]
    match b {
        Frame::Z => [[r(1.0), r(0.0)], [r(0.0), r(1.0)]],
        Frame::X => [[r(-s), r(s)], [r(s), r(s)]],
        Frame::Y => [[i(-s), i(s)], [r(s), r(s)]],
        Frame::Ising => [[r(s), i(s)], [i(s), r(s)]],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Frame {
    Z,
    X,
    Y,
    Ising,
}

impl From<Basis> for Frame {
    fn from(b: Basis) -> Self {
        match b {
            Basis::Z => Frame::Z,
            Basis::X => Frame::X,
            Basis::Y => Frame::Y,
        }
    }
}

/// 2x2 matrix taking amplitudes in `from` to amplitudes in `to`: U_to^dagger U_from.
fn transfer(from: Frame, to: Frame) -> [[C64; 2]; 2] {
    let a = frame(from);
    let b = frame(to);
    let mut m = [[C64::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            for k in 0..2 {
                m[r][c] += b[k][r].conj() * a[k][c];
            }
        }
    }
    m
}

/// Apply the same 2x2 matrix to every spin of a pure vector with phonon factor.
fn apply_local(v: &mut [C64], n_spins: usize, levels: usize, m: &[[C64; 2]; 2]) {
    for q in 0..n_spins {
        let bit = 1usize << (n_spins - 1 - q);
        for s in 0..(1usize << n_spins) {
            if s & bit != 0 {
                continue;
            }
            let t = s | bit;
            for p in 0..levels {
                let a0 = v[s * levels + p];
                let a1 = v[t * levels + p];
                v[s * levels + p] = m[0][0] * a0 + m[0][1] * a1;
                v[t * levels + p] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }
}

fn change_frame_pure(v: &[C64], n: usize, levels: usize, from: Frame, to: Frame) -> Vec<C64> {
    let mut out = v.to_vec();
    if from != to {
        apply_local(&mut out, n, levels, &transfer(from, to));
    }
    out
}

fn change_frame_density(rho: &DMatrix<C64>, n: usize, levels: usize, from: Frame, to: Frame) -> DMatrix<C64> {
    if from == to {
        return rho.clone();
    }
    let m = transfer(from, to);
    let d = rho.nrows();
    // M rho M^dagger: transform columns, take the adjoint, transform columns again.
    let mut a = rho.clone();
    for c in 0..d {
        let mut col: Vec<C64> = a.column(c).iter().copied().collect();
        apply_local(&mut col, n, levels, &m);
        a.set_column(c, &nalgebra::DVector::from_vec(col));
    }
    let mut b = a.adjoint();
    for c in 0..d {
        let mut col: Vec<C64> = b.column(c).iter().copied().collect();
        apply_local(&mut col, n, levels, &m);
        b.set_column(c, &nalgebra::DVector::from_vec(col));
    }
    b.adjoint()
}

/// `i^(number of zero bits)` for an n-spin index.
pub(crate) fn ising_phase(s: usize, n: usize) -> C64 {
    let downs = n - s.count_ones() as usize;
    match downs % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

impl QuantumState {
    pub fn pure(n_spins: usize, basis: Basis, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != 1usize << n_spins {
            return Err(Error::Mismatch(format!("{} amplitudes for {n_spins} spins", amplitudes.len())));
        }
        Ok(Self { n_spins, phonon_levels: 1, basis, data: StateData::Pure(amplitudes) })
    }

    /// Computational basis state `index` of `basis`.
    pub fn basis_state(n_spins: usize, basis: Basis, index: usize) -> Self {
        let mut v = vec![C64::new(0.0, 0.0); 1 << n_spins];
        v[index] = C64::new(1.0, 0.0);
        Self { n_spins, phonon_levels: 1, basis, data: StateData::Pure(v) }
    }

    /// All spins along +x (`up = true`) or -x.
    pub fn product_x(n_spins: usize, up: bool) -> Self {
        let index = if up { (1 << n_spins) - 1 } else { 0 };
        Self::basis_state(n_spins, Basis::X, index)
    }

    pub fn dim(&self) -> usize {
        (1usize << self.n_spins) * self.phonon_levels
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.data, StateData::Pure(_))
    }

    /// Norm of a pure state or trace of a density matrix.
    pub fn norm(&self) -> f64 {
        match &self.data {
            StateData::Pure(v) => v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt(),
            StateData::Density(r) => r.trace().re,
        }
    }

    pub fn to_density(&self) -> Self {
        match &self.data {
            StateData::Density(_) => self.clone(),
            StateData::Pure(v) => {
                let d = v.len();
                let rho = DMatrix::from_fn(d, d, |r, c| v[r] * v[c].conj());
                Self { data: StateData::Density(rho), ..self.clone() }
            }
        }
    }

    /// Trace out the phonon factor, leaving a spin density matrix.
    pub fn spin_reduced(&self) -> Self {
        if self.phonon_levels == 1 {
            return self.clone();
        }
        let l = self.phonon_levels;
        let ds = 1usize << self.n_spins;
        let rho = match &self.data {
            StateData::Pure(v) => DMatrix::from_fn(ds, ds, |a, b| (0..l).map(|p| v[a * l + p] * v[b * l + p].conj()).sum()),
            StateData::Density(r) => DMatrix::from_fn(ds, ds, |a, b| (0..l).map(|p| r[(a * l + p, b * l + p)]).sum()),
        };
        Self { n_spins: self.n_spins, phonon_levels: 1, basis: self.basis, data: StateData::Density(rho) }
    }

    pub fn to_basis(&self, target: Basis) -> Self {
        self.to_frame(self.basis.into(), target.into(), target)
    }

    fn to_frame(&self, from: Frame, to: Frame, label: Basis) -> Self {
        let data = match &self.data {
            StateData::Pure(v) => StateData::Pure(change_frame_pure(v, self.n_spins, self.phonon_levels, from, to)),
            StateData::Density(r) => {
                StateData::Density(change_frame_density(r, self.n_spins, self.phonon_levels, from, to))
            }
        };
        Self { data, basis: label, ..self.clone() }
    }

    /// Build a y-basis state from Ising-frame data.
    pub(crate) fn from_ising(n_spins: usize, phonon_levels: usize, data: StateData) -> Self {
        let l = phonon_levels;
        let data = match data {
            StateData::Pure(mut v) => {
                for (k, a) in v.iter_mut().enumerate() {
                    *a *= ising_phase(k / l, n_spins);
                }
                StateData::Pure(v)
            }
            StateData::Density(mut r) => {
                let d = r.nrows();
                for c in 0..d {
                    let pc = ising_phase(c / l, n_spins).conj();
                    for row in 0..d {
                        r[(row, c)] *= ising_phase(row / l, n_spins) * pc;
                    }
                }
                StateData::Density(r)
            }
        };
        Self { n_spins, phonon_levels, basis: Basis::Y, data }
    }

    /// Amplitudes in the Ising frame (pure states only).
    pub(crate) fn ising_amplitudes(&self) -> Result<Vec<C64>> {
        match &self.to_frame(self.basis.into(), Frame::Ising, Basis::Y).data {
            StateData::Pure(v) => Ok(v.clone()),
            StateData::Density(_) => Err(Error::Mismatch("expected a pure state".into())),
        }
    }

    /// Ising-frame density matrix of any state.
    pub(crate) fn ising_density(&self) -> DMatrix<C64> {
        match self.to_density().to_frame(self.basis.into(), Frame::Ising, Basis::Y).data {
            StateData::Density(r) => r,
            StateData::Pure(_) => unreachable!(),
        }
    }

    /// Born probabilities in the state's own basis, phonons traced out.
    pub fn probabilities(&self) -> Vec<f64> {
        let l = self.phonon_levels;
        let ds = 1usize << self.n_spins;
        match &self.data {
            StateData::Pure(v) => (0..ds).map(|s| (0..l).map(|p| v[s * l + p].norm_sqr()).sum()).collect(),
            StateData::Density(r) => (0..ds).map(|s| (0..l).map(|p| r[(s * l + p, s * l + p)].re).sum()).collect(),
        }
    }

    /// |<self|other>|^2 for pure states, tr(rho sigma) otherwise.
    pub fn overlap(&self, other: &QuantumState) -> Result<f64> {
        if self.dim() != other.dim() || self.n_spins != other.n_spins {
            return Err(Error::Mismatch("states have different dimensions".into()));
        }
        let other = other.to_basis(self.basis);
        match (&self.data, &other.data) {
            (StateData::Pure(a), StateData::Pure(b)) => {
                let ip: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
                Ok(ip.norm_sqr())
            }
            _ => {
                let ra = self.to_density();
                let rb = other.to_density();
                match (&ra.data, &rb.data) {
                    (StateData::Density(x), StateData::Density(y)) => Ok((x * y).trace().re),
                    _ => unreachable!(),
                }
            }
        }
    }
}

/// Bitstring of an index, ion 1 first.
pub fn bitstring(index: usize, n: usize) -> String {
    (0..n).map(|i| if index >> (n - 1 - i) & 1 == 1 { '1' } else { '0' }).collect()
}

/// Spin values (+1/-1) of an index, ion 1 first.
pub fn spins_of(index: usize, n: usize) -> Vec<i8> {
    (0..n).map(|i| if index >> (n - 1 - i) & 1 == 1 { 1 } else { -1 }).collect()
}

pub fn index_of(spins: &[i8]) -> usize {
    spins.iter().fold(0, |acc, &s| (acc << 1) | usize::from(s > 0))
}
