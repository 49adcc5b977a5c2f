//! Desk-scale simulator for trapped-ion 2D quantum magnets.
//!
//! The pipeline runs crystal geometry, then transverse phonon modes, then
//! phonon-mediated Ising couplings, then adiabatic state preparation under a
//! transverse-field Ising model or a single-mode spin-boson master equation,
//! and finally ground-state statistics with a readout-error model.

// `!(x > 0.0)` is used on purpose so NaN fails validation; index loops
// mirror the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod cli;
pub mod coupling;
pub mod crystal;
pub mod dynamics;
pub mod error;
pub mod modes;
pub mod units;

pub use error::{Error, Result};
