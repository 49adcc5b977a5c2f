//! Physical constants (CODATA 2018 exact or recommended values) and unit helpers.

use std::f64::consts::PI;

/// Coulomb constant 1/(4 pi eps0), N m^2 / C^2.
pub const COULOMB_K: f64 = 8.987_551_792_3e9;
/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Mass of 171Yb+ taken as 171 u.
pub const YB171_MASS: f64 = 171.0 * AMU;
/// Raman wavelength used in the experiment, m.
pub const RAMAN_WAVELENGTH: f64 = 355e-9;

/// Linear frequency in MHz to angular frequency in rad/s.
pub fn mhz(f: f64) -> f64 {
    2.0 * PI * f * 1e6
}

/// Linear frequency in kHz to angular frequency in rad/s.
pub fn khz(f: f64) -> f64 {
    2.0 * PI * f * 1e3
}

/// Angular frequency in rad/s to linear Hz.
pub fn to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

/// Angular frequency in rad/s to linear MHz.
pub fn to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e6)
}

/// Angular frequency in rad/s to linear kHz.
pub fn to_khz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_conversions() {
        let w = mhz(1.503);
        assert!((to_mhz(w) - 1.503).abs() < 1e-15);
        assert!((to_khz(khz(29.0)) - 29.0).abs() < 1e-12);
        assert!((to_hz(w) - 1.503e6).abs() < 1e-6);
    }
}
