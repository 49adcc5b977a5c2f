use crate::dynamics::state::{Basis, QuantumState, C64};
use crate::error::{Error, Result};

fn rotation_angles(rabi: &[f64], nominal_angle: f64) -> Result<Vec<f64>> {
    if rabi.is_empty() || rabi.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidInput("Rabi frequencies must be positive".into()));
    }
    let mean = rabi.iter().sum::<f64>() / rabi.len() as f64;
    Ok(rabi.iter().map(|w| nominal_angle * w / mean).collect())
}

/// Rotate every spin of |down_z ...> about the y axis by `nominal_angle * W_i / mean(W)`.
///
/// A quarter turn takes |down_z> to the field eigenstate -|-x>, so uniform
/// Rabi frequencies reproduce the ideal |-x...> up to a global phase.
pub fn imperfect_global_rotation(rabi: &[f64], nominal_angle: f64) -> Result<QuantumState> {
    let angles = rotation_angles(rabi, nominal_angle)?;
    let n = rabi.len();
    // exp(-i theta sigma_y / 2) |down> = cos(theta/2) |down> - sin(theta/2) |up>
    let single: Vec<[f64; 2]> = angles.iter().map(|t| [(t / 2.0).cos(), -(t / 2.0).sin()]).collect();
    let amps = (0..(1usize << n))
        .map(|s| {
            let a: f64 = (0..n).map(|i| single[i][(s >> (n - 1 - i)) & 1]).product();
            C64::new(a, 0.0)
        })
        .collect();
    QuantumState::pure(n, Basis::Z, amps)
}

/// Per-ion fidelities cos^2((theta_i - theta_nominal)/2) and their product.
pub fn preparation_fidelity(rabi: &[f64], nominal_angle: f64) -> Result<(Vec<f64>, f64)> {
    let per_ion: Vec<f64> = rotation_angles(rabi, nominal_angle)?
        .iter()
        .map(|t| ((t - nominal_angle) / 2.0).cos().powi(2))
        .collect();
    let product = per_ion.iter().product();
    Ok((per_ion, product))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn uniform_quarter_turn_is_ideal() {
        let s = imperfect_global_rotation(&[1.0; 5], PI / 2.0).unwrap();
        let ideal = QuantumState::product_x(5, false);
        assert!((s.overlap(&ideal).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn one_bright_ion_matches_closed_form() {
        let rabi = [1.1, 1.0, 1.0, 1.0];
        let s = imperfect_global_rotation(&rabi, PI / 2.0).unwrap();
        let f = s.overlap(&QuantumState::product_x(4, false)).unwrap();
        let mean = 4.1 / 4.0;
        let closed: f64 = rabi.iter().map(|w| (1.0 + (PI / 2.0 * w / mean).sin()) / 2.0).product();
        let (per_ion, product) = preparation_fidelity(&rabi, PI / 2.0).unwrap();
        assert!((f - closed).abs() < 1e-13);
        assert!((product - closed).abs() < 1e-13);
        let first = (((PI / 2.0) * (1.1 / mean - 1.0)) / 2.0).cos().powi(2);
        assert!((per_ion[0] - first).abs() < 1e-15);
    }

    #[test]
    fn dark_ion_is_rejected() {
        assert!(imperfect_global_rotation(&[1.0, 0.0], PI / 2.0).is_err());
    }
}
