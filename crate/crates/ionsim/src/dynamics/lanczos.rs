//! Lanczos with full reorthogonalization for the lowest eigenpair of a real
//! symmetric operator given only through its action on vectors.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Lowest eigenpair of `apply` on `dim`-dimensional vectors.
/// `scale` is a bound on the operator norm used for relative tolerances.
pub fn lowest<F>(apply: F, dim: usize, scale: f64, tol: f64) -> Result<EigenPair>
where
    F: Fn(&[f64], &mut [f64]),
{
    let m_max = dim.min(160);
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a2c05);
    let mut start: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
    normalize(&mut start);
    let mut w = vec![0.0; dim];
    for _restart in 0..50 {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let (theta, x, converged) = loop {
            let j = basis.len() - 1;
            apply(&basis[j], &mut w);
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            // Full reorthogonalization, applied twice for stability.
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(&w, v);
                    w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = normalize(&mut w);
            let m = alpha.len();
            let t = DMatrix::from_fn(m, m, |r, c| {
                if r == c {
                    alpha[r]
                } else if r + 1 == c {
                    beta[r]
                } else if c + 1 == r {
                    beta[c]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let (k, theta) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
            let s = eig.eigenvectors.column(k);
            let residual = (b * s[m - 1]).abs();
            let breakdown = b < 1e-13 * scale.max(1e-300);
            if residual < tol * scale || breakdown || m == dim || m == m_max {
                let mut x = vec![0.0; dim];
                for (i, v) in basis.iter().enumerate() {
                    x.iter_mut().zip(v).for_each(|(acc, y)| *acc += s[i] * y);
                }
                normalize(&mut x);
                let converged = residual < tol * scale || breakdown || m == dim;
                break (theta, x, converged);
            }
            beta.push(b);
            basis.push(w.clone());
        };
        if converged {
            return Ok(EigenPair { value: theta, vector: x });
        }
        start = x;
    }
    Err(Error::Integration("Lanczos did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_dense_solver_on_a_random_symmetric_matrix() {
        let n = 300;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = rng.gen::<f64>() - 0.5;
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let dense = SymmetricEigen::new(a.clone());
        let e0 = dense.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let op = |x: &[f64], y: &mut [f64]| {
            let v = &a * nalgebra::DVector::from_column_slice(x);
            y.copy_from_slice(v.as_slice());
        };
        let p = lowest(op, n, a.amax() * n as f64, 1e-12).unwrap();
        assert!((p.value - e0).abs() < 1e-9);
    }
}
