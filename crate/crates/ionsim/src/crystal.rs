//! Equilibrium configurations of ions in an anisotropic harmonic trap.
//!
//! Public quantities are SI. The minimizer internally works in the
//! characteristic units `l = (k e^2 / (M w_y^2))^(1/3)` and `k e^2 / l` purely
//! for conditioning; results are converted back before they leave this module.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::units::{COULOMB_K, ELEMENTARY_CHARGE, YB171_MASS};

/// Upper bound on the residual force of an accepted equilibrium, N.
pub const FORCE_THRESHOLD: f64 = 1e-18;
/// Residual force target in characteristic units (k e^2 / l^2).
const DIMENSIONLESS_GTOL: f64 = 1e-9;
/// Traps whose in-plane frequencies differ by less than 1 Hz are rejected.
const ROTATION_PIN_MIN: f64 = 2.0 * PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    pub n_ions: usize,
    pub omega_x: f64,
    pub omega_y: f64,
    pub omega_z: f64,
    pub mass: f64,
    pub charge: f64,
}

impl TrapConfig {
    /// Singly charged 171Yb+ ions with frequencies given as linear MHz.
    pub fn yb171(n_ions: usize, fx_mhz: f64, fy_mhz: f64, fz_mhz: f64) -> Self {
        Self {
            n_ions,
            omega_x: crate::units::mhz(fx_mhz),
            omega_y: crate::units::mhz(fy_mhz),
            omega_z: crate::units::mhz(fz_mhz),
            mass: YB171_MASS,
            charge: ELEMENTARY_CHARGE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ions == 0 {
            return Err(Error::InvalidInput("n_ions must be at least 1".into()));
        }
        for (name, w) in [("omega_x", self.omega_x), ("omega_y", self.omega_y), ("omega_z", self.omega_z)] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive and finite")));
            }
        }
        if !(self.mass > 0.0) || !(self.charge > 0.0) {
            return Err(Error::InvalidInput("mass and charge must be positive".into()));
        }
        Ok(())
    }

    /// k_C q^2, the Coulomb coupling constant in J m.
    pub fn coulomb_strength(&self) -> f64 {
        COULOMB_K * self.charge * self.charge
    }

    pub fn spring_constants(&self) -> [f64; 3] {
        let m = self.mass;
        [m * self.omega_x.powi(2), m * self.omega_y.powi(2), m * self.omega_z.powi(2)]
    }

    /// Characteristic length (k q^2 / (M w_y^2))^(1/3), m.
    pub fn characteristic_length(&self) -> f64 {
        (self.coulomb_strength() / (self.mass * self.omega_y.powi(2))).cbrt()
    }

    /// Characteristic force k q^2 / l^2, N.
    pub fn characteristic_force(&self) -> f64 {
        self.coulomb_strength() / self.characteristic_length().powi(2)
    }

    /// Residual-force threshold used to certify equilibria for this trap.
    pub fn force_threshold(&self) -> f64 {
        FORCE_THRESHOLD.min(DIMENSIONLESS_GTOL * self.characteristic_force())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrystalGeometry {
    pub positions: Vec<[f64; 3]>,
    pub potential_energy: f64,
    pub max_residual_force: f64,
    pub planarity_deviation: f64,
    pub force_threshold: f64,
    pub characteristic_length: f64,
}

impl CrystalGeometry {
    pub fn n_ions(&self) -> usize {
        self.positions.len()
    }

    /// Content hash identifying this geometry in downstream records.
    pub fn id(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.positions {
            for c in p {
                h.update(c.to_bits().to_le_bytes());
            }
        }
        let digest = h.finalize();
        let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
        format!("geom-{}-{hex}", self.positions.len())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("ion_index,x,y,z\n");
        for (i, p) in self.positions.iter().enumerate() {
            s.push_str(&format!("{},{},{},{}\n", i + 1, p[0], p[1], p[2]));
        }
        s
    }

    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.positions.len() {
            for j in (i + 1)..self.positions.len() {
                best = best.min(distance(&self.positions[i], &self.positions[j]));
            }
        }
        best
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Energy and gradient for spring constants `w` and Coulomb strength `c`
/// on flattened coordinates.
fn energy_gradient_raw(w: &[f64; 3], c: f64, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = x.len() / 3;
    let mut e = 0.0;
    let mut g = vec![0.0; x.len()];
    for i in 0..n {
        for a in 0..3 {
            let xi = x[3 * i + a];
            e += 0.5 * w[a] * xi * xi;
            g[3 * i + a] += w[a] * xi;
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let d = [x[3 * i] - x[3 * j], x[3 * i + 1] - x[3 * j + 1], x[3 * i + 2] - x[3 * j + 2]];
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            let r = r2.sqrt();
            if !(r > 0.0) {
                return Err(Error::CoincidentIons(i, j));
            }
            e += c / r;
            let f = c / (r2 * r);
            for a in 0..3 {
                g[3 * i + a] -= f * d[a];
                g[3 * j + a] += f * d[a];
            }
        }
    }
    Ok((e, g))
}

fn hessian_raw(w: &[f64; 3], c: f64, x: &[f64]) -> DMatrix<f64> {
    let n = x.len() / 3;
    let mut h = DMatrix::zeros(3 * n, 3 * n);
    for i in 0..n {
        for a in 0..3 {
            h[(3 * i + a, 3 * i + a)] += w[a];
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let d = [x[3 * i] - x[3 * j], x[3 * i + 1] - x[3 * j + 1], x[3 * i + 2] - x[3 * j + 2]];
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            let r = r2.sqrt();
            let r3 = r2 * r;
            let r5 = r3 * r2;
            for a in 0..3 {
                for b in 0..3 {
                    let delta = if a == b { 1.0 } else { 0.0 };
                    let t = c * (3.0 * d[a] * d[b] / r5 - delta / r3);
                    h[(3 * i + a, 3 * i + b)] += t;
                    h[(3 * j + a, 3 * j + b)] += t;
                    h[(3 * i + a, 3 * j + b)] -= t;
                    h[(3 * j + a, 3 * i + b)] -= t;
                }
            }
        }
    }
    h
}

fn flatten(positions: &[[f64; 3]]) -> Vec<f64> {
    positions.iter().flat_map(|p| p.iter().copied()).collect()
}

fn unflatten(x: &[f64]) -> Vec<[f64; 3]> {
    x.chunks(3).map(|c| [c[0], c[1], c[2]]).collect()
}

/// Total trap-plus-Coulomb energy (J) and its gradient (N, i.e. minus the force).
pub fn potential_and_gradient(cfg: &TrapConfig, positions: &[[f64; 3]]) -> Result<(f64, Vec<[f64; 3]>)> {
    let (e, g) = energy_gradient_raw(&cfg.spring_constants(), cfg.coulomb_strength(), &flatten(positions))?;
    Ok((e, unflatten(&g)))
}

/// Exact 3N x 3N Hessian of the potential, N/m, ordered (x1, y1, z1, x2, ...).
pub fn hessian(cfg: &TrapConfig, positions: &[[f64; 3]]) -> DMatrix<f64> {
    hessian_raw(&cfg.spring_constants(), cfg.coulomb_strength(), &flatten(positions))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct LocalMin {
    x: Vec<f64>,
    energy: f64,
    gmax: f64,
}

/// BFGS with Armijo backtracking, followed by Newton polishing on the exact Hessian.
fn local_minimize(w: &[f64; 3], x0: Vec<f64>) -> Option<LocalMin> {
    let n = x0.len();
    let eval = |x: &[f64]| energy_gradient_raw(w, 1.0, x).ok();
    let mut x = DVector::from_vec(x0);
    let (mut f, g0) = eval(x.as_slice())?;
    let mut g = DVector::from_vec(g0);
    let mut hinv = DMatrix::<f64>::identity(n, n);

    for _ in 0..5000 {
        if max_abs(g.as_slice()) < 1e-7 {
            break;
        }
        let mut p = -(&hinv * &g);
        let mut slope = p.dot(&g);
        if slope >= 0.0 {
            hinv = DMatrix::identity(n, n);
            p = -g.clone();
            slope = p.dot(&g);
        }
        // Cap the step so ions cannot jump through each other.
        let pmax = max_abs(p.as_slice());
        let mut step = if pmax > 0.5 { 0.5 / pmax } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let xn = &x + &p * step;
            if let Some((fn_, gn)) = eval(xn.as_slice()) {
                if fn_ <= f + 1e-4 * step * slope {
                    accepted = Some((xn, fn_, DVector::from_vec(gn)));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else { break };
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            // Sherman-Morrison form of the inverse BFGS update.
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        x = xn;
        f = fn_;
        g = gn;
    }

    for _ in 0..30 {
        let gmax = max_abs(g.as_slice());
        if gmax < 1e-13 {
            break;
        }
        let h = hessian_raw(w, 1.0, x.as_slice());
        let Some(chol) = h.cholesky() else { break };
        let dx = chol.solve(&(-&g));
        let xn = &x + &dx;
        let Some((fn_, gn)) = eval(xn.as_slice()) else { break };
        let gn = DVector::from_vec(gn);
        if max_abs(gn.as_slice()) >= gmax && fn_ > f {
            break;
        }
        x = xn;
        f = fn_;
        g = gn;
    }
    let gmax = max_abs(g.as_slice());
    Some(LocalMin { x: x.data.into(), energy: f, gmax })
}

/// Points of a triangular lattice ordered by distance from the origin.
fn lattice_guess(n: usize, spacing: f64) -> Vec<[f64; 3]> {
    let mut pts = Vec::new();
    let k = (n as f64).sqrt().ceil() as i64 + 2;
    for a in -k..=k {
        for b in -k..=k {
            let x = spacing * (a as f64 + 0.5 * b as f64);
            let y = spacing * (b as f64 * 3f64.sqrt() / 2.0);
            pts.push([x, y, 0.0]);
        }
    }
    // Offset slightly so ties in radius break deterministically.
    for p in pts.iter_mut() {
        p[0] += 1e-3 * spacing;
        p[1] += 2e-3 * spacing;
    }
    pts.sort_by(|p, q| {
        let rp = p[0].hypot(p[1]);
        let rq = q[0].hypot(q[1]);
        rp.partial_cmp(&rq).unwrap()
    });
    pts.truncate(n);
    pts
}

/// Relabel ions: inner ions first, then the rest, each group ordered clockwise
/// starting just below the +y axis. For the 7-ion hexagon this gives the center
/// as ion 1 and the ring numbered around with the two long-axis apexes at 4 and 7.
fn canonical_order(positions: &mut [[f64; 3]]) {
    let n = positions.len();
    if n < 2 {
        return;
    }
    let cx = positions.iter().map(|p| p[0]).sum::<f64>() / n as f64;
    let cy = positions.iter().map(|p| p[1]).sum::<f64>() / n as f64;
    let radius = |p: &[f64; 3]| (p[0] - cx).hypot(p[1] - cy);
    let rmax = positions.iter().map(radius).fold(0.0, f64::max);
    let phi0 = PI / 2.0 - 0.05;
    let key = |p: &[f64; 3]| {
        let inner = radius(p) < 0.35 * rmax;
        let phi = (p[1] - cy).atan2(p[0] - cx);
        let cw = (phi0 - phi).rem_euclid(2.0 * PI);
        (if inner { 0 } else { 1 }, cw)
    };
    positions.sort_by(|a, b| {
        let (ga, pa) = key(a);
        let (gb, pb) = key(b);
        ga.cmp(&gb).then(pa.partial_cmp(&pb).unwrap())
    });
}

/// Lowest-energy equilibrium over `n_starts` perturbed lattice guesses.
pub fn solve_equilibrium(cfg: &TrapConfig, n_starts: usize, rng_seed: u64) -> Result<CrystalGeometry> {
    cfg.validate()?;
    if n_starts == 0 {
        return Err(Error::InvalidInput("n_starts must be at least 1".into()));
    }
    let n = cfg.n_ions;
    if n >= 2 && (cfg.omega_x - cfg.omega_y).abs() < ROTATION_PIN_MIN {
        return Err(Error::DegenerateTrap((cfg.omega_x - cfg.omega_y).abs()));
    }
    let ell = cfg.characteristic_length();
    let w = [
        (cfg.omega_x / cfg.omega_y).powi(2),
        1.0,
        (cfg.omega_z / cfg.omega_y).powi(2),
    ];
    if n == 1 {
        return finish(cfg, vec![[0.0; 3]]);
    }

    let base = lattice_guess(n, 1.2);
    let results: Vec<Option<LocalMin>> = (0..n_starts)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(k as u64);
            let x0: Vec<f64> = base
                .iter()
                .flat_map(|p| {
                    let dx = rng.gen_range(-0.3..0.3);
                    let dy = rng.gen_range(-0.3..0.3);
                    let dz = rng.gen_range(-0.05..0.05);
                    [p[0] + dx, p[1] + dy, p[2] + dz]
                })
                .collect();
            local_minimize(&w, x0)
        })
        .collect();

    let mut best: Option<&LocalMin> = None;
    let mut best_residual = f64::INFINITY;
    for r in results.iter().flatten() {
        best_residual = best_residual.min(r.gmax);
        if r.gmax >= DIMENSIONLESS_GTOL {
            continue;
        }
        match best {
            Some(b) if b.energy <= r.energy => {}
            _ => best = Some(r),
        }
    }
    let Some(best) = best else {
        return Err(Error::Convergence { best_residual: best_residual * cfg.characteristic_force() });
    };
    let mut positions: Vec<[f64; 3]> = best.x.chunks(3).map(|c| [c[0] * ell, c[1] * ell, c[2] * ell]).collect();
    canonical_order(&mut positions);
    finish(cfg, positions)
}

fn finish(cfg: &TrapConfig, positions: Vec<[f64; 3]>) -> Result<CrystalGeometry> {
    let (energy, grad) = potential_and_gradient(cfg, &positions)?;
    let max_residual_force = grad.iter().flat_map(|g| g.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = cfg.force_threshold();
    if max_residual_force > threshold {
        return Err(Error::Convergence { best_residual: max_residual_force });
    }
    let eig = SymmetricEigen::new(hessian(cfg, &positions));
    let lowest = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    // Eigenvalues are compared to the scale of the largest spring constant.
    let scale = cfg.spring_constants().iter().copied().fold(0.0, f64::max);
    if lowest < -1e-9 * scale {
        return Err(Error::SaddlePoint { lowest_eigenvalue: lowest });
    }
    let planarity_deviation = positions.iter().fold(0.0f64, |m, p| m.max(p[2].abs()));
    Ok(CrystalGeometry {
        positions,
        potential_energy: energy,
        max_residual_force,
        planarity_deviation,
        force_threshold: threshold,
        characteristic_length: cfg.characteristic_length(),
    })
}

pub fn check_planarity(geom: &CrystalGeometry, tol: f64) -> bool {
    geom.planarity_deviation <= tol
}

/// Maximum residual force component of arbitrary positions, N.
pub fn residual_force(cfg: &TrapConfig, positions: &[[f64; 3]]) -> Result<f64> {
    let (_, g) = potential_and_gradient(cfg, positions)?;
    Ok(g.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, x| m.max(x.abs())))
}
