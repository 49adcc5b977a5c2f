//! Adaptive Dormand-Prince 5(4) integrator on complex vectors.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
/// Fifth- minus fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Dopri5 {
    pub fn new(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, max_steps: 10_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Integrator scratch space and step-size memory, reusable across segments.
pub struct Stepper {
    pub method: Dopri5,
    pub stats: OdeStats,
    h: Option<f64>,
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    ynew: Vec<C64>,
}

impl Stepper {
    pub fn new(method: Dopri5, dim: usize) -> Self {
        let z = || vec![C64::new(0.0, 0.0); dim];
        Self {
            method,
            stats: OdeStats::default(),
            h: None,
            k: [z(), z(), z(), z(), z(), z(), z()],
            tmp: z(),
            ynew: z(),
        }
    }

    fn weighted_rms(&self, y: &[C64], ynew: &[C64], e: impl Fn(usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..y.len() {
            let sc = self.method.atol + self.method.rtol * y[i].norm().max(ynew[i].norm());
            let r = e(i) / sc;
            acc += r * r;
        }
        (acc / y.len() as f64).sqrt()
    }

    /// Advance `y` from `t0` to exactly `t1`.
    pub fn integrate<F>(&mut self, rhs: &mut F, t0: f64, t1: f64, y: &mut [C64]) -> Result<()>
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(());
        }
        let n = y.len();
        let mut t = t0;
        rhs(t, y, &mut self.k[0]);
        self.stats.rhs_evals += 1;
        let mut h = match self.h {
            Some(h) => h,
            None => {
                let d0 = self.weighted_rms(y, y, |i| y[i].norm());
                let d1 = self.weighted_rms(y, y, |i| self.k[0][i].norm());
                if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 }
            }
        }
        .min(span);
        let mut last_rejected = false;
        let mut steps = 0usize;
        while t < t1 {
            steps += 1;
            if steps > self.method.max_steps {
                return Err(Error::Integration(format!("exceeded {} steps", self.method.max_steps)));
            }
            let remaining = t1 - t;
            let final_step = h >= remaining * (1.0 - 1e-12);
            let h_try = if final_step { remaining } else { h };
            if h_try <= 1e-14 * t1.abs().max(span) {
                return Err(Error::StepSize { t, h: h_try });
            }
            self.stage(rhs, t, h_try, y, n);
            let [k0, _, k2, k3, k4, k5, k6] = &self.k;
            let err = self.weighted_rms(y, &self.ynew, |i| {
                (h_try * (E[0] * k0[i] + E[2] * k2[i] + E[3] * k3[i] + E[4] * k4[i] + E[5] * k5[i] + E[6] * k6[i]))
                    .norm()
            });
            if err <= 1.0 {
                t = if final_step { t1 } else { t + h_try };
                y.copy_from_slice(&self.ynew);
                // First-same-as-last: the last stage is the next first stage.
                self.k.swap(0, 6);
                self.stats.accepted += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                let fac = if last_rejected { fac.min(1.0) } else { fac };
                // A clipped final step says little about the natural step size.
                if !final_step || h_try >= 0.5 * h {
                    h = h_try * fac;
                }
                last_rejected = false;
            } else {
                self.stats.rejected += 1;
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
                h = h_try * fac;
                last_rejected = true;
            }
        }
        self.h = Some(h);
        Ok(())
    }

    fn stage<F>(&mut self, rhs: &mut F, t: f64, h: f64, y: &[C64], n: usize)
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let combos: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
        for (s, a) in combos.iter().enumerate() {
            let stage = s + 1;
            for i in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for (j, aj) in a.iter().enumerate() {
                    acc += *aj * self.k[j][i];
                }
                self.tmp[i] = y[i] + h * acc;
            }
            let (_, rest) = self.k.split_at_mut(stage);
            rhs(t + C[stage] * h, &self.tmp, &mut rest[0]);
        }
        for i in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for (j, bj) in B.iter().enumerate() {
                acc += *bj * self.k[j][i];
            }
            self.ynew[i] = y[i] + h * acc;
        }
        rhs(t + h, &self.ynew, &mut self.k[6]);
        self.stats.rhs_evals += 6;
    }
}
