use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Reverse,
    RoundTrip,
}

/// Transverse field B(t) = b0 / (1 + ramp_alpha t) on [0, duration].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    pub b0: f64,
    pub ramp_alpha: f64,
    pub duration: f64,
    pub direction: Direction,
    pub sample_times: Vec<f64>,
}

impl RampSchedule {
    /// Ramp whose endpoint is `b0 / end_ratio`, sampled at `n_samples` evenly
    /// spaced times over the whole schedule.
    pub fn with_end_ratio(b0: f64, duration: f64, end_ratio: f64, direction: Direction, n_samples: usize) -> Self {
        let mut s = Self {
            b0,
            ramp_alpha: (end_ratio - 1.0) / duration,
            duration,
            direction,
            sample_times: Vec::new(),
        };
        s.sample_times = s.uniform_samples(n_samples.max(2));
        s
    }

    pub fn uniform_samples(&self, n: usize) -> Vec<f64> {
        let total = self.total_duration();
        (0..n).map(|k| total * k as f64 / (n - 1) as f64).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b0 > 0.0) || !(self.ramp_alpha > 0.0) || !(self.duration > 0.0) {
            return Err(Error::InvalidInput("b0, ramp_alpha and duration must be positive".into()));
        }
        let total = self.total_duration();
        if self.sample_times.iter().any(|t| !(*t >= 0.0 && *t <= total * (1.0 + 1e-12))) {
            return Err(Error::InvalidInput("sample times must lie within the schedule".into()));
        }
        if self.sample_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput("sample times must be sorted".into()));
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        match self.direction {
            Direction::RoundTrip => 2.0 * self.duration,
            _ => self.duration,
        }
    }

    fn forward(&self, t: f64) -> f64 {
        self.b0 / (1.0 + self.ramp_alpha * t)
    }

    pub fn field(&self, t: f64) -> f64 {
        match self.direction {
            Direction::Forward => self.forward(t),
            Direction::Reverse => self.forward(self.duration - t),
            Direction::RoundTrip => {
                if t <= self.duration {
                    self.forward(t)
                } else {
                    self.forward(2.0 * self.duration - t)
                }
            }
        }
    }

    fn forward_integral(&self, t: f64) -> f64 {
        self.b0 * (self.ramp_alpha * t).ln_1p() / self.ramp_alpha
    }

    /// Accumulated field phase, the integral of B from 0 to t.
    pub fn field_integral(&self, t: f64) -> f64 {
        let d = self.duration;
        match self.direction {
            Direction::Forward => self.forward_integral(t),
            Direction::Reverse => self.forward_integral(d) - self.forward_integral(d - t),
            Direction::RoundTrip => {
                if t <= d {
                    self.forward_integral(t)
                } else {
                    2.0 * self.forward_integral(d) - self.forward_integral(2.0 * d - t)
                }
            }
        }
    }

    pub fn end_field(&self) -> f64 {
        self.forward(self.duration)
    }

    /// Times where B(t) is not smooth; integration restarts there.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.direction {
            Direction::RoundTrip => vec![self.duration],
            _ => Vec::new(),
        }
    }

    /// Sorted integration stops: sample times, kinks and the end point.
    pub fn stops(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.sample_times.clone();
        v.extend(self.breakpoints());
        v.push(self.total_duration());
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * self.total_duration());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_and_mirror() {
        let s = RampSchedule::with_end_ratio(2.0, 10.0, 20.0, Direction::RoundTrip, 5);
        assert!((s.field(0.0) - 2.0).abs() < 1e-15);
        assert!((s.field(10.0) - 0.1).abs() < 1e-15);
        assert!((s.field(20.0) - 2.0).abs() < 1e-15);
        assert!((s.field(7.0) - s.field(13.0)).abs() < 1e-15);
        assert_eq!(s.sample_times, vec![0.0, 5.0, 10.0, 15.0, 20.0]);
        let r = RampSchedule { direction: Direction::Reverse, ..s.clone() };
        assert!((r.field(0.0) - 0.1).abs() < 1e-15 && (r.field(10.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn field_integral_matches_quadrature() {
        for dir in [Direction::Forward, Direction::Reverse, Direction::RoundTrip] {
            let s = RampSchedule::with_end_ratio(3.0, 2.0, 15.0, dir, 2);
            let t_end = 0.8 * s.total_duration();
            let steps = 200_000;
            let h = t_end / steps as f64;
            // Composite Simpson rule; the round-trip kink at t = 2 is a grid point.
            let mut acc = s.field(0.0) + s.field(t_end);
            for k in 1..steps {
                acc += s.field(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            let simpson = acc * h / 3.0;
            assert!((s.field_integral(t_end) - simpson).abs() < 1e-9, "{dir:?}");
        }
    }

    #[test]
    fn invalid_schedules_are_rejected() {
        let mut s = RampSchedule::with_end_ratio(1.0, 1.0, 20.0, Direction::Forward, 3);
        assert!(s.validate().is_ok());
        s.sample_times.push(2.0);
        assert!(s.validate().is_err());
        s.sample_times.pop();
        s.ramp_alpha = 0.0;
        assert!(s.validate().is_err());
    }
}
