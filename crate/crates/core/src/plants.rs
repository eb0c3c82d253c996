//! Discrete-time benchmark plants and their excitation signals.
//!
//! Two plants are provided:
//!
//! * a non-BIBO plant, `y(k+1) = 0.2 y(k)^2 + 0.2 y(k-1) + 0.4 sin(m) cos(m) + 1.2 u(k)`
//!   with `m = 0.5 (y(k) + y(k-1))`, whose output escapes to infinity for
//!   constant inputs above roughly 0.819;
//! * a second-order time-varying plant whose coefficients oscillate with period `T`.
//!
//! Both start from an all-zero output history.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outputs above this magnitude are reported as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// Default horizon (and coefficient period) of the time-varying plant.
pub const DEFAULT_PERIOD: usize = 1000;

/// Output history and step counter of a plant trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    /// `history[0]` is the most recent output, `history[2]` the oldest kept.
    pub history: [f64; 3],
    pub u_prev: f64,
    pub k: u64,
    /// Sampling period in seconds.
    pub t_o: f64,
}

impl PlantState {
    pub fn new(t_o: f64) -> Self {
        Self {
            history: [0.0; 3],
            u_prev: 0.0,
            k: 0,
            t_o,
        }
    }

    fn push(&mut self, y: f64, u: f64) {
        self.history = [y, self.history[0], self.history[1]];
        self.u_prev = u;
        self.k += 1;
    }

    /// Advances the non-BIBO plant with input `u(k)` and returns `y(k+1)`.
    pub fn step_nonbibo(&mut self, u: f64) -> Result<f64> {
        let [y0, y1, _] = self.history;
        let m = 0.5 * (y0 + y1);
        let y = 0.2 * y0 * y0 + 0.2 * y1 + 0.4 * m.sin() * m.cos() + 1.2 * u;
        self.push(y, u);
        if !(y.abs() <= DIVERGENCE_THRESHOLD) {
            return Err(Error::Diverged {
                step: self.k,
                value: y.abs(),
            });
        }
        Ok(y)
    }

    /// Advances the time-varying plant with input `u(k)` and returns `y(k)`.
    pub fn step_timevarying(&mut self, u: f64, period: usize) -> f64 {
        let [y1, y2, y3] = self.history;
        let (a, b, c) = timevarying_coefficients(self.k, period);
        let x1 = y1 * y2 * y3 * self.u_prev;
        let x2 = y3 - b;
        let x3 = c * u;
        let x4 = a + y2 * y2 + y3 * y3;
        debug_assert!(x4 >= 1.0);
        let y = (x1 * x2 + x3) / x4;
        self.push(y, u);
        y
    }
}

/// Coefficients `(a(k), b(k), c(k))` of the time-varying plant.
pub fn timevarying_coefficients(k: u64, period: usize) -> (f64, f64, f64) {
    let phase = 2.0 * PI * k as f64 / period as f64;
    let (sin, cos) = phase.sin_cos();
    (1.2 - 0.2 * cos, 1.0 - 0.4 * sin, 1.0 + 0.4 * sin)
}

/// Decaying sinusoid `0.5 exp(-0.1 t) sin(5 t)` at `t = k t_o`.
pub fn input_ex1(k: u64, t_o: f64) -> f64 {
    input_ex1_shifted(k, t_o, 0.0)
}

/// [`input_ex1`] with a phase offset on the sine, used for held-out data.
pub fn input_ex1_shifted(k: u64, t_o: f64, phase: f64) -> f64 {
    let t = k as f64 * t_o;
    0.5 * (-0.1 * t).exp() * (5.0 * t + phase).sin()
}

/// Excitation of the time-varying plant: `sin(2 pi k / period)`.
pub fn input_ex2(k: u64, period: usize) -> f64 {
    (2.0 * PI * k as f64 / period as f64).sin()
}

/// Drives the non-BIBO plant from rest with a constant input and returns the
/// largest `|y|` seen over `steps` samples.
pub fn bounded_sup_check(amplitude: f64, steps: usize) -> Result<f64> {
    let mut state = PlantState::new(1e-3);
    let mut sup: f64 = 0.0;
    for _ in 0..steps {
        sup = sup.max(state.step_nonbibo(amplitude)?.abs());
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nonbibo_hand_values() {
        let mut s = PlantState::new(1e-3);
        assert_eq!(s.step_nonbibo(0.0).unwrap(), 0.0);
        let mut s = PlantState::new(1e-3);
        assert!((s.step_nonbibo(0.5).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(s.history, [0.6, 0.0, 0.0]);
        assert_eq!(s.k, 1);
    }

    #[test]
    fn nonbibo_zero_input_stays_at_rest() {
        let mut s = PlantState::new(1e-3);
        for _ in 0..1000 {
            assert_eq!(s.step_nonbibo(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn step_of_083_diverges_quickly() {
        let mut s = PlantState::new(1e-3);
        let err = (0..10_000)
            .map(|_| s.step_nonbibo(0.83))
            .find_map(|r| r.err())
            .expect("plant should diverge");
        assert!(matches!(err, Error::Diverged { .. }));
    }

    #[test]
    fn sup_below_threshold() {
        assert_eq!(bounded_sup_check(0.0, 1000).unwrap(), 0.0);
        let low = bounded_sup_check(0.4, 100_000).unwrap();
        assert!(low < 2.26);
        // just under the saddle-node input the output settles near 2.2
        let near = bounded_sup_check(0.819, 100_000).unwrap();
        assert!((near - 2.26).abs() < 0.05, "sup = {near}");
        assert!(near > low);
    }

    #[test]
    fn input_ex1_values() {
        assert_eq!(input_ex1(0, 1e-3), 0.0);
        // t = pi / 10 puts the sine at its peak
        assert!((input_ex1(1000, PI / 10_000.0) - 0.48454).abs() < 1e-5);
        assert!((input_ex1_shifted(0, 1e-3, 1.0) - 0.5 * 1f64.sin()).abs() < 1e-15);
        for k in 0..20_000 {
            assert!(input_ex1(k, 1e-3).abs() <= 0.5);
        }
    }

    #[test]
    fn coefficients_at_phase_points() {
        let (a, b, c) = timevarying_coefficients(0, 1000);
        assert_eq!((a, b, c), (1.0, 1.0, 1.0));
        let (a, b, c) = timevarying_coefficients(250, 1000);
        assert!((a - 1.2).abs() < 1e-12);
        assert!((b - 0.6).abs() < 1e-12);
        assert!((c - 1.4).abs() < 1e-12);
    }

    #[test]
    fn timevarying_from_rest_is_scaled_input() {
        for k in [0u64, 100, 333, 999] {
            let mut s = PlantState::new(1e-3);
            s.k = k;
            let (a, _, c) = timevarying_coefficients(k, 1000);
            let y = s.step_timevarying(0.7, 1000);
            assert!((y - c * 0.7 / a).abs() < 1e-15);
        }
    }

    #[test]
    fn timevarying_denominator_stays_above_one() {
        let mut s = PlantState::new(1e-3);
        for k in 0..5000u64 {
            let [_, y2, y3] = s.history;
            let (a, _, _) = timevarying_coefficients(s.k, 1000);
            assert!(a + y2 * y2 + y3 * y3 >= 1.0);
            s.step_timevarying(input_ex2(k, 25), 1000);
        }
    }

    #[test]
    fn stepping_is_deterministic() {
        let run = || {
            let mut s = PlantState::new(1e-3);
            (0..2000)
                .map(|k| s.step_nonbibo(input_ex1(k, 1e-3)).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
