//! Case study 1: photo-production batch reactor.
//!
//! The "real" plant follows the two-state ODE below with an additive
//! per-interval Gaussian disturbance on both states; the approximate training
//! model is a structurally simplified deterministic variant of the same
//! reaction. Both run on the normalized horizon [0, 1] split into 10 control
//! intervals, with both controls constrained to [0, 5] and the reward equal
//! to the product concentration y2 at final time.

use crate::error::Result;
use crate::plants::integrate::rk4_step;
use crate::plants::{PlantModel, StepOutcome};
use crate::rng::{draw_normal, StreamRng};

pub const CS1_INTERVALS: usize = 10;
pub const CS1_DISTURBANCE_STD: f64 = 0.02;
pub const CS1_INITIAL_STATE: [f64; 2] = [1.0, 0.0];

/// Plant dynamics:
///   dy1/dt = -(u1 + 0.5 u1^2) y1 + 0.5 u2 y2 / (y1 + y2)
///   dy2/dt = u1 y1 - 0.7 u2 y1
pub fn cs1_plant_drift(y: &[f64], u: &[f64], out: &mut [f64]) {
    out[0] = -(u[0] + 0.5 * u[0] * u[0]) * y[0] + 0.5 * u[1] * y[1] / (y[0] + y[1]);
    out[1] = u[0] * y[0] - 0.7 * u[1] * y[0];
}

/// Simplified model used for offline training:
///   dy1/dt = -(u1 + 0.5 u1^2) y1 + u2
///   dy2/dt = u1 y1 - u2 y1
pub fn cs1_approx_drift(y: &[f64], u: &[f64], out: &mut [f64]) {
    out[0] = -(u[0] + 0.5 * u[0] * u[0]) * y[0] + u[1];
    out[1] = u[0] * y[0] - u[1] * y[0];
}

fn terminal_reward(intervals: usize, interval: usize, state: &[f64]) -> f64 {
    if interval >= intervals {
        state[1]
    } else {
        0.0
    }
}

#[derive(Clone, Debug)]
pub struct CaseStudy1Plant {
    pub intervals: usize,
    pub substeps: usize,
}

impl CaseStudy1Plant {
    pub fn new(intervals: usize, substeps: usize) -> Self {
        Self {
            intervals,
            substeps,
        }
    }
}

impl PlantModel for CaseStudy1Plant {
    fn n_states(&self) -> usize {
        2
    }

    fn n_controls(&self) -> usize {
        2
    }

    fn n_intervals(&self) -> usize {
        self.intervals
    }

    fn control_lower(&self) -> Vec<f64> {
        vec![0.0, 0.0]
    }

    fn control_upper(&self) -> Vec<f64> {
        vec![5.0, 5.0]
    }

    fn sample_initial_state(&self, _rng: &mut StreamRng) -> Vec<f64> {
        CS1_INITIAL_STATE.to_vec()
    }

    fn step(
        &self,
        state: &[f64],
        action: &[f64],
        _interval: usize,
        rng: &mut StreamRng,
    ) -> Result<StepOutcome> {
        let dt = 1.0 / self.intervals as f64;
        let mut next = rk4_step(&cs1_plant_drift, state, action, dt, self.substeps)?;
        for x in &mut next {
            *x += CS1_DISTURBANCE_STD * draw_normal(rng);
        }
        Ok(StepOutcome {
            measured: next.clone(),
            next,
        })
    }

    fn reward(&self, interval: usize, state: &[f64], _action: &[f64], _prev: &[f64]) -> f64 {
        terminal_reward(self.intervals, interval, state)
    }
}

/// Deterministic simplified model; also serves as the nominal model inside
/// the shrinking-horizon NMPC.
#[derive(Clone, Debug)]
pub struct ApproximateModel {
    pub intervals: usize,
    pub substeps: usize,
}

impl ApproximateModel {
    pub fn new(intervals: usize, substeps: usize) -> Self {
        Self {
            intervals,
            substeps,
        }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.intervals as f64
    }
}

impl PlantModel for ApproximateModel {
    fn n_states(&self) -> usize {
        2
    }

    fn n_controls(&self) -> usize {
        2
    }

    fn n_intervals(&self) -> usize {
        self.intervals
    }

    fn control_lower(&self) -> Vec<f64> {
        vec![0.0, 0.0]
    }

    fn control_upper(&self) -> Vec<f64> {
        vec![5.0, 5.0]
    }

    fn sample_initial_state(&self, _rng: &mut StreamRng) -> Vec<f64> {
        CS1_INITIAL_STATE.to_vec()
    }

    fn step(
        &self,
        state: &[f64],
        action: &[f64],
        _interval: usize,
        _rng: &mut StreamRng,
    ) -> Result<StepOutcome> {
        let next = rk4_step(&cs1_approx_drift, state, action, self.dt(), self.substeps)?;
        Ok(StepOutcome {
            measured: next.clone(),
            next,
        })
    }

    fn reward(&self, interval: usize, state: &[f64], _action: &[f64], _prev: &[f64]) -> f64 {
        terminal_reward(self.intervals, interval, state)
    }
}
