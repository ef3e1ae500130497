//! Case study 2: the same reaction as case study 1 but driven by a stochastic
//! differential equation. The drift matches the CS1 plant; a Wiener term with
//! diffusion 0.1 sqrt(y1) acts on the product equation, so the offline policy
//! trained on the CS1 approximate model is reused unchanged.

use crate::error::Result;
use crate::plants::cs1::{cs1_plant_drift, CS1_INITIAL_STATE};
use crate::plants::integrate::euler_maruyama_step;
use crate::plants::{PlantModel, StepOutcome};
use crate::rng::StreamRng;

/// Diffusion vector: zero on y1, 0.1 sqrt(y1) on y2. y1 is clamped at zero
/// from below before the square root.
pub fn cs2_diffusion(y: &[f64], _u: &[f64], out: &mut [f64]) {
    out[0] = 0.0;
    out[1] = 0.1 * y[0].max(0.0).sqrt();
}

#[derive(Clone, Debug)]
pub struct CaseStudy2Plant {
    pub intervals: usize,
    pub substeps: usize,
}

impl CaseStudy2Plant {
    pub fn new(intervals: usize, substeps: usize) -> Self {
        Self {
            intervals,
            substeps,
        }
    }
}

impl PlantModel for CaseStudy2Plant {
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
        let next = euler_maruyama_step(
            &cs1_plant_drift,
            &cs2_diffusion,
            state,
            action,
            dt,
            self.substeps,
            rng,
        )?;
        Ok(StepOutcome {
            measured: next.clone(),
            next,
        })
    }

    fn reward(&self, interval: usize, state: &[f64], _action: &[f64], _prev: &[f64]) -> f64 {
        if interval >= self.intervals {
            state[1]
        } else {
            0.0
        }
    }
}
