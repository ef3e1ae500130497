//! Case study 3: nonsmooth fed-batch photo-production of phycocyanin.
//!
//! Three states (biomass c_x in g/L, nitrate c_N in mg/L, product c_q),
//! two controls (light intensity I in umol/m^2/s within [120, 400], nitrate
//! inflow F_N in mg/L/h within [0, 40]). Monod-type kinetics with a hard
//! production switch: dc_q/dt is active only while c_N <= 500 and c_x >= 10,
//! evaluated at every integration substep. The "real" plant adds a sinusoidal
//! plus Gaussian state disturbance and Gaussian measurement noise; the
//! simplified training model drops both but keeps the uncertain initial
//! condition.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::plants::integrate::rk4_step;
use crate::plants::{PlantModel, StepOutcome};
use crate::rng::{draw_normal, StreamRng};

pub const CS3_INTERVALS: usize = 12;

/// Default batch duration. At the default growth rate (u_m = 0.0572 per
/// hour) the biomass needs on the order of 200 hours to cross the 10 g/L
/// production threshold, so shorter batches never open the product gate.
pub const CS3_DURATION_HOURS: f64 = 240.0;
pub const CS3_CONTROL_LOWER: [f64; 2] = [120.0, 0.0];
pub const CS3_CONTROL_UPPER: [f64; 2] = [400.0, 40.0];

/// Quadratic control-move penalty weights diag(3.125e-8, 3.125e-6).
pub const CS3_DU_WEIGHTS: [f64; 2] = [3.125e-8, 3.125e-6];

/// Per-state disturbance variance amplitudes diag(4e-3, 1, 1e-7).
pub const CS3_DISTURBANCE_DIAG: [f64; 3] = [4e-3, 1.0, 1e-7];

/// Measurement-noise variances diag(4e-4, 0.1, 1e-8).
pub const CS3_MEASUREMENT_DIAG: [f64; 3] = [4e-4, 0.1, 1e-8];

pub const CS3_INITIAL_MEAN: [f64; 3] = [1.0, 150.0, 0.0];
pub const CS3_INITIAL_DIAG: [f64; 3] = [1e-3, 22.5, 0.0];

/// Kinetic parameters of the physical system.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Cs3Params {
    pub u_m: f64,
    pub u_d: f64,
    pub k_n: f64,
    pub y_nx: f64,
    pub k_m: f64,
    pub k_d: f64,
    pub k_s: f64,
    pub k_i: f64,
    pub k_sq: f64,
    pub k_iq: f64,
    pub k_np: f64,
}

impl Default for Cs3Params {
    fn default() -> Self {
        Self {
            u_m: 0.0572,
            u_d: 0.0,
            k_n: 393.1,
            y_nx: 504.1,
            k_m: 0.00016,
            k_d: 0.281,
            k_s: 178.9,
            k_i: 447.1,
            k_sq: 23.51,
            k_iq: 800.0,
            k_np: 16.89,
        }
    }
}

/// Production gate: active iff c_N <= 500 mg/L and c_x >= 10 g/L, both
/// inclusive.
pub fn cs3_switch(c_n: f64, c_x: f64) -> bool {
    c_n <= 500.0 && c_x >= 10.0
}

pub fn cs3_drift(p: &Cs3Params, y: &[f64], u: &[f64], out: &mut [f64]) {
    let (c_x, c_n, c_q) = (y[0], y[1], y[2]);
    let (light, inflow) = (u[0], u[1]);
    let phi_i = light / (light + p.k_s + light * light / p.k_i);
    let phi_n = c_n / (c_n + p.k_n);
    let growth = p.u_m * phi_i * c_x * phi_n;
    out[0] = growth - p.u_d * c_x;
    out[1] = -p.y_nx * growth + inflow;
    out[2] = if cs3_switch(c_n, c_x) {
        let psi_i = light / (light + p.k_sq + light * light / p.k_iq);
        p.k_m * psi_i * c_x * phi_n - p.k_d * c_q / (c_n + p.k_np)
    } else {
        0.0
    };
}

#[derive(Clone, Debug)]
pub struct CaseStudy3Plant {
    pub params: Cs3Params,
    pub intervals: usize,
    pub substeps: usize,
    pub duration_hours: f64,
    /// Simplified model: no state disturbance, no measurement noise.
    pub approximate: bool,
    /// Control-move penalty weights; zeroed for the penalty-free ablation.
    pub du_weights: [f64; 2],
}

impl CaseStudy3Plant {
    pub fn new(params: Cs3Params, intervals: usize, substeps: usize, approximate: bool) -> Self {
        Self {
            params,
            intervals,
            substeps,
            duration_hours: CS3_DURATION_HOURS,
            approximate,
            du_weights: CS3_DU_WEIGHTS,
        }
    }

    pub fn with_duration(mut self, hours: f64) -> Self {
        self.duration_hours = hours;
        self
    }

    pub fn without_du_penalty(mut self) -> Self {
        self.du_weights = [0.0, 0.0];
        self
    }

    fn dt(&self) -> f64 {
        self.duration_hours / self.intervals as f64
    }
}

impl PlantModel for CaseStudy3Plant {
    fn n_states(&self) -> usize {
        3
    }

    fn n_controls(&self) -> usize {
        2
    }

    fn n_intervals(&self) -> usize {
        self.intervals
    }

    fn control_lower(&self) -> Vec<f64> {
        CS3_CONTROL_LOWER.to_vec()
    }

    fn control_upper(&self) -> Vec<f64> {
        CS3_CONTROL_UPPER.to_vec()
    }

    fn state_scale(&self) -> Vec<f64> {
        vec![10.0, 500.0, 1.0]
    }

    fn sample_initial_state(&self, rng: &mut StreamRng) -> Vec<f64> {
        (0..3)
            .map(|i| {
                let x = CS3_INITIAL_MEAN[i] + CS3_INITIAL_DIAG[i].sqrt() * draw_normal(rng);
                x.max(0.0)
            })
            .collect()
    }

    fn step(
        &self,
        state: &[f64],
        action: &[f64],
        interval: usize,
        rng: &mut StreamRng,
    ) -> Result<StepOutcome> {
        let p = self.params;
        let drift = move |y: &[f64], u: &[f64], out: &mut [f64]| cs3_drift(&p, y, u, out);
        let mut next = rk4_step(&drift, state, action, self.dt(), self.substeps)?;
        if !self.approximate {
            // w(t) = sin(t) sigma_d + sigma_n, applied once per interval at
            // the interval's end time; sigma_n redrawn every interval.
            let t_end = (interval + 1) as f64 * self.dt();
            for i in 0..3 {
                next[i] += t_end.sin() * CS3_DISTURBANCE_DIAG[i]
                    + CS3_DISTURBANCE_DIAG[i].sqrt() * draw_normal(rng);
            }
        }
        for x in &mut next {
            *x = x.max(0.0);
        }
        let measured = if self.approximate {
            next.clone()
        } else {
            next.iter()
                .enumerate()
                .map(|(i, x)| (x + CS3_MEASUREMENT_DIAG[i].sqrt() * draw_normal(rng)).max(0.0))
                .collect()
        };
        Ok(StepOutcome { next, measured })
    }

    fn reward(&self, interval: usize, state: &[f64], action: &[f64], prev: &[f64]) -> f64 {
        if interval >= self.intervals {
            return state[2];
        }
        if interval == 0 {
            // No predecessor action exists for the first interval.
            return 0.0;
        }
        let mut penalty = 0.0;
        for i in 0..2 {
            let du = action[i] - prev[i];
            penalty += self.du_weights[i] * du * du;
        }
        -penalty
    }
}
