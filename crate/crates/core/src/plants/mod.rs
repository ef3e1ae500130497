//! Case-study plants and the shared approximate model behind one interface.
//!
//! A plant consumes exactly one control interval per [`PlantModel::step`] and
//! reports both the true next state and the measured state (identical where
//! no measurement noise is specified). Plants hold no mutable state between
//! episodes; all randomness flows through the caller's RNG stream.

pub mod cs1;
pub mod cs2;
pub mod cs3;
pub mod integrate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;

pub use cs1::{ApproximateModel, CaseStudy1Plant};
pub use cs2::CaseStudy2Plant;
pub use cs3::{cs3_switch, CaseStudy3Plant, Cs3Params};
pub use integrate::{euler_maruyama_step, rk4_step};

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub next: Vec<f64>,
    pub measured: Vec<f64>,
}

pub trait PlantModel: Send + Sync {
    fn n_states(&self) -> usize;
    fn n_controls(&self) -> usize;
    /// Number of control intervals T in one batch.
    fn n_intervals(&self) -> usize;
    fn control_lower(&self) -> Vec<f64>;
    fn control_upper(&self) -> Vec<f64>;

    /// Per-state divisors used to normalize policy observations.
    fn state_scale(&self) -> Vec<f64> {
        vec![1.0; self.n_states()]
    }

    fn sample_initial_state(&self, rng: &mut StreamRng) -> Vec<f64>;

    /// Advances one control interval under a constant action.
    fn step(
        &self,
        state: &[f64],
        action: &[f64],
        interval: usize,
        rng: &mut StreamRng,
    ) -> Result<StepOutcome>;

    /// Reward emitted at `interval`; `interval == n_intervals()` is the
    /// terminal reward evaluated on the final state.
    fn reward(&self, interval: usize, state: &[f64], action: &[f64], previous_action: &[f64])
        -> f64;
}

/// Plant selector as it appears in configuration files.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum PlantKind {
    #[serde(rename = "cs1")]
    Cs1,
    #[serde(rename = "cs1-approx")]
    Cs1Approx,
    #[serde(rename = "cs2")]
    Cs2,
    #[serde(rename = "cs3")]
    Cs3,
    #[serde(rename = "cs3-approx")]
    Cs3Approx,
}

impl PlantKind {
    pub fn name(self) -> &'static str {
        match self {
            PlantKind::Cs1 => "cs1",
            PlantKind::Cs1Approx => "cs1-approx",
            PlantKind::Cs2 => "cs2",
            PlantKind::Cs3 => "cs3",
            PlantKind::Cs3Approx => "cs3-approx",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cs1" => Ok(PlantKind::Cs1),
            "cs1-approx" => Ok(PlantKind::Cs1Approx),
            "cs2" => Ok(PlantKind::Cs2),
            "cs3" => Ok(PlantKind::Cs3),
            "cs3-approx" => Ok(PlantKind::Cs3Approx),
            other => Err(Error::config(format!(
                "unknown plant '{other}' (expected cs1|cs1-approx|cs2|cs3|cs3-approx)"
            ))),
        }
    }

    /// The simplified model used for offline training of this plant. CS2
    /// shares the CS1 approximate model, so one offline policy seeds both.
    pub fn approx(self) -> PlantKind {
        match self {
            PlantKind::Cs1 | PlantKind::Cs1Approx | PlantKind::Cs2 => PlantKind::Cs1Approx,
            PlantKind::Cs3 | PlantKind::Cs3Approx => PlantKind::Cs3Approx,
        }
    }

    pub fn default_intervals(self) -> usize {
        match self {
            PlantKind::Cs1 | PlantKind::Cs1Approx | PlantKind::Cs2 => cs1::CS1_INTERVALS,
            PlantKind::Cs3 | PlantKind::Cs3Approx => cs3::CS3_INTERVALS,
        }
    }

    pub fn is_smooth(self) -> bool {
        !matches!(self, PlantKind::Cs3 | PlantKind::Cs3Approx)
    }

    pub fn build(
        self,
        intervals: usize,
        substeps: usize,
        cs3_params: Cs3Params,
        cs3_duration_hours: f64,
    ) -> Box<dyn PlantModel> {
        match self {
            PlantKind::Cs1 => Box::new(CaseStudy1Plant::new(intervals, substeps)),
            PlantKind::Cs1Approx => Box::new(ApproximateModel::new(intervals, substeps)),
            PlantKind::Cs2 => Box::new(CaseStudy2Plant::new(intervals, substeps)),
            PlantKind::Cs3 => Box::new(
                CaseStudy3Plant::new(cs3_params, intervals, substeps, false)
                    .with_duration(cs3_duration_hours),
            ),
            PlantKind::Cs3Approx => Box::new(
                CaseStudy3Plant::new(cs3_params, intervals, substeps, true)
                    .with_duration(cs3_duration_hours),
            ),
        }
    }
}

impl std::fmt::Display for PlantKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plant_names_round_trip() {
        for kind in [
            PlantKind::Cs1,
            PlantKind::Cs1Approx,
            PlantKind::Cs2,
            PlantKind::Cs3,
            PlantKind::Cs3Approx,
        ] {
            assert_eq!(PlantKind::parse(kind.name()).unwrap(), kind);
        }
        assert!(PlantKind::parse("cs9").is_err());
    }

    #[test]
    fn approx_mapping_shares_cs1_model_with_cs2() {
        assert_eq!(PlantKind::Cs2.approx(), PlantKind::Cs1Approx);
        assert_eq!(PlantKind::Cs1.approx(), PlantKind::Cs1Approx);
        assert_eq!(PlantKind::Cs3.approx(), PlantKind::Cs3Approx);
    }
}
