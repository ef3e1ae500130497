//! Monte-Carlo policy evaluation and return statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plants::PlantModel;
use crate::policy::{GaussianPolicy, PolicyParams};
use crate::reinforce::{rollout, Trajectory};
use crate::rng::stream;

/// Linear interpolation between order statistics; `sorted` must be ascending.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let h = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Summary statistics of the per-episode returns of one evaluation or one
/// training epoch.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean: f64,
    pub std: f64,
    pub p2: f64,
    pub p98: f64,
    pub episodes: usize,
}

impl EvalReport {
    pub fn from_returns(returns: &[f64]) -> Result<Self> {
        if returns.is_empty() {
            return Err(Error::config("no returns to summarize"));
        }
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let std = if returns.len() > 1 {
            let ss = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>();
            (ss / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = returns.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(EvalReport {
            mean,
            std,
            p2: percentile(&sorted, 2.0),
            p98: percentile(&sorted, 98.0),
            episodes: returns.len(),
        })
    }
}

/// Rolls out `episodes` fixed-policy episodes (no learning) and summarizes
/// the returns. Episodes are independent streams of (`seed`, episode index),
/// so the result does not depend on scheduling.
pub fn evaluate(
    policy: &GaussianPolicy,
    params: &PolicyParams,
    plant: &dyn PlantModel,
    episodes: usize,
    gamma: f64,
    seed: u64,
) -> Result<(EvalReport, Vec<Trajectory>)> {
    if episodes < 1 {
        return Err(Error::config("evaluation needs at least one episode"));
    }
    let trajectories: Vec<Trajectory> = (0..episodes)
        .into_par_iter()
        .map(|ep| {
            let mut p = policy.clone();
            let mut rng = stream(seed, &[0xe7a1, ep as u64]);
            rollout(&mut p, params, plant, gamma, &mut rng, false)
        })
        .collect::<Result<_>>()?;
    let returns: Vec<f64> = trajectories.iter().map(|t| t.ret).collect();
    Ok((EvalReport::from_returns(&returns)?, trajectories))
}
