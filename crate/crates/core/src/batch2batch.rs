//! Batch-to-batch orchestration: extensive offline training on the
//! approximate model, a transfer-learning freeze, then a handful of online
//! adaptation epochs against the true plant with few episodes each.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::plants::PlantModel;
use crate::policy::{GaussianPolicy, PolicyParams};
use crate::reinforce::{train_epochs, EpochStats, TrainConfig};

/// RNG phase tags; offline and online rollouts never share streams.
pub const PHASE_OFFLINE: u64 = 0;
pub const PHASE_ONLINE: u64 = 1;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Offline,
    Online,
}

/// Per-epoch record kept by both phases.
#[derive(Clone, Debug)]
pub struct PhaseRecord {
    pub phase: Phase,
    pub epoch: usize,
    pub report: EvalReport,
    pub baseline: f64,
    pub grad_norm: f64,
    pub wall_time_s: f64,
    /// Fingerprint of the parameter snapshot after this epoch's update.
    pub fingerprint: u64,
}

#[derive(Clone, Debug)]
pub struct B2BConfig {
    /// Offline epochs N0 (capped by `max_offline_epochs`).
    pub offline_epochs: usize,
    pub max_offline_epochs: usize,
    /// Offline episodes per epoch K0; must dominate the online count.
    pub offline_episodes: usize,
    /// Online epochs N_true on the true plant.
    pub online_epochs: usize,
    /// Online episodes per epoch K (each one a real batch run).
    pub online_episodes: usize,
    pub offline_step_size: f64,
    pub online_step_size: f64,
    /// Layers left trainable during the online phase.
    pub trainable_layers: Vec<usize>,
    /// Optional early stop: end the offline phase once the epoch mean return
    /// is within this gap of `ocp_reference`.
    pub offline_stop_gap: Option<f64>,
    pub ocp_reference: Option<f64>,
    pub seed: u64,
}

impl B2BConfig {
    pub fn validate(&self) -> Result<()> {
        if self.offline_episodes < 10 * self.online_episodes {
            return Err(Error::config(format!(
                "offline episodes K0 = {} must be at least 10x the online episodes K = {}",
                self.offline_episodes, self.online_episodes
            )));
        }
        if self.trainable_layers.is_empty() {
            return Err(Error::config("trainable layer set is empty"));
        }
        Ok(())
    }

    fn offline_train(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            epochs: self.offline_epochs.min(self.max_offline_epochs),
            episodes: self.offline_episodes,
            step_size: self.offline_step_size,
            seed: self.seed,
            ..*base
        }
    }

    fn online_train(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            epochs: self.online_epochs,
            episodes: self.online_episodes,
            step_size: self.online_step_size,
            seed: self.seed,
            ..*base
        }
    }
}

fn to_record(phase: Phase, stats: &EpochStats, params: &PolicyParams) -> PhaseRecord {
    PhaseRecord {
        phase,
        epoch: stats.epoch,
        report: stats.report,
        baseline: stats.baseline,
        grad_norm: stats.grad_norm,
        wall_time_s: stats.wall_time_s,
        fingerprint: params.fingerprint(),
    }
}

/// Offline phase: trains the policy on the approximate model for up to
/// min(N0, N_max) epochs, optionally stopping early at the configured OCP
/// gap. Returns the trained snapshot and the per-epoch records.
pub fn offline_phase(
    policy: &GaussianPolicy,
    approx_plant: &dyn PlantModel,
    params: PolicyParams,
    cfg: &B2BConfig,
    base: &TrainConfig,
    mut sink: impl FnMut(&PhaseRecord, &PolicyParams),
) -> Result<(PolicyParams, Vec<PhaseRecord>)> {
    cfg.validate()?;
    let train = cfg.offline_train(base);
    let mut records = Vec::new();
    let stop_gap = cfg.offline_stop_gap.zip(cfg.ocp_reference);
    let (params, _) = train_epochs(
        policy,
        approx_plant,
        params,
        &train,
        PHASE_OFFLINE,
        |stats, snapshot| {
            let record = to_record(Phase::Offline, stats, snapshot);
            sink(&record, snapshot);
            records.push(record);
            match stop_gap {
                Some((gap, reference)) => (stats.report.mean - reference).abs() > gap,
                None => true,
            }
        },
    )?;
    Ok((params, records))
}

/// Freezes everything except the configured trainable layers. Adam state is
/// rebuilt by the next training call, so stale moments never leak across the
/// transfer boundary.
pub fn transfer_freeze(
    policy: &GaussianPolicy,
    params: &PolicyParams,
    cfg: &B2BConfig,
) -> Result<PolicyParams> {
    policy.apply_freeze(params, &cfg.trainable_layers)
}

/// Online phase: N_true epochs of K true-plant episodes each. Returns the
/// adapted snapshot, the records, and the exact number of true-plant episodes
/// consumed.
pub fn online_phase(
    policy: &GaussianPolicy,
    true_plant: &dyn PlantModel,
    params: PolicyParams,
    cfg: &B2BConfig,
    base: &TrainConfig,
    mut sink: impl FnMut(&PhaseRecord, &PolicyParams),
) -> Result<(PolicyParams, Vec<PhaseRecord>, usize)> {
    cfg.validate()?;
    if params.trainable_len() == 0 {
        return Err(Error::config(
            "online phase requires a freeze mask with trainable layers",
        ));
    }
    let train = cfg.online_train(base);
    let mut records = Vec::new();
    let (params, stats) = train_epochs(
        policy,
        true_plant,
        params,
        &train,
        PHASE_ONLINE,
        |stats, snapshot| {
            let record = to_record(Phase::Online, stats, snapshot);
            sink(&record, snapshot);
            records.push(record);
            true
        },
    )?;
    let episodes_run = stats.len() * train.episodes;
    Ok((params, records, episodes_run))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plants::{ApproximateModel, CaseStudy1Plant};
    use crate::policy::{Activation, PolicyConfig};

    fn b2b(seed: u64) -> B2BConfig {
        B2BConfig {
            offline_epochs: 2,
            max_offline_epochs: 5,
            offline_episodes: 40,
            online_epochs: 2,
            online_episodes: 4,
            offline_step_size: 1e-2,
            online_step_size: 1e-3,
            trainable_layers: vec![1, 2],
            offline_stop_gap: None,
            ocp_reference: None,
            seed,
        }
    }

    fn policy() -> GaussianPolicy {
        GaussianPolicy::new(PolicyConfig {
            n_states: 2,
            n_actions: 2,
            hidden_layers: 2,
            neurons: 4,
            activation: Activation::Tanh,
            lower: vec![0.0, 0.0],
            upper: vec![5.0, 5.0],
            split_networks: true,
            history: 1,
            state_scale: vec![1.0, 1.0],
        })
        .unwrap()
    }

    #[test]
    fn episode_budget_is_rejected_when_k0_is_too_small() {
        let mut cfg = b2b(1);
        cfg.offline_episodes = 39;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn zero_offline_epochs_keep_the_initialization() {
        let policy = policy();
        let params = policy.init_params(3);
        let before = params.clone();
        let mut cfg = b2b(1);
        cfg.offline_epochs = 0;
        let plant = ApproximateModel::new(10, 5);
        let (after, records) =
            offline_phase(&policy, &plant, params, &cfg, &TrainConfig::default(), |_, _| {})
                .unwrap();
        assert_eq!(after, before);
        assert!(records.is_empty());
    }

    #[test]
    fn offline_epochs_are_capped_by_the_maximum() {
        let policy = policy();
        let params = policy.init_params(3);
        let mut cfg = b2b(1);
        cfg.offline_epochs = 50;
        cfg.max_offline_epochs = 3;
        let plant = ApproximateModel::new(10, 5);
        let (_, records) =
            offline_phase(&policy, &plant, params, &cfg, &TrainConfig::default(), |_, _| {})
                .unwrap();
        assert_eq!(records.len(), 3);
    }

    #[test]
    fn freeze_then_online_preserves_frozen_layers() {
        let policy = policy();
        let cfg = b2b(7);
        let base = TrainConfig::default();
        let plant = ApproximateModel::new(10, 5);
        let init = policy.init_params(7);
        let (theta0, _) =
            offline_phase(&policy, &plant, init, &cfg, &base, |_, _| {}).unwrap();
        let frozen = transfer_freeze(&policy, &theta0, &cfg).unwrap();
        let true_plant = CaseStudy1Plant::new(10, 5);
        let (theta, records, episodes) =
            online_phase(&policy, &true_plant, frozen.clone(), &cfg, &base, |_, _| {}).unwrap();
        assert_eq!(episodes, cfg.online_epochs * cfg.online_episodes);
        assert_eq!(records.len(), cfg.online_epochs);
        for (a, b) in frozen.nets.iter().zip(&theta.nets) {
            for i in 0..a.values.len() {
                if a.frozen[i] {
                    assert_eq!(a.values[i].to_bits(), b.values[i].to_bits());
                }
            }
        }
    }

    #[test]
    fn online_without_freeze_mask_still_trains_all_layers() {
        // trainable = all layers degenerates to plain continued training.
        let policy = policy();
        let mut cfg = b2b(5);
        cfg.trainable_layers = vec![0, 1, 2];
        let init = policy.init_params(2);
        let frozen = transfer_freeze(&policy, &init, &cfg).unwrap();
        assert_eq!(frozen.trainable_len(), frozen.flat_len());
    }

    #[test]
    fn pipeline_is_reproducible_under_a_fixed_seed() {
        let policy = policy();
        let cfg = b2b(11);
        let base = TrainConfig::default();
        let approx = ApproximateModel::new(10, 5);
        let plant = CaseStudy1Plant::new(10, 5);
        let run = || {
            let init = policy.init_params(11);
            let (theta0, _) =
                offline_phase(&policy, &approx, init, &cfg, &base, |_, _| {}).unwrap();
            let frozen = transfer_freeze(&policy, &theta0, &cfg).unwrap();
            let (theta, records, _) =
                online_phase(&policy, &plant, frozen, &cfg, &base, |_, _| {}).unwrap();
            (theta, records.last().unwrap().fingerprint)
        };
        let (a, fa) = run();
        let (b, fb) = run();
        assert_eq!(a, b);
        assert_eq!(fa, fb);
    }
}
