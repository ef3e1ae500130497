//! REINFORCE with a mean-return baseline.
//!
//! Each epoch collects K episodes under an immutable parameter snapshot,
//! subtracts the mean return from every episode's return, forms the
//! likelihood-ratio gradient estimate
//!     (1/K) Σ_k (J_k - b) Σ_t ∇_θ log π(u_t | x_t, θ)
//! and takes an Adam ascent step on the unfrozen parameters. Rollouts within
//! an epoch run in parallel; the reduction is ordered by episode index so
//! results are independent of scheduling.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::plants::PlantModel;
use crate::policy::{GaussianPolicy, Observation, PolicyParams};
use crate::rng::{stream, StreamRng};

/// Per-episode record: one batch of the plant under a fixed policy snapshot.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// True states x_0..x_T.
    pub states: Vec<Vec<f64>>,
    /// Applied (clipped) actions u_0..u_{T-1}.
    pub actions: Vec<Vec<f64>>,
    /// Pre-clip Gaussian draws, one per action.
    pub draws: Vec<Vec<f64>>,
    /// Rewards R_0..R_T.
    pub rewards: Vec<f64>,
    /// Discounted return J = Σ γ^t R_t.
    pub ret: f64,
    /// Σ_t ∇_θ log π(u_t | x_t, θ); empty when collected without gradients.
    pub score_sum: Vec<f64>,
    /// Fingerprint of the parameter snapshot the episode was collected under.
    pub snapshot: u64,
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    /// Number of parameter updates N.
    pub epochs: usize,
    /// Episodes per epoch K.
    pub episodes: usize,
    /// Adam step size.
    pub step_size: f64,
    /// Discount factor in (0, 1].
    pub discount: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            episodes: 800,
            step_size: 1e-2,
            discount: 1.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes < 2 {
            return Err(Error::config("episodes must be >= 2 (baseline needs a mean)"));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::config("step_size must be positive"));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::config("discount must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Adam first/second moments, zero-initialized, with the step counter at 0.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// Runs one full episode under the snapshot `params`. With `with_grad` the
/// per-step score ∇_θ log π is accumulated into `score_sum`.
pub fn rollout(
    policy: &mut GaussianPolicy,
    params: &PolicyParams,
    plant: &dyn PlantModel,
    gamma: f64,
    rng: &mut StreamRng,
    with_grad: bool,
) -> Result<Trajectory> {
    rollout_impl(policy, params, plant, gamma, rng, with_grad, false)
}

/// Zero-variance limit: every action is the policy mean. Meant for noise-free
/// models; a stochastic plant still sees a fixed disturbance stream.
pub fn deterministic_rollout(
    policy: &mut GaussianPolicy,
    params: &PolicyParams,
    plant: &dyn PlantModel,
    gamma: f64,
) -> Result<Trajectory> {
    let mut rng = stream(0, &[0xde7]);
    rollout_impl(policy, params, plant, gamma, &mut rng, false, true)
}

fn rollout_impl(
    policy: &mut GaussianPolicy,
    params: &PolicyParams,
    plant: &dyn PlantModel,
    gamma: f64,
    rng: &mut StreamRng,
    with_grad: bool,
    deterministic: bool,
) -> Result<Trajectory> {
    let cfg = policy.config().clone();
    if cfg.n_actions != plant.n_controls() || cfg.n_states != plant.n_states() {
        return Err(Error::config(format!(
            "policy ({} states, {} actions) does not match plant ({}, {})",
            cfg.n_states,
            cfg.n_actions,
            plant.n_states(),
            plant.n_controls()
        )));
    }
    let horizon = plant.n_intervals();
    let snapshot = params.fingerprint();

    let mut state = plant.sample_initial_state(rng);
    let mut measured = state.clone();
    let mut hidden = policy.zero_hidden();
    // History windows, most recent first, zero-padded before t = 0.
    let mut state_window = vec![0.0; cfg.history * cfg.n_states];
    let mut action_window = vec![0.0; cfg.history * cfg.n_actions];
    let mut prev_action = vec![0.0; cfg.n_actions];

    let mut traj = Trajectory {
        states: Vec::with_capacity(horizon + 1),
        actions: Vec::with_capacity(horizon),
        draws: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon + 1),
        ret: 0.0,
        score_sum: Vec::new(),
        snapshot,
    };
    traj.states.push(state.clone());

    for t in 0..horizon {
        state_window.copy_within(..(cfg.history - 1) * cfg.n_states, cfg.n_states);
        state_window[..cfg.n_states].copy_from_slice(&measured);
        let obs = Observation {
            state: state_window.clone(),
            previous_action: action_window.clone(),
            hidden: hidden.clone(),
            time_fraction: t as f64 / horizon as f64,
        };
        let step = policy.forward(params, &obs)?;
        let sample = if deterministic {
            crate::policy::ActionSample {
                applied: step.mean.clone(),
                draw: step.mean.clone(),
            }
        } else {
            policy.sample_action(&step.mean, &step.std, rng)
        };
        if with_grad {
            let (_, grad) = policy.log_prob(params, &obs, &sample.draw)?;
            if traj.score_sum.is_empty() {
                traj.score_sum = grad;
            } else {
                for (acc, g) in traj.score_sum.iter_mut().zip(&grad) {
                    *acc += g;
                }
            }
        }
        traj.rewards
            .push(plant.reward(t, &state, &sample.applied, &prev_action));
        let outcome = plant.step(&state, &sample.applied, t, rng)?;
        state = outcome.next;
        measured = outcome.measured;
        hidden = step.hidden;
        action_window.copy_within(..(cfg.history - 1) * cfg.n_actions, cfg.n_actions);
        action_window[..cfg.n_actions].copy_from_slice(&sample.applied);
        prev_action.copy_from_slice(&sample.applied);
        traj.states.push(state.clone());
        traj.actions.push(sample.applied);
        traj.draws.push(sample.draw);
    }
    traj.rewards
        .push(plant.reward(horizon, &state, &prev_action, &prev_action));
    traj.ret = traj
        .rewards
        .iter()
        .enumerate()
        .map(|(t, r)| gamma.powi(t as i32) * r)
        .sum();
    Ok(traj)
}

/// Mean return over the sampled paths.
pub fn compute_baseline(returns: &[f64]) -> Result<f64> {
    if returns.is_empty() {
        return Err(Error::config("baseline needs at least one return"));
    }
    Ok(returns.iter().sum::<f64>() / returns.len() as f64)
}

/// (1/K) Σ_k (J_k - b) · score_k. All trajectories must come from the same
/// parameter snapshot; frozen slots stay exactly zero because the per-episode
/// scores are zeroed there.
pub fn gradient_estimate(trajectories: &[Trajectory], baseline: f64) -> Result<Vec<f64>> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::config("gradient estimate needs at least one trajectory"))?;
    if trajectories.iter().any(|t| t.snapshot != first.snapshot) {
        return Err(Error::state(
            "trajectories were collected under different parameter snapshots",
        ));
    }
    let len = first.score_sum.len();
    if len == 0 || trajectories.iter().any(|t| t.score_sum.len() != len) {
        return Err(Error::state(
            "trajectories are missing score sums (collected without gradients?)",
        ));
    }
    let mut grad = vec![0.0; len];
    for t in trajectories {
        let w = t.ret - baseline;
        for (g, s) in grad.iter_mut().zip(&t.score_sum) {
            *g += w * s;
        }
    }
    let k = trajectories.len() as f64;
    grad.iter_mut().for_each(|g| *g /= k);
    Ok(grad)
}

/// Standard Adam with bias correction, ascent sign, skipping frozen slots
/// entirely (values and moments).
pub fn adam_ascent(
    params: &mut PolicyParams,
    grad: &[f64],
    state: &mut AdamState,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) -> Result<()> {
    let total = params.flat_len();
    if grad.len() != total || state.m.len() != total {
        return Err(Error::config(format!(
            "adam shape mismatch: params {total}, grad {}, state {}",
            grad.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let bc1 = 1.0 - beta1.powi(state.step as i32);
    let bc2 = 1.0 - beta2.powi(state.step as i32);
    let mut offset = 0;
    for net in &mut params.nets {
        for i in 0..net.values.len() {
            let k = offset + i;
            if net.frozen[i] {
                continue;
            }
            let g = grad[k];
            state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g;
            state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * g * g;
            let m_hat = state.m[k] / bc1;
            let v_hat = state.v[k] / bc2;
            net.values[i] += alpha * m_hat / (v_hat.sqrt() + epsilon);
        }
        offset += net.values.len();
    }
    Ok(())
}

/// One epoch's summary, as appended to the progress CSV.
#[derive(Clone, Debug)]
pub struct EpochStats {
    pub epoch: usize,
    pub report: EvalReport,
    pub baseline: f64,
    pub grad_norm: f64,
    pub wall_time_s: f64,
}

/// Runs `cfg.epochs` cycles of {K rollouts, baseline, gradient, Adam ascent}.
/// `phase` tags the RNG streams so offline and online phases never share
/// randomness. `on_epoch` sees each epoch's stats and the updated snapshot
/// (for checkpointing); it may veto continuation by returning false.
pub fn train_epochs(
    policy: &GaussianPolicy,
    plant: &dyn PlantModel,
    mut params: PolicyParams,
    cfg: &TrainConfig,
    phase: u64,
    mut on_epoch: impl FnMut(&EpochStats, &PolicyParams) -> bool,
) -> Result<(PolicyParams, Vec<EpochStats>)> {
    cfg.validate()?;
    let mut adam = AdamState::new(params.flat_len());
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let t0 = Instant::now();
        let snapshot = &params;
        let trajectories: Vec<Trajectory> = (0..cfg.episodes)
            .into_par_iter()
            .map(|ep| {
                let mut p = policy.clone();
                let mut rng = stream(cfg.seed, &[phase, epoch as u64, ep as u64]);
                rollout(&mut p, snapshot, plant, cfg.discount, &mut rng, true)
            })
            .collect::<Result<_>>()?;
        let returns: Vec<f64> = trajectories.iter().map(|t| t.ret).collect();
        let baseline = compute_baseline(&returns)?;
        let grad = gradient_estimate(&trajectories, baseline)?;
        adam_ascent(
            &mut params,
            &grad,
            &mut adam,
            cfg.step_size,
            cfg.beta1,
            cfg.beta2,
            cfg.epsilon,
        )?;
        let stats = EpochStats {
            epoch,
            report: EvalReport::from_returns(&returns)?,
            baseline,
            grad_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
            wall_time_s: t0.elapsed().as_secs_f64(),
        };
        let keep_going = on_epoch(&stats, &params);
        history.push(stats);
        if !keep_going {
            break;
        }
    }
    Ok((params, history))
}
