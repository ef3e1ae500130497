//! TOML run configuration.
//!
//! An empty file resolves to the full CS1 pipeline defaults. Unknown keys are
//! rejected. Per-plant defaults follow the case studies: CS1/CS2 use two
//! split tanh networks (2x20) trained with 800 episodes over 10 intervals;
//! CS3 uses one unified leaky-ReLU network (4x20) trained with 500 episodes
//! over 12 intervals.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::batch2batch::B2BConfig;
use crate::error::{Error, Result};
use crate::nmpc::NlpSettings;
use crate::plants::{Cs3Params, PlantKind, PlantModel};
use crate::policy::{Activation, PolicyConfig};
use crate::reinforce::TrainConfig;

#[derive(Clone, Copy, PartialEq, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawPolicy {
    hidden_layers: Option<usize>,
    neurons: Option<usize>,
    activation: Option<Activation>,
    split_networks: Option<bool>,
    history: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawTrain {
    epochs: Option<usize>,
    episodes: Option<usize>,
    step_size: Option<f64>,
    discount: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    epsilon: Option<f64>,
}

#[derive(Clone, PartialEq, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawB2b {
    max_offline_epochs: Option<usize>,
    online_epochs: Option<usize>,
    online_episodes: Option<usize>,
    online_step_size: Option<f64>,
    trainable_layers: Option<Vec<usize>>,
    offline_checkpoint: Option<String>,
    offline_stop_gap: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawNmpc {
    multistarts: Option<usize>,
    max_iters: Option<usize>,
    grad_tol: Option<f64>,
    fd_step: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawEval {
    episodes: Option<usize>,
}

#[derive(Clone, PartialEq, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    plant: Option<PlantKind>,
    intervals: Option<usize>,
    substeps: Option<usize>,
    seed: Option<u64>,
    policy: RawPolicy,
    train: RawTrain,
    b2b: RawB2b,
    nmpc: RawNmpc,
    eval: RawEval,
    cs3: Option<Cs3Params>,
    cs3_duration_hours: Option<f64>,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct PolicySettings {
    pub hidden_layers: usize,
    pub neurons: usize,
    pub activation: Activation,
    pub split_networks: bool,
    pub history: usize,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub episodes: usize,
    pub step_size: f64,
    pub discount: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct B2bSettings {
    pub max_offline_epochs: usize,
    pub online_epochs: usize,
    pub online_episodes: usize,
    pub online_step_size: f64,
    pub trainable_layers: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offline_checkpoint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offline_stop_gap: Option<f64>,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct NmpcSettings {
    pub multistarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub fd_step: f64,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct EvalSettings {
    pub episodes: usize,
}

/// Fully resolved configuration; serializing it materializes every default,
/// and the snapshot parses back to the identical value.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Config {
    pub plant: PlantKind,
    pub intervals: usize,
    pub substeps: usize,
    pub seed: u64,
    pub policy: PolicySettings,
    pub train: TrainSettings,
    pub b2b: B2bSettings,
    pub nmpc: NmpcSettings,
    pub eval: EvalSettings,
    pub cs3: Cs3Params,
    pub cs3_duration_hours: f64,
}

impl Default for Config {
    fn default() -> Self {
        resolve(RawConfig::default()).expect("defaults are valid")
    }
}

fn resolve(raw: RawConfig) -> Result<Config> {
    let plant = raw.plant.unwrap_or(PlantKind::Cs1);
    let smooth = plant.is_smooth();
    let policy = PolicySettings {
        hidden_layers: raw.policy.hidden_layers.unwrap_or(if smooth { 2 } else { 4 }),
        neurons: raw.policy.neurons.unwrap_or(20),
        activation: raw.policy.activation.unwrap_or(if smooth {
            Activation::Tanh
        } else {
            Activation::LeakyRelu
        }),
        split_networks: raw.policy.split_networks.unwrap_or(smooth),
        history: raw.policy.history.unwrap_or(1),
    };
    let epochs = raw.train.epochs.unwrap_or(100);
    let train = TrainSettings {
        epochs,
        episodes: raw.train.episodes.unwrap_or(if smooth { 800 } else { 500 }),
        step_size: raw.train.step_size.unwrap_or(1e-2),
        discount: raw.train.discount.unwrap_or(1.0),
        beta1: raw.train.beta1.unwrap_or(0.9),
        beta2: raw.train.beta2.unwrap_or(0.999),
        epsilon: raw.train.epsilon.unwrap_or(1e-8),
    };
    let b2b = B2bSettings {
        max_offline_epochs: raw.b2b.max_offline_epochs.unwrap_or(epochs),
        online_epochs: raw.b2b.online_epochs.unwrap_or(4),
        online_episodes: raw.b2b.online_episodes.unwrap_or(25),
        online_step_size: raw.b2b.online_step_size.unwrap_or(1e-3),
        trainable_layers: raw
            .b2b
            .trainable_layers
            .unwrap_or_else(|| vec![policy.hidden_layers - 1, policy.hidden_layers]),
        offline_checkpoint: raw.b2b.offline_checkpoint,
        offline_stop_gap: raw.b2b.offline_stop_gap,
    };
    let defaults = NlpSettings::default();
    let nmpc = NmpcSettings {
        multistarts: raw.nmpc.multistarts.unwrap_or(defaults.multistarts),
        max_iters: raw.nmpc.max_iters.unwrap_or(defaults.max_iters),
        grad_tol: raw.nmpc.grad_tol.unwrap_or(defaults.grad_tol),
        fd_step: raw.nmpc.fd_step.unwrap_or(defaults.fd_step),
    };
    let config = Config {
        plant,
        intervals: raw.intervals.unwrap_or_else(|| plant.default_intervals()),
        substeps: raw.substeps.unwrap_or(20),
        seed: raw.seed.unwrap_or(5),
        policy,
        train,
        b2b,
        nmpc,
        eval: EvalSettings {
            episodes: raw.eval.episodes.unwrap_or(100),
        },
        cs3: raw.cs3.unwrap_or_default(),
        cs3_duration_hours: raw
            .cs3_duration_hours
            .unwrap_or(crate::plants::cs3::CS3_DURATION_HOURS),
    };
    config.validate()?;
    Ok(config)
}

impl Config {
    pub fn parse_str(text: &str) -> Result<Config> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("config parse: {e}")))?;
        resolve(raw)
    }

    pub fn parse_file(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.intervals < 1 {
            return Err(Error::config("intervals must be >= 1"));
        }
        if self.substeps < 1 {
            return Err(Error::config("substeps must be >= 1"));
        }
        if self.policy.hidden_layers < 1 || self.policy.neurons < 1 {
            return Err(Error::config("policy needs hidden_layers >= 1 and neurons >= 1"));
        }
        if self.policy.history < 1 {
            return Err(Error::config("policy history must be >= 1"));
        }
        if self.train.episodes < 2 || self.b2b.online_episodes < 2 {
            return Err(Error::config("episode counts must be >= 2"));
        }
        if self.train.episodes < 10 * self.b2b.online_episodes {
            return Err(Error::config(format!(
                "offline episodes ({}) must be >= 10x online episodes ({})",
                self.train.episodes, self.b2b.online_episodes
            )));
        }
        if !(self.train.step_size > 0.0) || !(self.b2b.online_step_size > 0.0) {
            return Err(Error::config("step sizes must be positive"));
        }
        if !(self.train.discount > 0.0 && self.train.discount <= 1.0) {
            return Err(Error::config("discount must lie in (0, 1]"));
        }
        if self.b2b.trainable_layers.is_empty() {
            return Err(Error::config("b2b.trainable_layers must not be empty"));
        }
        for &l in &self.b2b.trainable_layers {
            if l > self.policy.hidden_layers {
                return Err(Error::config(format!(
                    "trainable layer {l} out of range (0..={})",
                    self.policy.hidden_layers
                )));
            }
        }
        if self.nmpc.multistarts < 1 {
            return Err(Error::config("nmpc.multistarts must be >= 1"));
        }
        if self.eval.episodes < 1 {
            return Err(Error::config("eval.episodes must be >= 1"));
        }
        if !(self.cs3_duration_hours > 0.0) {
            return Err(Error::config("cs3_duration_hours must be positive"));
        }
        Ok(())
    }

    pub fn build_plant(&self, kind: PlantKind) -> Box<dyn PlantModel> {
        let intervals = if kind.approx() == self.plant.approx() {
            self.intervals
        } else {
            kind.default_intervals()
        };
        kind.build(intervals, self.substeps, self.cs3, self.cs3_duration_hours)
    }

    /// Policy layout for the configured plant family.
    pub fn policy_config(&self) -> PolicyConfig {
        let plant = self.build_plant(self.plant);
        PolicyConfig {
            n_states: plant.n_states(),
            n_actions: plant.n_controls(),
            hidden_layers: self.policy.hidden_layers,
            neurons: self.policy.neurons,
            activation: self.policy.activation,
            lower: plant.control_lower(),
            upper: plant.control_upper(),
            split_networks: self.policy.split_networks,
            history: self.policy.history,
            state_scale: plant.state_scale(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            episodes: self.train.episodes,
            step_size: self.train.step_size,
            discount: self.train.discount,
            beta1: self.train.beta1,
            beta2: self.train.beta2,
            epsilon: self.train.epsilon,
            seed: self.seed,
        }
    }

    pub fn b2b_config(&self) -> B2BConfig {
        B2BConfig {
            offline_epochs: self.train.epochs,
            max_offline_epochs: self.b2b.max_offline_epochs,
            offline_episodes: self.train.episodes,
            online_epochs: self.b2b.online_epochs,
            online_episodes: self.b2b.online_episodes,
            offline_step_size: self.train.step_size,
            online_step_size: self.b2b.online_step_size,
            trainable_layers: self.b2b.trainable_layers.clone(),
            offline_stop_gap: self.b2b.offline_stop_gap,
            ocp_reference: None,
            seed: self.seed,
        }
    }

    pub fn nlp_settings(&self) -> NlpSettings {
        NlpSettings {
            multistarts: self.nmpc.multistarts,
            max_iters: self.nmpc.max_iters,
            grad_tol: self.nmpc.grad_tol,
            fd_step: self.nmpc.fd_step,
        }
    }
}
