//! Recurrent Gaussian control policy.
//!
//! The policy maps an augmented observation (measured state window, previous
//! action window, recurrent hidden state, normalized time) to the mean and
//! diagonal standard deviation of a normal distribution over control actions.
//! Means are squashed into the actuator bounds with a sigmoid, standard
//! deviations go through softplus with a small positive floor, and sampled
//! actions are clipped to the bounds while the pre-clip draw is kept for
//! log-probability evaluation.
//!
//! The first hidden layer is recurrent: its activations are returned as the
//! new hidden state and fed back as part of the next observation. With a
//! split configuration each control channel gets its own network (and its own
//! hidden slice); a unified configuration uses one network for all channels.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::ops::Range;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{gaussian_log_density_node, softplus, Graph, NodeId};
use crate::error::{Error, Result};
use crate::rng::{draw_normal, stream};

/// Floor added to the softplus output so standard deviations stay positive.
pub const STD_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Tanh,
    LeakyRelu,
}

impl Activation {
    fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::LeakyRelu => "leaky-relu",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "leaky-relu" => Ok(Activation::LeakyRelu),
            other => Err(Error::config(format!("unknown activation '{other}'"))),
        }
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Measured state dimension per time step.
    pub n_states: usize,
    pub n_actions: usize,
    pub hidden_layers: usize,
    pub neurons: usize,
    pub activation: Activation,
    /// Actuator lower bounds, one per action.
    pub lower: Vec<f64>,
    /// Actuator upper bounds, one per action.
    pub upper: Vec<f64>,
    /// One network per action (diagonal variance via independent channels)
    /// instead of a single unified network.
    pub split_networks: bool,
    /// Observation history depth; 1 keeps only the current state and the
    /// previous action.
    pub history: usize,
    /// Per-state divisors applied to observations before the network.
    pub state_scale: Vec<f64>,
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(Error::config("policy needs at least one state and action"));
        }
        if self.hidden_layers < 1 || self.neurons < 1 {
            return Err(Error::config("hidden_layers and neurons must be >= 1"));
        }
        if self.history < 1 {
            return Err(Error::config("history must be >= 1"));
        }
        if self.lower.len() != self.n_actions || self.upper.len() != self.n_actions {
            return Err(Error::config("action bound arity mismatch"));
        }
        for (i, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lo < hi) {
                return Err(Error::config(format!(
                    "bounds must satisfy lower < upper (action {i}: {lo} vs {hi})"
                )));
            }
        }
        if self.state_scale.len() != self.n_states {
            return Err(Error::config("state_scale arity mismatch"));
        }
        if self.state_scale.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::config("state_scale entries must be positive"));
        }
        Ok(())
    }

    /// Total layer count including the output layer.
    pub fn n_layers(&self) -> usize {
        self.hidden_layers + 1
    }
}

/// Parameter values plus a freeze mask for one network.
#[derive(Clone, PartialEq, Debug)]
pub struct NetParams {
    pub values: Vec<f64>,
    pub frozen: Vec<bool>,
}

/// Layered weight/bias collection for the whole policy (one entry per
/// network; a single entry when unified).
#[derive(Clone, PartialEq, Debug)]
pub struct PolicyParams {
    pub nets: Vec<NetParams>,
}

impl PolicyParams {
    pub fn flat_len(&self) -> usize {
        self.nets.iter().map(|n| n.values.len()).sum()
    }

    pub fn trainable_len(&self) -> usize {
        self.nets
            .iter()
            .map(|n| n.frozen.iter().filter(|f| !**f).count())
            .sum()
    }

    /// FNV-1a over the value bits; used to tag trajectories with the
    /// parameter snapshot they were collected under.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for net in &self.nets {
            for v in &net.values {
                for b in v.to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
            h ^= 0xff;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

/// Observation fed to the policy at one control interval. `state` and
/// `previous_action` hold `history` stacked steps (most recent first),
/// zero-padded before the start of the batch.
#[derive(Clone, Debug)]
pub struct Observation {
    pub state: Vec<f64>,
    pub previous_action: Vec<f64>,
    pub hidden: Vec<f64>,
    pub time_fraction: f64,
}

/// A sampled control: the bound-clipped value sent to the plant and the
/// pre-clip draw used for log-probability evaluation.
#[derive(Clone, Debug)]
pub struct ActionSample {
    pub applied: Vec<f64>,
    pub draw: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PolicyStep {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub hidden: Vec<f64>,
}

/// Weight/bias slot ranges of one layer within a network's parameter vector.
#[derive(Clone, Debug)]
pub struct LayerSlots {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Range<usize>,
    pub biases: Range<usize>,
}

struct SubnetOutputs {
    means: Range<usize>,
    stds: Range<usize>,
    log_prob: usize,
    hidden: Range<usize>,
}

#[derive(Clone)]
pub struct GaussianPolicy {
    config: PolicyConfig,
    graphs: Vec<Graph>,
    slots: Vec<LayerSlots>,
    obs_dim: usize,
    actions_per_net: usize,
}

impl GaussianPolicy {
    pub fn new(config: PolicyConfig) -> Result<Self> {
        config.validate()?;
        let n_nets = if config.split_networks {
            config.n_actions
        } else {
            1
        };
        let actions_per_net = config.n_actions / n_nets;
        let obs_dim = config.history * (config.n_states + config.n_actions)
            + config.neurons
            + 1;
        let slots = layer_slots(&config, obs_dim, actions_per_net);
        let graphs = (0..n_nets)
            .map(|net| build_subnet_graph(&config, obs_dim, actions_per_net, net, &slots))
            .collect();
        Ok(Self {
            config,
            graphs,
            slots,
            obs_dim,
            actions_per_net,
        })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn n_nets(&self) -> usize {
        self.graphs.len()
    }

    /// Parameter count of one network.
    pub fn net_len(&self) -> usize {
        self.slots.last().map(|s| s.biases.end).unwrap_or(0)
    }

    pub fn layer_slots(&self) -> &[LayerSlots] {
        &self.slots
    }

    /// Concatenated hidden-state length across networks.
    pub fn hidden_len(&self) -> usize {
        self.graphs.len() * self.config.neurons
    }

    pub fn zero_hidden(&self) -> Vec<f64> {
        vec![0.0; self.hidden_len()]
    }

    /// Parameter slots of the output-layer rows that produce the raw means,
    /// per network (global net-major indexing).
    pub fn output_mean_param_slots(&self) -> Vec<usize> {
        let out = self.slots.last().unwrap();
        let mut ids = Vec::new();
        for net in 0..self.graphs.len() {
            let base = net * self.net_len();
            for row in 0..self.actions_per_net {
                let w0 = out.weights.start + row * out.inputs;
                ids.extend(base + w0..base + w0 + out.inputs);
                ids.push(base + out.biases.start + row);
            }
        }
        ids
    }

    /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)], reproducible from
    /// the seed. All parameters start unfrozen.
    pub fn init_params(&self, seed: u64) -> PolicyParams {
        use rand::RngExt;
        let nets = (0..self.graphs.len())
            .map(|net| {
                let mut values = vec![0.0; self.net_len()];
                for (l, slot) in self.slots.iter().enumerate() {
                    let bound = 1.0 / (slot.inputs as f64).sqrt();
                    let mut rng = stream(seed, &[0x1217, net as u64, l as u64]);
                    for i in slot.weights.clone().chain(slot.biases.clone()) {
                        values[i] = rng.random_range(-bound..bound);
                    }
                }
                let frozen = vec![false; values.len()];
                NetParams { values, frozen }
            })
            .collect();
        PolicyParams { nets }
    }

    fn check_params(&self, params: &PolicyParams) -> Result<()> {
        if params.nets.len() != self.graphs.len()
            || params.nets.iter().any(|n| n.values.len() != self.net_len())
        {
            return Err(Error::config("parameter shape does not match policy"));
        }
        Ok(())
    }

    /// Normalized graph inputs for one network: scaled states, bound-relative
    /// previous actions, that network's hidden slice, and the time fraction.
    fn net_inputs(&self, obs: &Observation, net: usize, action: &[f64]) -> Result<Vec<f64>> {
        let c = &self.config;
        if obs.state.len() != c.history * c.n_states {
            return Err(Error::config(format!(
                "observation state length {} != history*n_states {}",
                obs.state.len(),
                c.history * c.n_states
            )));
        }
        if obs.previous_action.len() != c.history * c.n_actions {
            return Err(Error::config("observation previous_action length mismatch"));
        }
        if obs.hidden.len() != self.hidden_len() {
            return Err(Error::config(format!(
                "observation hidden length {} != {}",
                obs.hidden.len(),
                self.hidden_len()
            )));
        }
        if !(0.0..=1.0).contains(&obs.time_fraction) {
            return Err(Error::config(format!(
                "time_fraction {} outside [0,1]",
                obs.time_fraction
            )));
        }
        let mut v = Vec::with_capacity(self.obs_dim + action.len());
        for (i, s) in obs.state.iter().enumerate() {
            v.push(s / c.state_scale[i % c.n_states]);
        }
        for (i, u) in obs.previous_action.iter().enumerate() {
            let j = i % c.n_actions;
            v.push((u - c.lower[j]) / (c.upper[j] - c.lower[j]));
        }
        v.extend_from_slice(&obs.hidden[net * c.neurons..(net + 1) * c.neurons]);
        v.push(obs.time_fraction);
        v.extend_from_slice(action);
        Ok(v)
    }

    fn output_map(&self) -> SubnetOutputs {
        let k = self.actions_per_net;
        SubnetOutputs {
            means: 0..k,
            stds: k..2 * k,
            log_prob: 2 * k,
            hidden: 2 * k + 1..2 * k + 1 + self.config.neurons,
        }
    }

    /// One policy evaluation: bounded mean, positive std, next hidden state.
    pub fn forward(&mut self, params: &PolicyParams, obs: &Observation) -> Result<PolicyStep> {
        self.check_params(params)?;
        let map = self.output_map();
        let k = self.actions_per_net;
        let dummy = vec![0.0; k];
        let mut mean = Vec::with_capacity(self.config.n_actions);
        let mut std = Vec::with_capacity(self.config.n_actions);
        let mut hidden = Vec::with_capacity(self.hidden_len());
        for net in 0..self.graphs.len() {
            let inputs = self.net_inputs(obs, net, &dummy)?;
            let out = self.graphs[net].forward(&inputs, &params.nets[net].values)?;
            mean.extend_from_slice(&out[map.means.clone()]);
            std.extend_from_slice(&out[map.stds.clone()]);
            hidden.extend_from_slice(&out[map.hidden.clone()]);
        }
        Ok(PolicyStep { mean, std, hidden })
    }

    /// Draws u = mean + std ⊙ z and clips to the actuator bounds. The
    /// unclipped draw is kept so the score function stays well defined.
    pub fn sample_action(
        &self,
        mean: &[f64],
        std: &[f64],
        rng: &mut impl Rng,
    ) -> ActionSample {
        let mut draw = Vec::with_capacity(mean.len());
        let mut applied = Vec::with_capacity(mean.len());
        for i in 0..mean.len() {
            let u = mean[i] + std[i] * draw_normal(rng);
            draw.push(u);
            applied.push(u.clamp(self.config.lower[i], self.config.upper[i]));
        }
        ActionSample { applied, draw }
    }

    /// Log-density of the recorded pre-clip draw under the policy at `obs`,
    /// plus its gradient with respect to the unfrozen parameters (frozen
    /// slots are exactly zero). Layout is net-major, matching
    /// [`PolicyParams`] flattening.
    pub fn log_prob(
        &mut self,
        params: &PolicyParams,
        obs: &Observation,
        draw: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        self.check_params(params)?;
        if draw.len() != self.config.n_actions {
            return Err(Error::config("drawn action arity mismatch"));
        }
        let map = self.output_map();
        let k = self.actions_per_net;
        let mut value = 0.0;
        let mut grad = Vec::with_capacity(self.graphs.len() * self.net_len());
        for net in 0..self.graphs.len() {
            let inputs = self.net_inputs(obs, net, &draw[net * k..(net + 1) * k])?;
            let out = self.graphs[net].forward(&inputs, &params.nets[net].values)?;
            value += out[map.log_prob];
            let mut g = self.graphs[net].backward(map.log_prob)?;
            for (gi, frozen) in g.iter_mut().zip(&params.nets[net].frozen) {
                if *frozen {
                    *gi = 0.0;
                }
            }
            grad.extend_from_slice(&g);
        }
        Ok((value, grad))
    }

    /// Returns params with everything frozen except the listed layers
    /// (0-based; the output layer is index `hidden_layers`).
    pub fn apply_freeze(
        &self,
        params: &PolicyParams,
        trainable_layers: &[usize],
    ) -> Result<PolicyParams> {
        if trainable_layers.is_empty() {
            return Err(Error::config("trainable layer set is empty"));
        }
        let n_layers = self.config.n_layers();
        for &l in trainable_layers {
            if l >= n_layers {
                return Err(Error::config(format!(
                    "layer {l} out of range (policy has {n_layers} layers)"
                )));
            }
        }
        self.check_params(params)?;
        let mut out = params.clone();
        for net in &mut out.nets {
            for (l, slot) in self.slots.iter().enumerate() {
                let frozen = !trainable_layers.contains(&l);
                for i in slot.weights.clone().chain(slot.biases.clone()) {
                    net.frozen[i] = frozen;
                }
            }
        }
        Ok(out)
    }

    /// Default transfer-learning choice: last hidden layer plus output layer.
    pub fn default_trainable_layers(&self) -> Vec<usize> {
        vec![self.config.hidden_layers - 1, self.config.hidden_layers]
    }

    pub fn save_checkpoint(&self, params: &PolicyParams, path: &Path) -> Result<()> {
        self.check_params(params)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_checkpoint(&self.config, params, &mut f)
    }
}

fn layer_slots(config: &PolicyConfig, obs_dim: usize, actions_per_net: usize) -> Vec<LayerSlots> {
    let mut slots = Vec::with_capacity(config.n_layers());
    let mut offset = 0;
    for l in 0..config.n_layers() {
        let inputs = if l == 0 { obs_dim } else { config.neurons };
        let outputs = if l == config.hidden_layers {
            2 * actions_per_net
        } else {
            config.neurons
        };
        let weights = offset..offset + inputs * outputs;
        let biases = weights.end..weights.end + outputs;
        offset = biases.end;
        slots.push(LayerSlots {
            inputs,
            outputs,
            weights,
            biases,
        });
    }
    slots
}

fn build_subnet_graph(
    config: &PolicyConfig,
    obs_dim: usize,
    actions_per_net: usize,
    net: usize,
    slots: &[LayerSlots],
) -> Graph {
    let mut g = Graph::new();
    let obs: Vec<NodeId> = (0..obs_dim).map(|_| g.input()).collect();
    let u: Vec<NodeId> = (0..actions_per_net).map(|_| g.input()).collect();

    // Parameter nodes in flat layout order: per layer, weights row-major
    // then biases.
    let mut w_nodes: Vec<Vec<NodeId>> = Vec::with_capacity(slots.len());
    let mut b_nodes: Vec<Vec<NodeId>> = Vec::with_capacity(slots.len());
    for slot in slots {
        w_nodes.push((0..slot.weights.len()).map(|_| g.param()).collect());
        b_nodes.push((0..slot.biases.len()).map(|_| g.param()).collect());
    }

    let mut acts = obs;
    let mut recurrent_out: Vec<NodeId> = Vec::new();
    for (l, slot) in slots.iter().enumerate() {
        let mut next = Vec::with_capacity(slot.outputs);
        for row in 0..slot.outputs {
            let w_row = &w_nodes[l][row * slot.inputs..(row + 1) * slot.inputs];
            let z = g.dot(w_row, &acts);
            let zb = g.add(z, b_nodes[l][row]);
            let a = if l == config.hidden_layers {
                zb
            } else {
                match config.activation {
                    Activation::Tanh => g.tanh(zb),
                    Activation::LeakyRelu => g.leaky_relu(zb),
                }
            };
            next.push(a);
        }
        if l == 0 {
            recurrent_out = next.clone();
        }
        acts = next;
    }

    // Raw head rows: first the means, then the stds.
    let mut means = Vec::with_capacity(actions_per_net);
    let mut stds = Vec::with_capacity(actions_per_net);
    for j in 0..actions_per_net {
        let global = if config.split_networks { net } else { j };
        let lo = g.constant(config.lower[global]);
        let range = g.constant(config.upper[global] - config.lower[global]);
        let s = g.sigmoid(acts[j]);
        let scaled = g.mul(range, s);
        means.push(g.add(lo, scaled));

        let sp = g.softplus(acts[actions_per_net + j]);
        let floor = g.constant(STD_FLOOR);
        stds.push(g.add(sp, floor));
    }

    let mut log_prob = gaussian_log_density_node(&mut g, u[0], means[0], stds[0]);
    for j in 1..actions_per_net {
        let term = gaussian_log_density_node(&mut g, u[j], means[j], stds[j]);
        log_prob = g.add(log_prob, term);
    }

    for &m in &means {
        g.mark_output(m);
    }
    for &s in &stds {
        g.mark_output(s);
    }
    g.mark_output(log_prob);
    for &h in &recurrent_out {
        g.mark_output(h);
    }
    g
}

// ---------------------------------------------------------------------------
// Checkpoint format: one header line with the configuration, then one line
// per layer (net-major) of whitespace-separated decimal values (weights
// row-major, then biases), printed with 17 significant digits so reloading
// is exact.

fn fmt_f64_list(values: impl Iterator<Item = f64>) -> String {
    let mut s = String::new();
    for (i, v) in values.enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v:.16e}");
    }
    s
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::config(format!("bad number '{t}': {e}")))
        })
        .collect()
}

pub fn write_checkpoint(
    config: &PolicyConfig,
    params: &PolicyParams,
    w: &mut impl Write,
) -> Result<()> {
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.16e}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    writeln!(
        w,
        "batchrl-policy-v1 n_states={} n_actions={} hidden_layers={} neurons={} \
         activation={} split={} history={} lb={} ub={} scale={}",
        config.n_states,
        config.n_actions,
        config.hidden_layers,
        config.neurons,
        config.activation.name(),
        config.split_networks as u8,
        config.history,
        join(&config.lower),
        join(&config.upper),
        join(&config.state_scale),
    )?;
    let policy = GaussianPolicy::new(config.clone())?;
    for net in &params.nets {
        for slot in policy.layer_slots() {
            let line = fmt_f64_list(
                slot.weights
                    .clone()
                    .chain(slot.biases.clone())
                    .map(|i| net.values[i]),
            );
            writeln!(w, "{line}")?;
        }
    }
    Ok(())
}

pub fn read_checkpoint(r: impl BufRead) -> Result<(PolicyConfig, PolicyParams)> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::config("empty checkpoint"))??;
    let mut fields = std::collections::HashMap::new();
    let mut tokens = header.split_whitespace();
    let magic = tokens.next().unwrap_or_default();
    if magic != "batchrl-policy-v1" {
        return Err(Error::config(format!("bad checkpoint magic '{magic}'")));
    }
    for tok in tokens {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::config(format!("bad header token '{tok}'")))?;
        fields.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| -> Result<String> {
        fields
            .get(k)
            .cloned()
            .ok_or_else(|| Error::config(format!("checkpoint header missing '{k}'")))
    };
    let parse_usize = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|e| Error::config(format!("bad '{k}': {e}")))
    };
    let config = PolicyConfig {
        n_states: parse_usize("n_states")?,
        n_actions: parse_usize("n_actions")?,
        hidden_layers: parse_usize("hidden_layers")?,
        neurons: parse_usize("neurons")?,
        activation: Activation::parse(&get("activation")?)?,
        lower: parse_f64_list(&get("lb")?)?,
        upper: parse_f64_list(&get("ub")?)?,
        split_networks: get("split")? == "1",
        history: parse_usize("history")?,
        state_scale: parse_f64_list(&get("scale")?)?,
    };
    let policy = GaussianPolicy::new(config.clone())?;
    let mut nets = Vec::with_capacity(policy.n_nets());
    for net in 0..policy.n_nets() {
        let mut values = vec![0.0; policy.net_len()];
        for (l, slot) in policy.layer_slots().iter().enumerate() {
            let line = lines.next().ok_or_else(|| {
                Error::config(format!("checkpoint truncated at net {net} layer {l}"))
            })??;
            let mut it = line.split_whitespace();
            for i in slot.weights.clone().chain(slot.biases.clone()) {
                let tok = it.next().ok_or_else(|| {
                    Error::config(format!("short layer line (net {net} layer {l})"))
                })?;
                values[i] = tok
                    .parse()
                    .map_err(|e| Error::config(format!("bad value '{tok}': {e}")))?;
            }
            if it.next().is_some() {
                return Err(Error::config(format!(
                    "trailing values on layer line (net {net} layer {l})"
                )));
            }
        }
        let frozen = vec![false; values.len()];
        nets.push(NetParams { values, frozen });
    }
    if lines.next().is_some() {
        return Err(Error::config("trailing lines in checkpoint"));
    }
    Ok((config, PolicyParams { nets }))
}

pub fn load_checkpoint(path: &Path) -> Result<(PolicyConfig, PolicyParams)> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::config(format!("cannot open checkpoint {}: {e}", path.display())))?;
    read_checkpoint(std::io::BufReader::new(f))
}

pub fn expected_std_at_zero() -> f64 {
    softplus(0.0) + STD_FLOOR
}
