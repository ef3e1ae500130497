//! Reverse-mode differentiation over small dense computation graphs.
//!
//! A [`Graph`] is built once from primitive operations (affine maps, tanh,
//! leaky-ReLU, softplus, Gaussian log-density terms) and then evaluated many
//! times with fresh inputs and parameters. [`Graph::forward`] populates all
//! node values; [`Graph::backward`] accumulates adjoints in reverse
//! topological order and returns the gradient of the seeded output with
//! respect to every parameter slot.
//!
//! The node list is append-only, so parents always precede children and the
//! evaluation order is a valid topological order by construction.

use crate::error::{Error, Result};

/// Negative-side slope of the leaky rectifier. At the kink (x = 0) the
/// negative-side slope is used, so the subgradient choice is deterministic.
pub const LEAKY_SLOPE: f64 = 0.01;

pub const LN_2PI: f64 = 1.8378770664093453;

/// Index of a node in its [`Graph`].
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct NodeId(u32);

impl NodeId {
    #[inline]
    fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug)]
enum Op {
    /// Reads input slot `i`.
    Input(u32),
    /// Reads parameter slot `i`.
    Param(u32),
    Const(f64),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Neg(NodeId),
    Square(NodeId),
    Ln(NodeId),
    Exp(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Softplus(NodeId),
    LeakyRelu(NodeId),
    /// Inner product of two equally long node lists.
    Dot(Box<[NodeId]>, Box<[NodeId]>),
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable log(1 + exp(x)).
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// A small reusable computation graph.
///
/// Values and adjoints are stored per node; adjoints are zero outside of a
/// backward pass.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    ops: Vec<Op>,
    values: Vec<f64>,
    adjoints: Vec<f64>,
    param_nodes: Vec<NodeId>,
    n_inputs: usize,
    outputs: Vec<NodeId>,
    evaluated: bool,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, op: Op) -> NodeId {
        let id = NodeId(self.ops.len() as u32);
        self.ops.push(op);
        self.values.push(0.0);
        self.adjoints.push(0.0);
        self.evaluated = false;
        id
    }

    /// Declares the next input slot.
    pub fn input(&mut self) -> NodeId {
        let slot = self.n_inputs as u32;
        self.n_inputs += 1;
        self.push(Op::Input(slot))
    }

    /// Declares the next parameter slot.
    pub fn param(&mut self) -> NodeId {
        let slot = self.param_nodes.len() as u32;
        let id = self.push(Op::Param(slot));
        self.param_nodes.push(id);
        id
    }

    pub fn constant(&mut self, c: f64) -> NodeId {
        self.push(Op::Const(c))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Mul(a, b))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Div(a, b))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Neg(a))
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Square(a))
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Ln(a))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Exp(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Sigmoid(a))
    }

    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Softplus(a))
    }

    pub fn leaky_relu(&mut self, a: NodeId) -> NodeId {
        self.push(Op::LeakyRelu(a))
    }

    /// Inner product Σ lhs_i · rhs_i as a single fused node.
    pub fn dot(&mut self, lhs: &[NodeId], rhs: &[NodeId]) -> NodeId {
        assert_eq!(lhs.len(), rhs.len(), "dot arity");
        self.push(Op::Dot(lhs.into(), rhs.into()))
    }

    /// Registers `id` as the next output; returns its output index.
    pub fn mark_output(&mut self, id: NodeId) -> usize {
        self.outputs.push(id);
        self.outputs.len() - 1
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_params(&self) -> usize {
        self.param_nodes.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.ops.len()
    }

    pub fn value(&self, id: NodeId) -> f64 {
        self.values[id.idx()]
    }

    /// Evaluates every node in declaration order and returns the output
    /// values in output-declaration order.
    pub fn forward(&mut self, inputs: &[f64], params: &[f64]) -> Result<Vec<f64>> {
        if inputs.len() != self.n_inputs {
            return Err(Error::config(format!(
                "graph expects {} inputs, got {}",
                self.n_inputs,
                inputs.len()
            )));
        }
        if params.len() != self.param_nodes.len() {
            return Err(Error::config(format!(
                "graph expects {} params, got {}",
                self.param_nodes.len(),
                params.len()
            )));
        }
        for i in 0..self.ops.len() {
            let v = match &self.ops[i] {
                Op::Input(s) => inputs[*s as usize],
                Op::Param(s) => params[*s as usize],
                Op::Const(c) => *c,
                Op::Add(a, b) => self.values[a.idx()] + self.values[b.idx()],
                Op::Sub(a, b) => self.values[a.idx()] - self.values[b.idx()],
                Op::Mul(a, b) => self.values[a.idx()] * self.values[b.idx()],
                Op::Div(a, b) => self.values[a.idx()] / self.values[b.idx()],
                Op::Neg(a) => -self.values[a.idx()],
                Op::Square(a) => {
                    let x = self.values[a.idx()];
                    x * x
                }
                Op::Ln(a) => self.values[a.idx()].ln(),
                Op::Exp(a) => self.values[a.idx()].exp(),
                Op::Tanh(a) => self.values[a.idx()].tanh(),
                Op::Sigmoid(a) => sigmoid(self.values[a.idx()]),
                Op::Softplus(a) => softplus(self.values[a.idx()]),
                Op::LeakyRelu(a) => {
                    let x = self.values[a.idx()];
                    if x > 0.0 {
                        x
                    } else {
                        LEAKY_SLOPE * x
                    }
                }
                Op::Dot(ls, rs) => {
                    let mut acc = 0.0;
                    for (l, r) in ls.iter().zip(rs.iter()) {
                        acc += self.values[l.idx()] * self.values[r.idx()];
                    }
                    acc
                }
            };
            self.values[i] = v;
        }
        self.evaluated = true;
        Ok(self.outputs.iter().map(|o| self.values[o.idx()]).collect())
    }

    /// Gradient of output `output` with respect to every parameter slot.
    ///
    /// Requires a prior [`forward`](Self::forward) on this instance; adjoints
    /// are reset to zero before returning, so repeated backward passes over
    /// different outputs are independent.
    pub fn backward(&mut self, output: usize) -> Result<Vec<f64>> {
        if !self.evaluated {
            return Err(Error::state("backward called before forward"));
        }
        let seed = *self
            .outputs
            .get(output)
            .ok_or_else(|| Error::config(format!("no output #{output}")))?;
        self.adjoints[seed.idx()] = 1.0;
        for i in (0..self.ops.len()).rev() {
            let a = self.adjoints[i];
            if a == 0.0 {
                continue;
            }
            match &self.ops[i] {
                Op::Input(_) | Op::Param(_) | Op::Const(_) => {}
                Op::Add(x, y) => {
                    self.adjoints[x.idx()] += a;
                    self.adjoints[y.idx()] += a;
                }
                Op::Sub(x, y) => {
                    self.adjoints[x.idx()] += a;
                    self.adjoints[y.idx()] -= a;
                }
                Op::Mul(x, y) => {
                    let (vx, vy) = (self.values[x.idx()], self.values[y.idx()]);
                    self.adjoints[x.idx()] += a * vy;
                    self.adjoints[y.idx()] += a * vx;
                }
                Op::Div(x, y) => {
                    let vy = self.values[y.idx()];
                    self.adjoints[x.idx()] += a / vy;
                    self.adjoints[y.idx()] -= a * self.values[i] / vy;
                }
                Op::Neg(x) => self.adjoints[x.idx()] -= a,
                Op::Square(x) => self.adjoints[x.idx()] += a * 2.0 * self.values[x.idx()],
                Op::Ln(x) => self.adjoints[x.idx()] += a / self.values[x.idx()],
                Op::Exp(x) => self.adjoints[x.idx()] += a * self.values[i],
                Op::Tanh(x) => {
                    let t = self.values[i];
                    self.adjoints[x.idx()] += a * (1.0 - t * t);
                }
                Op::Sigmoid(x) => {
                    let s = self.values[i];
                    self.adjoints[x.idx()] += a * s * (1.0 - s);
                }
                Op::Softplus(x) => {
                    self.adjoints[x.idx()] += a * sigmoid(self.values[x.idx()]);
                }
                Op::LeakyRelu(x) => {
                    let slope = if self.values[x.idx()] > 0.0 {
                        1.0
                    } else {
                        LEAKY_SLOPE
                    };
                    self.adjoints[x.idx()] += a * slope;
                }
                Op::Dot(ls, rs) => {
                    // Split borrows: ops is only read, adjoints/values mutated.
                    for (l, r) in ls.iter().zip(rs.iter()) {
                        let (vl, vr) = (self.values[l.idx()], self.values[r.idx()]);
                        self.adjoints[l.idx()] += a * vr;
                        self.adjoints[r.idx()] += a * vl;
                    }
                }
            }
        }
        let grad = self
            .param_nodes
            .iter()
            .map(|p| self.adjoints[p.idx()])
            .collect();
        for a in &mut self.adjoints {
            *a = 0.0;
        }
        Ok(grad)
    }
}

/// Log-density of a diagonal Gaussian: Σ_i [ -½·log 2π - log σ_i - ½((u_i-μ_i)/σ_i)² ].
pub fn gaussian_log_density(u: &[f64], mean: &[f64], std: &[f64]) -> Result<f64> {
    if u.len() != mean.len() || u.len() != std.len() {
        return Err(Error::config(format!(
            "gaussian_log_density arity mismatch: u={}, mean={}, std={}",
            u.len(),
            mean.len(),
            std.len()
        )));
    }
    let mut acc = 0.0;
    for i in 0..u.len() {
        if std[i] <= 0.0 {
            return Err(Error::Domain(format!("nonpositive std {} at {i}", std[i])));
        }
        let z = (u[i] - mean[i]) / std[i];
        acc += -0.5 * LN_2PI - std[i].ln() - 0.5 * z * z;
    }
    Ok(acc)
}

/// Appends Gaussian log-density nodes for one component and returns the term.
pub fn gaussian_log_density_node(
    g: &mut Graph,
    u: NodeId,
    mean: NodeId,
    std: NodeId,
) -> NodeId {
    let diff = g.sub(u, mean);
    let z = g.div(diff, std);
    let z2 = g.square(z);
    let half = g.constant(0.5);
    let quad = g.mul(half, z2);
    let ln_std = g.ln(std);
    let c = g.constant(-0.5 * LN_2PI);
    let t = g.sub(c, ln_std);
    g.sub(t, quad)
}
