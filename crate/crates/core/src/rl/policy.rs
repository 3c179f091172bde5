//! Multi-binary placement policy: one Bernoulli per node plus a value head,
//! sharing a single tanh trunk.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::mlp::Mlp;
use crate::env::RewardBounds;
use crate::error::{Error, Result};
use crate::model::PlacementVector;

pub const POLICY_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNetwork {
    n_nodes: usize,
    hidden: Vec<usize>,
    /// Elementwise scaling applied to raw state vectors before the trunk.
    input_scale: Vec<f64>,
    mlp: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSample {
    pub action: PlacementVector,
    /// `Σ_i log(p_i if a_i else 1 − p_i)`.
    pub log_prob: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActMode {
    Sample,
    Deterministic,
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `log σ(z)` if `on`, else `log(1 − σ(z))`.
#[inline]
pub(crate) fn bernoulli_log_prob(z: f64, on: bool) -> f64 {
    if on {
        -softplus(-z)
    } else {
        -softplus(z)
    }
}

/// Entropy of a Bernoulli with logit `z`, in nats.
#[inline]
pub(crate) fn bernoulli_entropy(z: f64) -> f64 {
    let p = sigmoid(z);
    // H = softplus(z) - p·z
    softplus(z) - p * z
}

/// Log-probability of `action` under independent Bernoullis with logits.
pub fn log_prob_from_logits(logits: &[f64], action: &PlacementVector) -> f64 {
    logits
        .iter()
        .zip(&action.0)
        .map(|(&z, &a)| bernoulli_log_prob(z, a))
        .sum()
}

/// Independent Bernoulli draw per node. The value field is left at zero.
pub fn sample_action(probs: &[f64], rng: &mut impl Rng) -> ActionSample {
    let action = PlacementVector(probs.iter().map(|&p| rng.gen::<f64>() < p).collect());
    let log_prob = log_prob_of(probs, &action);
    ActionSample {
        action,
        log_prob,
        value: 0.0,
    }
}

/// Thresholded action: node `i` is chosen iff `p_i ≥ 0.5`.
pub fn greedy_action(probs: &[f64]) -> ActionSample {
    let action = PlacementVector(probs.iter().map(|&p| p >= 0.5).collect());
    let log_prob = log_prob_of(probs, &action);
    ActionSample {
        action,
        log_prob,
        value: 0.0,
    }
}

fn log_prob_of(probs: &[f64], action: &PlacementVector) -> f64 {
    probs
        .iter()
        .zip(&action.0)
        .map(|(&p, &a)| if a { p.ln() } else { (1.0 - p).ln() })
        .sum()
}

impl PolicyNetwork {
    /// Fresh network with zero-initialized output layer (probabilities 0.5,
    /// value 0 for every state).
    pub fn new(
        input_dim: usize,
        n_nodes: usize,
        hidden: &[usize],
        input_scale: Vec<f64>,
        rng: &mut impl Rng,
    ) -> Self {
        assert_eq!(input_scale.len(), input_dim);
        let sizes = Self::sizes_for(input_dim, n_nodes, hidden);
        Self {
            n_nodes,
            hidden: hidden.to_vec(),
            input_scale,
            mlp: Mlp::init(&sizes, true, rng),
        }
    }

    /// Network with every layer randomly initialized, used for gradient checks.
    pub fn new_random(input_dim: usize, n_nodes: usize, hidden: &[usize], rng: &mut impl Rng) -> Self {
        let sizes = Self::sizes_for(input_dim, n_nodes, hidden);
        Self {
            n_nodes,
            hidden: hidden.to_vec(),
            input_scale: vec![1.0; input_dim],
            mlp: Mlp::init(&sizes, false, rng),
        }
    }

    fn sizes_for(input_dim: usize, n_nodes: usize, hidden: &[usize]) -> Vec<usize> {
        std::iter::once(input_dim)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(n_nodes + 1))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.mlp.input_dim()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn param_count(&self) -> usize {
        self.mlp.params().len()
    }

    pub fn params(&self) -> &[f64] {
        self.mlp.params()
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        self.mlp.params_mut()
    }

    pub(crate) fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn input_scale(&self) -> &[f64] {
        &self.input_scale
    }

    pub(crate) fn scale_input(&self, state: &[f64]) -> Vec<f64> {
        state
            .iter()
            .zip(&self.input_scale)
            .map(|(s, k)| s * k)
            .collect()
    }

    fn check_dim(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "state has {} features, policy expects {}",
                state.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Per-node logits and the value estimate.
    pub fn logits_and_value(&self, state: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.check_dim(state)?;
        let mut out = self.mlp.forward(&self.scale_input(state));
        let value = out.pop().unwrap();
        Ok((out, value))
    }

    /// Bernoulli parameters in (0, 1) and the value estimate.
    pub fn forward(&self, state: &[f64]) -> Result<(Vec<f64>, f64)> {
        let (logits, value) = self.logits_and_value(state)?;
        Ok((logits.into_iter().map(sigmoid).collect(), value))
    }

    pub fn act(&self, state: &[f64], mode: ActMode, rng: &mut impl Rng) -> Result<ActionSample> {
        let (logits, value) = self.logits_and_value(state)?;
        let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
        let action = match mode {
            ActMode::Sample => PlacementVector(probs.iter().map(|&p| rng.gen::<f64>() < p).collect()),
            ActMode::Deterministic => PlacementVector(probs.iter().map(|&p| p >= 0.5).collect()),
        };
        let log_prob = log_prob_from_logits(&logits, &action);
        Ok(ActionSample {
            action,
            log_prob,
            value,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Architecture {
    input_dim: usize,
    hidden: Vec<usize>,
    n_nodes: usize,
    activation: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct PolicyFile {
    schema_version: u32,
    architecture: Architecture,
    input_scale: Vec<f64>,
    params: Vec<f64>,
    optimizer: Option<Adam>,
    bounds: Option<RewardBounds>,
}

/// Everything restored from a policy file.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedPolicy {
    pub policy: PolicyNetwork,
    pub optimizer: Option<Adam>,
    pub bounds: Option<RewardBounds>,
}

pub fn save_policy(
    path: impl AsRef<Path>,
    policy: &PolicyNetwork,
    optimizer: Option<&Adam>,
    bounds: Option<&RewardBounds>,
) -> Result<()> {
    let path = path.as_ref();
    let file = PolicyFile {
        schema_version: POLICY_SCHEMA_VERSION,
        architecture: Architecture {
            input_dim: policy.input_dim(),
            hidden: policy.hidden.clone(),
            n_nodes: policy.n_nodes,
            activation: "tanh".into(),
        },
        input_scale: policy.input_scale.clone(),
        params: policy.params().to_vec(),
        optimizer: optimizer.cloned(),
        bounds: bounds.cloned(),
    };
    let text = serde_json::to_string(&file).expect("policy serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_policy(path: impl AsRef<Path>) -> Result<SavedPolicy> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let version: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        what: "policy",
        message: e.to_string(),
    })?;
    match version.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == POLICY_SCHEMA_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::PolicyFormat(format!(
                "unsupported schema version {v} (this build reads {POLICY_SCHEMA_VERSION})"
            )))
        }
        None => return Err(Error::PolicyFormat("missing schema_version".into())),
    }
    let file: PolicyFile = serde_json::from_value(version).map_err(|e| Error::Parse {
        what: "policy",
        message: e.to_string(),
    })?;
    let arch = &file.architecture;
    if arch.activation != "tanh" {
        return Err(Error::PolicyFormat(format!(
            "unsupported activation `{}`",
            arch.activation
        )));
    }
    if file.input_scale.len() != arch.input_dim {
        return Err(Error::PolicyFormat("input scale length differs from input_dim".into()));
    }
    let sizes = PolicyNetwork::sizes_for(arch.input_dim, arch.n_nodes, &arch.hidden);
    let mlp = Mlp::from_params(&sizes, file.params).ok_or_else(|| {
        Error::PolicyFormat("parameter count does not match architecture".into())
    })?;
    if let Some(opt) = &file.optimizer {
        if opt.len() != mlp.params().len() {
            return Err(Error::PolicyFormat(
                "optimizer state does not match parameter count".into(),
            ));
        }
    }
    Ok(SavedPolicy {
        policy: PolicyNetwork {
            n_nodes: arch.n_nodes,
            hidden: arch.hidden.clone(),
            input_scale: file.input_scale,
            mlp,
        },
        optimizer: file.optimizer,
        bounds: file.bounds,
    })
}

/// Load a policy and require it to fit a given state size and node count.
pub fn load_policy_for(path: impl AsRef<Path>, input_dim: usize, n_nodes: usize) -> Result<SavedPolicy> {
    let saved = load_policy(path)?;
    if saved.policy.input_dim() != input_dim || saved.policy.n_nodes() != n_nodes {
        return Err(Error::PolicyFormat(format!(
            "policy expects {} inputs over {} nodes, scenario gives {input_dim} inputs over {n_nodes} nodes",
            saved.policy.input_dim(),
            saved.policy.n_nodes()
        )));
    }
    Ok(saved)
}
