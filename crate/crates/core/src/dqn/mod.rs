//! Deep Q-learning with experience replay, a periodically synchronised
//! target network and exploration restricted to constrained action sets.

pub mod replay;
pub mod training;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::act::CATALOG_SIZE;
use crate::neural::{Gradients, NetError, QNetwork};

pub use replay::{Experience, ReplayBuffer};
pub use training::{run_training, CurvePoint, LearningCurve, TrainingError, TrainingOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    pub epsilon_anneal_steps: u64,
    pub batch_size: usize,
    /// Environment steps; one gradient update per step once warm.
    pub total_learning_steps: u64,
    pub max_episodes: u64,
    pub target_sync_period: u64,
    pub learning_rate: f64,
    pub replay_capacity: usize,
    pub replay_warmup: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            hidden: vec![40, 40],
            gamma: 0.7,
            epsilon_start: 1.0,
            epsilon_min: 0.01,
            epsilon_anneal_steps: 10_000,
            batch_size: 32,
            total_learning_steps: 20_000,
            max_episodes: 3_000,
            target_sync_period: 1_000,
            learning_rate: 0.005,
            replay_capacity: 10_000,
            replay_warmup: 500,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum HyperParamError {
    #[error("gamma {0} is outside [0, 1)")]
    Gamma(f64),
    #[error("epsilon bounds must satisfy 0 <= min ({min}) <= start ({start}) <= 1")]
    Epsilon { start: f64, min: f64 },
    #[error("{0} must be at least 1")]
    Zero(&'static str),
    #[error("learning rate {0} must be positive")]
    LearningRate(f64),
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), HyperParamError> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(HyperParamError::Gamma(self.gamma));
        }
        if !(0.0 <= self.epsilon_min
            && self.epsilon_min <= self.epsilon_start
            && self.epsilon_start <= 1.0)
        {
            return Err(HyperParamError::Epsilon {
                start: self.epsilon_start,
                min: self.epsilon_min,
            });
        }
        if self.batch_size == 0 {
            return Err(HyperParamError::Zero("batch_size"));
        }
        if self.target_sync_period == 0 {
            return Err(HyperParamError::Zero("target_sync_period"));
        }
        if self.replay_capacity == 0 {
            return Err(HyperParamError::Zero("replay_capacity"));
        }
        if self.hidden.contains(&0) {
            return Err(HyperParamError::Zero("hidden layer width"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(HyperParamError::LearningRate(self.learning_rate));
        }
        Ok(())
    }

    /// Linear annealing from `epsilon_start` to `epsilon_min`.
    pub fn epsilon(&self, step: u64) -> f64 {
        if step >= self.epsilon_anneal_steps {
            return self.epsilon_min;
        }
        let frac = step as f64 / self.epsilon_anneal_steps as f64;
        self.epsilon_start + (self.epsilon_min - self.epsilon_start) * frac
    }

    /// Layer widths for a given input width.
    pub fn layer_dims(&self, inputs: usize) -> Vec<usize> {
        let mut dims = vec![inputs];
        dims.extend(&self.hidden);
        dims.push(CATALOG_SIZE);
        dims
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DqnError {
    #[error("no valid action to choose from")]
    EmptyValidSet,
    #[error("action {0} is not in the catalog")]
    UnknownAction(usize),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Online network plus its frozen target copy.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPair {
    pub online: QNetwork,
    pub target: QNetwork,
    pub steps_since_sync: u64,
}

impl TargetPair {
    pub fn new(online: QNetwork) -> Self {
        Self {
            target: online.clone(),
            online,
            steps_since_sync: 0,
        }
    }

    pub fn sync(&mut self) {
        self.target = self.online.clone();
        self.steps_since_sync = 0;
    }
}

/// Index of the largest `q` among `valid`, ties to the lowest index.
pub fn argmax_over(q: &[f64], valid: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for &a in valid {
        let v = *q.get(a)?;
        match best {
            Some(b) if q[b] > v || (q[b] == v && b < a) => {}
            _ => best = Some(a),
        }
    }
    best
}

/// Epsilon-greedy choice restricted to `valid`.
pub fn select_action<R: Rng + ?Sized>(
    net: &QNetwork,
    s: &[f64],
    valid: &[usize],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize, DqnError> {
    if valid.is_empty() {
        return Err(DqnError::EmptyValidSet);
    }
    if let Some(&a) = valid.iter().find(|&&a| a >= net.output_size()) {
        return Err(DqnError::UnknownAction(a));
    }
    if rng.gen::<f64>() < epsilon {
        return Ok(*valid.choose(rng).expect("non-empty"));
    }
    let q = net.forward(s)?;
    Ok(argmax_over(&q, valid).expect("valid indices are in range"))
}

/// `r` for terminal transitions, else `r + gamma * max_{a' in valid_next} Q_target(s', a')`.
pub fn td_target(target: &QNetwork, e: &Experience, gamma: f64) -> Result<f64, DqnError> {
    if e.terminal || e.valid_next.is_empty() {
        return Ok(e.r);
    }
    let q = target.forward(&e.s_next)?;
    let best = argmax_over(&q, &e.valid_next).ok_or(DqnError::UnknownAction(e.valid_next[0]))?;
    Ok(e.r + gamma * q[best])
}

/// One minibatch update. Returns the batch's mean squared TD error before
/// the update, or `None` while the buffer is below the warmup size.
pub fn train_step<R: Rng + ?Sized>(
    pair: &mut TargetPair,
    buffer: &ReplayBuffer,
    hp: &HyperParams,
    rng: &mut R,
) -> Result<Option<f64>, DqnError> {
    if buffer.len() < hp.replay_warmup.max(1) {
        return Ok(None);
    }
    let batch = buffer.sample_batch(hp.batch_size, rng);
    let mut grads = Gradients::zeros_like(&pair.online);
    let mut loss = 0.0;
    for e in &batch {
        let y = td_target(&pair.target, e, hp.gamma)?;
        let residual = pair.online.accumulate_gradient(&e.s, e.a, y, &mut grads)?;
        loss += residual * residual;
    }
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    pair.online.apply_sgd(&grads, hp.learning_rate)?;
    pair.steps_since_sync += 1;
    if pair.steps_since_sync >= hp.target_sync_period {
        pair.sync();
    }
    Ok(Some(loss / n))
}
