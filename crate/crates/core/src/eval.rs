//! Greedy rollouts and the metrics reported for a policy.

use serde::Serialize;

use crate::domain::act::DialogueAct;
use crate::env::context::DialogueContext;
use crate::env::{EnvError, Environment, Observation, Session};
use crate::expert::expert_act;
use crate::policy::Policy;
use crate::transcript::Transcript;

/// Successful episodes must close within this many system turns.
pub const SUCCESS_TURN_LIMIT: usize = 15;

/// Something that picks the next system act.
pub trait Controller {
    fn choose(&mut self, obs: &Observation, ctx: &DialogueContext) -> usize;
}

impl Controller for Policy {
    fn choose(&mut self, obs: &Observation, _ctx: &DialogueContext) -> usize {
        self.greedy(&obs.state, &obs.valid_actions)
            .expect("policy matches the environment and the valid set is non-empty")
    }
}

/// The scripted expert; reads the dialogue context rather than the state vector.
#[derive(Debug, Clone, Copy)]
pub struct Expert {
    pub apology_threshold: f64,
}

impl Controller for Expert {
    fn choose(&mut self, _obs: &Observation, ctx: &DialogueContext) -> usize {
        expert_act(ctx, self.apology_threshold).index()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeResult {
    pub total_reward: f64,
    pub turns: usize,
    pub success: bool,
    pub min_reward: f64,
    pub max_reward: f64,
    /// Sizes of the constrained sets offered at each decision.
    pub valid_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub mean_reward: Option<f64>,
    pub success_rate: Option<f64>,
    pub mean_turns: Option<f64>,
    pub mean_valid_size: Option<f64>,
}

impl EvalReport {
    pub fn from_results(results: &[EpisodeResult]) -> Self {
        let n = results.len();
        let mean = |f: &dyn Fn(&EpisodeResult) -> f64| {
            (n > 0).then(|| results.iter().map(f).sum::<f64>() / n as f64)
        };
        let sizes: Vec<usize> = results
            .iter()
            .flat_map(|r| r.valid_sizes.iter().copied())
            .collect();
        Self {
            episodes: n,
            mean_reward: mean(&|r| r.total_reward),
            success_rate: mean(&|r| if r.success { 1.0 } else { 0.0 }),
            mean_turns: mean(&|r| r.turns as f64),
            mean_valid_size: (!sizes.is_empty())
                .then(|| sizes.iter().sum::<usize>() as f64 / sizes.len() as f64),
        }
    }
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let show = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        writeln!(f, "episodes:         {}", self.episodes)?;
        writeln!(f, "mean reward:      {}", show(self.mean_reward))?;
        writeln!(f, "task success:     {}", show(self.success_rate))?;
        writeln!(f, "mean turns:       {}", show(self.mean_turns))?;
        write!(f, "mean valid set:   {}", show(self.mean_valid_size))
    }
}

/// Plays one episode; `transcript` receives every row when given.
pub fn run_episode<C: Controller + ?Sized>(
    session: &mut Session,
    controller: &mut C,
    mut transcript: Option<&mut Transcript>,
) -> Result<EpisodeResult, EnvError> {
    let mut obs = session.begin(None);
    let mut result = EpisodeResult {
        total_reward: 0.0,
        turns: 0,
        success: false,
        min_reward: f64::INFINITY,
        max_reward: f64::NEG_INFINITY,
        valid_sizes: Vec::new(),
    };
    while !obs.terminal {
        result.valid_sizes.push(obs.valid_actions.len());
        let action = controller.choose(&obs, session.context());
        let before = obs.state.clone();
        obs = session.step(action)?;
        if let Some(t) = transcript.as_deref_mut() {
            t.push(
                before,
                DialogueAct::from_index(action),
                &obs.system_text,
                &obs.user_text,
            );
        }
        result.total_reward += obs.reward;
        result.min_reward = result.min_reward.min(obs.reward);
        result.max_reward = result.max_reward.max(obs.reward);
        result.turns += 1;
    }
    if let Some(t) = transcript {
        t.push(obs.state.clone(), None, "", "");
    }
    result.success = obs.task_success && result.turns <= SUCCESS_TURN_LIMIT;
    Ok(result)
}

pub fn evaluate<C: Controller + ?Sized>(
    session: &mut Session,
    controller: &mut C,
    episodes: usize,
) -> Result<(EvalReport, Vec<EpisodeResult>), EnvError> {
    let results = (0..episodes)
        .map(|_| run_episode(session, controller, None))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((EvalReport::from_results(&results), results))
}
