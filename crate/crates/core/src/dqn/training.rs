use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    select_action, train_step, DqnError, Experience, HyperParams, ReplayBuffer, TargetPair,
};
use crate::env::{EnvError, Environment};
use crate::neural::QNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: u64,
    pub total_reward: f64,
    pub turns: u64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub const HEADER: &'static str = "episode_index,total_reward,turns,epsilon";

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{}",
                p.episode, p.total_reward, p.turns, p.epsilon
            )
            .expect("string write");
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self, String> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| e.to_string())?
            .iter()
            .map(str::to_string)
            .collect();
        if header.join(",") != Self::HEADER {
            return Err(format!("expected header {}", Self::HEADER));
        }
        let mut points = Vec::new();
        for row in reader.deserialize::<(u64, f64, u64, f64)>() {
            let (episode, total_reward, turns, epsilon) = row.map_err(|e| e.to_string())?;
            points.push(CurvePoint {
                episode,
                total_reward,
                turns,
                epsilon,
            });
        }
        Ok(Self { points })
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }

    /// Mean total reward of the last `frac` of episodes minus that of the first.
    pub fn improvement(&self, frac: f64) -> Option<f64> {
        let n = ((self.points.len() as f64) * frac).floor() as usize;
        if n == 0 {
            return None;
        }
        let mean =
            |ps: &[CurvePoint]| ps.iter().map(|p| p.total_reward).sum::<f64>() / ps.len() as f64;
        Some(mean(&self.points[self.points.len() - n..]) - mean(&self.points[..n]))
    }

    /// Mean total reward over the final `n` episodes.
    pub fn tail_mean(&self, n: usize) -> Option<f64> {
        let n = n.min(self.points.len());
        if n == 0 {
            return None;
        }
        let tail = &self.points[self.points.len() - n..];
        Some(tail.iter().map(|p| p.total_reward).sum::<f64>() / n as f64)
    }
}

/// Resumable learner state.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub hp: HyperParams,
    pub pair: TargetPair,
    pub buffer: ReplayBuffer,
    pub rng: ChaCha8Rng,
    pub steps: u64,
    pub episodes: u64,
    pub updates: u64,
    pub curve: LearningCurve,
}

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("environment failed after {} steps: {source}", .state.steps)]
    Environment {
        source: EnvError,
        /// The learner as it was when the environment failed.
        state: Box<Trainer>,
    },
    #[error("learner fault after {} steps: {source}", .state.steps)]
    Learner {
        source: DqnError,
        state: Box<Trainer>,
    },
    #[error("cannot build the network: {0}")]
    Setup(DqnError),
}

impl TrainingError {
    /// Learner state at the point of failure, for checkpointing or resuming.
    pub fn state(&self) -> Option<&Trainer> {
        match self {
            TrainingError::Environment { state, .. } | TrainingError::Learner { state, .. } => {
                Some(state)
            }
            TrainingError::Setup(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub net: QNetwork,
    pub curve: LearningCurve,
    pub steps: u64,
    pub episodes: u64,
    pub updates: u64,
}

enum Fault {
    Env(EnvError),
    Learner(DqnError),
}

impl From<EnvError> for Fault {
    fn from(e: EnvError) -> Self {
        Fault::Env(e)
    }
}

impl From<DqnError> for Fault {
    fn from(e: DqnError) -> Self {
        Fault::Learner(e)
    }
}

impl Trainer {
    /// Fresh learner; network initialisation and exploration draw from `seed`.
    pub fn new(hp: HyperParams, inputs: usize, seed: u64) -> Result<Self, DqnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = QNetwork::random(&hp.layer_dims(inputs), &mut rng)?;
        Ok(Self {
            buffer: ReplayBuffer::new(hp.replay_capacity),
            pair: TargetPair::new(net),
            hp,
            rng,
            steps: 0,
            episodes: 0,
            updates: 0,
            curve: LearningCurve::default(),
        })
    }

    pub fn finished(&self) -> bool {
        self.steps >= self.hp.total_learning_steps || self.episodes >= self.hp.max_episodes
    }

    /// Runs episodes until a budget is spent, calling `on_episode` after each.
    pub fn run<E, F>(
        mut self,
        env: &mut E,
        mut on_episode: F,
    ) -> Result<TrainingOutcome, TrainingError>
    where
        E: Environment + ?Sized,
        F: FnMut(&CurvePoint),
    {
        while !self.finished() {
            match self.episode(env) {
                Ok(point) => on_episode(&point),
                Err(Fault::Env(source)) => {
                    return Err(TrainingError::Environment {
                        source,
                        state: Box::new(self),
                    })
                }
                Err(Fault::Learner(source)) => {
                    return Err(TrainingError::Learner {
                        source,
                        state: Box::new(self),
                    })
                }
            }
        }
        Ok(TrainingOutcome {
            net: self.pair.online,
            curve: self.curve,
            steps: self.steps,
            episodes: self.episodes,
            updates: self.updates,
        })
    }

    fn episode<E: Environment + ?Sized>(&mut self, env: &mut E) -> Result<CurvePoint, Fault> {
        let mut obs = env.reset(None)?;
        let mut total = 0.0;
        let mut turns = 0;
        let mut epsilon;
        loop {
            epsilon = self.hp.epsilon(self.steps);
            let a = select_action(
                &self.pair.online,
                &obs.state,
                &obs.valid_actions,
                epsilon,
                &mut self.rng,
            )?;
            let next = env.step(a)?;
            total += next.reward;
            turns += 1;
            self.steps += 1;
            let terminal = next.terminal;
            self.buffer.push(Experience {
                s: std::mem::take(&mut obs.state),
                a,
                r: next.reward,
                s_next: next.state.clone(),
                terminal,
                valid_next: next.valid_actions.clone(),
            });
            if train_step(&mut self.pair, &self.buffer, &self.hp, &mut self.rng)?.is_some() {
                self.updates += 1;
            }
            obs = next;
            if terminal || self.steps >= self.hp.total_learning_steps {
                break;
            }
        }
        let point = CurvePoint {
            episode: self.episodes,
            total_reward: total,
            turns,
            epsilon,
        };
        self.curve.points.push(point);
        self.episodes += 1;
        Ok(point)
    }
}

/// Trains a fresh network against `env`.
pub fn run_training<E: Environment + ?Sized>(
    env: &mut E,
    hp: &HyperParams,
    seed: u64,
) -> Result<TrainingOutcome, TrainingError> {
    let trainer = Trainer::new(hp.clone(), env.state_size(), seed).map_err(TrainingError::Setup)?;
    trainer.run(env, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_csv_round_trip() {
        let curve = LearningCurve {
            points: vec![
                CurvePoint {
                    episode: 0,
                    total_reward: -0.35,
                    turns: 7,
                    epsilon: 0.99,
                },
                CurvePoint {
                    episode: 1,
                    total_reward: 1.0 / 3.0,
                    turns: 9,
                    epsilon: 0.5,
                },
            ],
        };
        let text = curve.to_csv();
        assert!(text.starts_with("episode_index,total_reward,turns,epsilon\n"));
        assert_eq!(LearningCurve::parse_csv(&text).unwrap(), curve);
    }

    #[test]
    fn improvement_compares_tenths() {
        let points = (0..20)
            .map(|i| CurvePoint {
                episode: i,
                total_reward: i as f64,
                turns: 1,
                epsilon: 0.0,
            })
            .collect();
        let curve = LearningCurve { points };
        assert_eq!(curve.improvement(0.1), Some(18.0));
        assert_eq!(LearningCurve::default().improvement(0.1), None);
    }
}
