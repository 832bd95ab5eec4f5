//! A trained policy talking to a person: the policy picks system acts and
//! pauses whenever an act expects a reply.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::session::Session;
use super::{EnvError, Observation};
use crate::domain::act::DialogueAct;
use crate::policy::Policy;
use crate::simulator::UserGoal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTurn {
    pub action: DialogueAct,
    pub system_text: String,
}

/// Everything the agent said since the last user input.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentReply {
    pub turns: Vec<AgentTurn>,
    /// Latest completed transition, or the reset observation.
    pub observation: Observation,
    /// Sum of rewards of the transitions completed in this reply.
    pub reward: f64,
    pub awaiting_user: bool,
}

#[derive(Debug, Clone)]
pub struct InteractiveAgent {
    session: Session,
    policy: Arc<Policy>,
    last: Option<Observation>,
}

impl InteractiveAgent {
    pub fn new(session: Session, policy: Arc<Policy>) -> Self {
        Self {
            session,
            policy,
            last: None,
        }
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn awaiting_user(&self) -> bool {
        self.session.awaiting_user()
    }

    pub fn terminal(&self) -> bool {
        self.last.as_ref().is_some_and(|o| o.terminal)
    }

    pub fn started(&self) -> bool {
        self.last.is_some()
    }

    /// Resets the episode and lets the policy speak until it needs the user.
    pub fn start(&mut self, goal: Option<UserGoal>) -> Result<AgentReply, EnvError> {
        let obs = self.session.begin(goal);
        self.last = Some(obs);
        self.advance(0.0)
    }

    /// Folds in what the user typed and continues.
    pub fn user_says(&mut self, text: &str) -> Result<AgentReply, EnvError> {
        if !self.session.awaiting_user() {
            return Err(EnvError::rejected(
                "not_awaiting",
                "the agent is not waiting for input",
            ));
        }
        let obs = self.session.human_turn(Some(text))?;
        let reward = obs.reward;
        self.last = Some(obs);
        self.advance(reward)
    }

    /// Gives up on the current episode, e.g. after the user went silent.
    pub fn abort(&mut self) {
        self.session.abort();
        if let Some(o) = &mut self.last {
            o.terminal = true;
            o.valid_actions.clear();
        }
    }

    fn advance(&mut self, mut reward: f64) -> Result<AgentReply, EnvError> {
        let mut turns = Vec::new();
        loop {
            let obs = self.last.as_ref().expect("started");
            if obs.terminal {
                break;
            }
            let action = self
                .policy
                .greedy(&obs.state, &obs.valid_actions)
                .ok_or_else(|| EnvError::rejected("no_policy", "policy cannot read the state"))?;
            let utterance = self.session.system_turn(action)?;
            turns.push(AgentTurn {
                action: utterance.act,
                system_text: utterance.text,
            });
            if utterance.expects_reply {
                break;
            }
            let obs = self.session.human_turn(None)?;
            reward += obs.reward;
            self.last = Some(obs);
        }
        Ok(AgentReply {
            turns,
            observation: self.last.clone().expect("started"),
            reward,
            awaiting_user: self.session.awaiting_user(),
        })
    }
}
