//! Newline-delimited JSON messages between the environment and its clients.
//!
//! Transports (TCP lines, WebSocket text frames) feed each received line to
//! [`ProtocolSession::handle_line`] and send back the single reply.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::interactive::{AgentReply, AgentTurn, InteractiveAgent};
use super::session::Session;
use super::{Domain, EnvConfig, EnvError, Observation};
use crate::domain::act::{catalog_strings, DialogueAct};
use crate::policy::Policy;
use crate::simulator::UserGoal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulated,
    Interactive,
}

/// An action given by catalog string or by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActionRef {
    Index(u64),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Hello {
        id: u64,
        mode: Mode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Reset {
        id: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        goal: Option<UserGoal>,
    },
    Action {
        id: u64,
        action: ActionRef,
    },
    UserText {
        id: u64,
        text: String,
    },
    Bye {
        id: u64,
    },
}

impl ClientMessage {
    pub fn id(&self) -> u64 {
        match self {
            ClientMessage::Hello { id, .. }
            | ClientMessage::Reset { id, .. }
            | ClientMessage::Action { id, .. }
            | ClientMessage::UserText { id, .. }
            | ClientMessage::Bye { id } => *id,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("client messages serialise")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelloReply {
    pub id: u64,
    pub mode: Mode,
    pub lang: String,
    pub catalog: Vec<String>,
    pub vocabulary: Vec<String>,
    pub max_turns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationReply {
    pub id: u64,
    pub state: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    pub valid_actions: Vec<String>,
    pub system_text: String,
    pub user_text: String,
    #[serde(default)]
    pub task_success: bool,
    #[serde(default)]
    pub turn: usize,
    /// Acts the agent uttered in interactive mode since the last input.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub turns: Vec<AgentTurn>,
    #[serde(default)]
    pub awaiting_user: bool,
}

impl ObservationReply {
    pub fn from_observation(id: u64, obs: &Observation) -> Self {
        Self {
            id,
            state: obs.state.clone(),
            reward: obs.reward,
            terminal: obs.terminal,
            valid_actions: obs
                .valid_actions
                .iter()
                .map(|&i| DialogueAct::from_index(i).expect("valid index").to_string())
                .collect(),
            system_text: obs.system_text.clone(),
            user_text: obs.user_text.clone(),
            task_success: obs.task_success,
            turn: obs.turn,
            turns: Vec::new(),
            awaiting_user: false,
        }
    }

    /// Converts back to indices; unknown act strings are an error.
    pub fn to_observation(&self) -> Result<Observation, String> {
        let valid_actions = self
            .valid_actions
            .iter()
            .map(|s| {
                s.parse::<DialogueAct>()
                    .map(DialogueAct::index)
                    .map_err(|e| e.to_string())
            })
            .collect::<Result<_, _>>()?;
        Ok(Observation {
            state: self.state.clone(),
            reward: self.reward,
            terminal: self.terminal,
            valid_actions,
            system_text: self.system_text.clone(),
            user_text: self.user_text.clone(),
            task_success: self.task_success,
            turn: self.turn,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello(HelloReply),
    Observation(ObservationReply),
    Bye {
        id: u64,
    },
    Error {
        id: Option<u64>,
        reason: String,
        message: String,
    },
}

impl ServerMessage {
    pub fn id(&self) -> Option<u64> {
        match self {
            ServerMessage::Hello(h) => Some(h.id),
            ServerMessage::Observation(o) => Some(o.id),
            ServerMessage::Bye { id } => Some(*id),
            ServerMessage::Error { id, .. } => *id,
        }
    }

    pub fn error(id: Option<u64>, reason: &str, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            id,
            reason: reason.to_string(),
            message: message.into(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("server messages serialise")
    }
}

enum Phase {
    Fresh,
    Simulated(Box<Session>),
    Interactive(Box<InteractiveAgent>),
    Closed,
}

/// Per-connection protocol state machine.
pub struct ProtocolSession {
    domain: Arc<Domain>,
    config: EnvConfig,
    policy: Option<Arc<Policy>>,
    seed: u64,
    last_id: Option<u64>,
    phase: Phase,
}

impl ProtocolSession {
    /// `seed` is used unless the client's hello names one.
    pub fn new(
        domain: Arc<Domain>,
        config: EnvConfig,
        policy: Option<Arc<Policy>>,
        seed: u64,
    ) -> Self {
        Self {
            domain,
            config,
            policy,
            seed,
            last_id: None,
            phase: Phase::Fresh,
        }
    }

    pub fn is_closed(&self) -> bool {
        matches!(self.phase, Phase::Closed)
    }

    pub fn awaiting_user(&self) -> bool {
        matches!(&self.phase, Phase::Interactive(a) if a.awaiting_user())
    }

    pub fn mode(&self) -> Option<Mode> {
        match self.phase {
            Phase::Simulated(_) => Some(Mode::Simulated),
            Phase::Interactive(_) => Some(Mode::Interactive),
            _ => None,
        }
    }

    /// Aborts an episode whose user went silent. Returns the error to send.
    pub fn user_timed_out(&mut self) -> Option<ServerMessage> {
        match &mut self.phase {
            Phase::Interactive(agent) if agent.awaiting_user() => {
                agent.abort();
                Some(ServerMessage::error(
                    None,
                    "timeout",
                    "no user input in time; episode aborted",
                ))
            }
            _ => None,
        }
    }

    pub fn handle_line(&mut self, line: &str) -> ServerMessage {
        let value: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => return ServerMessage::error(None, "parse", e.to_string()),
        };
        let raw_id = value.get("id").and_then(Value::as_u64);
        let msg: ClientMessage = match serde_json::from_value(value) {
            Ok(m) => m,
            Err(e) => return ServerMessage::error(raw_id, "parse", e.to_string()),
        };
        let id = msg.id();
        if let Some(last) = self.last_id {
            if id <= last {
                return ServerMessage::error(
                    Some(id),
                    "id_order",
                    format!("id {id} does not follow {last}"),
                );
            }
        }
        self.last_id = Some(id);
        if self.is_closed() {
            return ServerMessage::error(Some(id), "closed", "session said bye");
        }
        self.dispatch(msg)
            .unwrap_or_else(|e| ServerMessage::error(Some(id), e.reason(), e.to_string()))
    }

    fn dispatch(&mut self, msg: ClientMessage) -> Result<ServerMessage, EnvError> {
        match msg {
            ClientMessage::Hello { id, mode, seed } => self.hello(id, mode, seed),
            ClientMessage::Bye { id } => {
                self.phase = Phase::Closed;
                Ok(ServerMessage::Bye { id })
            }
            ClientMessage::Reset { id, goal } => match &mut self.phase {
                Phase::Simulated(s) => Ok(observation(id, &s.begin(goal))),
                Phase::Interactive(a) => Ok(agent_observation(id, a.start(goal)?, "")),
                _ => Err(not_started()),
            },
            ClientMessage::Action { id, action } => match &mut self.phase {
                Phase::Simulated(s) => {
                    let index = resolve(&action)?;
                    Ok(observation(
                        id,
                        &super::Environment::step(s.as_mut(), index)?,
                    ))
                }
                Phase::Interactive(_) => Err(EnvError::rejected(
                    "mode",
                    "interactive sessions choose their own actions",
                )),
                _ => Err(not_started()),
            },
            ClientMessage::UserText { id, text } => match &mut self.phase {
                Phase::Interactive(a) => {
                    if !a.started() {
                        return Err(EnvError::rejected("not_started", "reset before talking"));
                    }
                    if a.terminal() {
                        return Err(EnvError::rejected(
                            "terminal",
                            "the episode has ended; reset first",
                        ));
                    }
                    Ok(agent_observation(id, a.user_says(&text)?, &text))
                }
                Phase::Simulated(_) => Err(EnvError::rejected(
                    "mode",
                    "simulated sessions take no user text",
                )),
                _ => Err(not_started()),
            },
        }
    }

    fn hello(&mut self, id: u64, mode: Mode, seed: Option<u64>) -> Result<ServerMessage, EnvError> {
        let session = Session::new(
            self.domain.clone(),
            self.config.clone(),
            seed.unwrap_or(self.seed),
        );
        self.phase = match mode {
            Mode::Simulated => Phase::Simulated(Box::new(session)),
            Mode::Interactive => {
                let Some(policy) = &self.policy else {
                    return Err(EnvError::rejected(
                        "no_policy",
                        "the server has no policy for interactive mode",
                    ));
                };
                Phase::Interactive(Box::new(InteractiveAgent::new(session, policy.clone())))
            }
        };
        Ok(ServerMessage::Hello(HelloReply {
            id,
            mode,
            lang: self.domain.pack.templates.lang().to_string(),
            catalog: catalog_strings(),
            vocabulary: self.domain.vocab.words().to_vec(),
            max_turns: self.config.max_turns,
        }))
    }
}

fn not_started() -> EnvError {
    EnvError::rejected("not_started", "send hello first")
}

fn resolve(action: &ActionRef) -> Result<usize, EnvError> {
    match action {
        ActionRef::Index(i) => Ok(*i as usize),
        ActionRef::Name(name) => name
            .parse::<DialogueAct>()
            .map(DialogueAct::index)
            .map_err(|e| EnvError::rejected("invalid_action", e.to_string())),
    }
}

fn observation(id: u64, obs: &Observation) -> ServerMessage {
    ServerMessage::Observation(ObservationReply::from_observation(id, obs))
}

fn agent_observation(id: u64, reply: AgentReply, user_text: &str) -> ServerMessage {
    let mut o = ObservationReply::from_observation(id, &reply.observation);
    o.reward = reply.reward;
    o.system_text = reply
        .turns
        .iter()
        .map(|t| t.system_text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    o.user_text = user_text.to_string();
    o.turns = reply.turns;
    o.awaiting_user = reply.awaiting_user;
    ServerMessage::Observation(o)
}
