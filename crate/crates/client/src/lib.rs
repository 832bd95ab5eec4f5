//! A blocking client for the environment server.
//!
//! [`RemoteEnvironment`] implements [`Environment`], so the learner and the
//! evaluation loop run unchanged against a server on another process or host.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use simpleds_core::env::protocol::{
    ActionRef, ClientMessage, HelloReply, Mode, ObservationReply, ServerMessage,
};
use simpleds_core::simulator::UserGoal;
use simpleds_core::{DialogueAct, EnvError, Environment, Observation};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("connection: {0}")]
    Io(#[from] io::Error),
    #[error("server closed the connection")]
    Closed,
    #[error("bad reply {line:?}: {message}")]
    Decode { line: String, message: String },
    #[error("reply id {got:?} does not echo request id {want}")]
    IdMismatch { want: u64, got: Option<u64> },
    #[error("{reason}: {message}")]
    Rejected { reason: String, message: String },
    #[error("expected {expected} reply, got {got}")]
    Unexpected { expected: &'static str, got: String },
}

impl From<ClientError> for EnvError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Rejected { reason, message } => EnvError::Rejected { reason, message },
            other => EnvError::Disconnected(other.to_string()),
        }
    }
}

/// One connection to the server's TCP port.
pub struct RemoteEnvironment {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    next_id: u64,
    hello: HelloReply,
}

impl RemoteEnvironment {
    /// Connects and opens a simulated session.
    pub fn connect(addr: impl ToSocketAddrs, seed: Option<u64>) -> Result<Self, ClientError> {
        Self::connect_mode(addr, Mode::Simulated, seed)
    }

    pub fn connect_mode(
        addr: impl ToSocketAddrs,
        mode: Mode,
        seed: Option<u64>,
    ) -> Result<Self, ClientError> {
        let writer = TcpStream::connect(addr)?;
        writer.set_nodelay(true)?;
        let reader = BufReader::new(writer.try_clone()?);
        let mut client = Self {
            reader,
            writer,
            next_id: 0,
            hello: HelloReply {
                id: 0,
                mode,
                lang: String::new(),
                catalog: Vec::new(),
                vocabulary: Vec::new(),
                max_turns: 0,
            },
        };
        match client.request(|id| ClientMessage::Hello { id, mode, seed })? {
            ServerMessage::Hello(h) => client.hello = h,
            other => return Err(unexpected("hello", &other)),
        }
        Ok(client)
    }

    /// What the server announced: catalog, vocabulary, turn limit.
    pub fn hello(&self) -> &HelloReply {
        &self.hello
    }

    pub fn set_read_timeout(&self, timeout: Option<Duration>) -> io::Result<()> {
        self.writer.set_read_timeout(timeout)
    }

    /// Sends one message with the next id; errors unless the reply echoes it.
    pub fn request(
        &mut self,
        build: impl FnOnce(u64) -> ClientMessage,
    ) -> Result<ServerMessage, ClientError> {
        let id = self.next_id;
        self.next_id += 1;
        let reply = self.send_line(&build(id).to_line())?;
        if reply.id() != Some(id) {
            if let ServerMessage::Error {
                reason,
                message,
                id: None,
            } = reply
            {
                return Err(ClientError::Rejected { reason, message });
            }
            return Err(ClientError::IdMismatch {
                want: id,
                got: reply.id(),
            });
        }
        match reply {
            ServerMessage::Error {
                reason, message, ..
            } => Err(ClientError::Rejected { reason, message }),
            other => Ok(other),
        }
    }

    /// Writes `line` verbatim and reads one reply, whatever it is.
    pub fn send_line(&mut self, line: &str) -> Result<ServerMessage, ClientError> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        self.read_message()
    }

    /// Reads one unsolicited message, such as a timeout notice.
    pub fn read_message(&mut self) -> Result<ServerMessage, ClientError> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(ClientError::Closed);
        }
        serde_json::from_str(line.trim_end()).map_err(|e| ClientError::Decode {
            line: line.trim_end().to_string(),
            message: e.to_string(),
        })
    }

    /// Lets later requests continue from a higher id.
    pub fn skip_ids(&mut self, next: u64) {
        self.next_id = self.next_id.max(next);
    }

    pub fn reset_reply(&mut self, goal: Option<UserGoal>) -> Result<ObservationReply, ClientError> {
        observation(self.request(|id| ClientMessage::Reset { id, goal })?)
    }

    pub fn act(&mut self, act: DialogueAct) -> Result<ObservationReply, ClientError> {
        let action = ActionRef::Name(act.to_string());
        observation(self.request(|id| ClientMessage::Action { id, action })?)
    }

    /// Interactive mode: what the person said.
    pub fn say(&mut self, text: &str) -> Result<ObservationReply, ClientError> {
        let text = text.to_string();
        observation(self.request(|id| ClientMessage::UserText { id, text })?)
    }

    pub fn bye(mut self) -> Result<(), ClientError> {
        match self.request(|id| ClientMessage::Bye { id })? {
            ServerMessage::Bye { .. } => Ok(()),
            other => Err(unexpected("bye", &other)),
        }
    }
}

fn observation(reply: ServerMessage) -> Result<ObservationReply, ClientError> {
    match reply {
        ServerMessage::Observation(o) => Ok(o),
        other => Err(unexpected("observation", &other)),
    }
}

fn unexpected(expected: &'static str, got: &ServerMessage) -> ClientError {
    ClientError::Unexpected {
        expected,
        got: got.to_line(),
    }
}

fn to_observation(reply: ObservationReply) -> Result<Observation, EnvError> {
    reply
        .to_observation()
        .map_err(|m| EnvError::Disconnected(format!("unknown act in reply: {m}")))
}

impl Environment for RemoteEnvironment {
    fn reset(&mut self, goal: Option<UserGoal>) -> Result<Observation, EnvError> {
        to_observation(self.reset_reply(goal)?)
    }

    fn step(&mut self, action: usize) -> Result<Observation, EnvError> {
        let action = ActionRef::Index(action as u64);
        let reply = observation(self.request(|id| ClientMessage::Action { id, action })?)?;
        to_observation(reply)
    }

    fn state_size(&self) -> usize {
        self.hello.vocabulary.len()
    }
}
