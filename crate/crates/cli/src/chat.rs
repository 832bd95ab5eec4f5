use std::io::{BufRead, IsTerminal, Write};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::Args;
use simpleds_client::RemoteEnvironment;
use simpleds_core::env::interactive::{AgentTurn, InteractiveAgent};
use simpleds_core::env::protocol::Mode;
use simpleds_core::Session;

use crate::settings::{self, Classify, Common, Failure};

#[derive(Debug, Args)]
pub struct ChatArgs {
    #[command(flatten)]
    common: Common,
    /// Policy file written by `train`; not needed with --server.
    #[arg(long, value_name = "PATH", required_unless_present = "server")]
    policy: Option<PathBuf>,
    /// Chat through a running server's interactive mode.
    #[arg(long, value_name = "HOST:PORT", conflicts_with = "policy")]
    server: Option<String>,
    /// Show the act behind each system turn.
    #[arg(long)]
    acts: bool,
}

/// Where the agent runs: in this process or behind a server.
enum Agent {
    Local(Box<InteractiveAgent>),
    Remote(Box<RemoteEnvironment>),
}

struct Reply {
    turns: Vec<AgentTurn>,
    terminal: bool,
    success: bool,
}

impl Agent {
    fn start(&mut self) -> Result<Reply, Failure> {
        match self {
            Agent::Local(a) => {
                let r = a.start(None).runtime()?;
                Ok(Reply {
                    turns: r.turns,
                    terminal: r.observation.terminal,
                    success: r.observation.task_success,
                })
            }
            Agent::Remote(c) => {
                let o = c.reset_reply(None).runtime()?;
                Ok(Reply {
                    turns: o.turns,
                    terminal: o.terminal,
                    success: o.task_success,
                })
            }
        }
    }

    fn say(&mut self, text: &str) -> Result<Reply, Failure> {
        match self {
            Agent::Local(a) => {
                let r = a.user_says(text).runtime()?;
                Ok(Reply {
                    turns: r.turns,
                    terminal: r.observation.terminal,
                    success: r.observation.task_success,
                })
            }
            Agent::Remote(c) => {
                let o = c.say(text).runtime()?;
                Ok(Reply {
                    turns: o.turns,
                    terminal: o.terminal,
                    success: o.task_success,
                })
            }
        }
    }
}

pub fn run(args: ChatArgs) -> Result<(), Failure> {
    let config = args.common.config(|_| {})?;
    let mut agent = match (&args.server, &args.policy) {
        (Some(addr), _) => Agent::Remote(Box::new(
            RemoteEnvironment::connect_mode(addr.as_str(), Mode::Interactive, Some(config.seed))
                .with_context(|| format!("connecting to {addr}"))
                .runtime()?,
        )),
        (None, Some(path)) => {
            let domain = settings::domain(&config)?;
            let policy = settings::policy(path, &domain)?;
            let session = Session::new(domain, config.env_config(), config.seed);
            Agent::Local(Box::new(InteractiveAgent::new(session, Arc::new(policy))))
        }
        (None, None) => return Err(Failure::Data(anyhow!("a policy or a server is needed"))),
    };

    let stdin = std::io::stdin();
    let prompt = stdin.is_terminal();
    let mut lines = stdin.lock().lines();
    let mut out = std::io::stdout();
    let mut reply = agent.start()?;
    loop {
        for t in &reply.turns {
            if args.acts {
                writeln!(out, "system: {}  [{}]", t.system_text, t.action).runtime()?;
            } else {
                writeln!(out, "system: {}", t.system_text).runtime()?;
            }
        }
        if reply.terminal {
            writeln!(
                out,
                "-- dialogue over (task {})",
                if reply.success {
                    "completed"
                } else {
                    "not completed"
                }
            )
            .runtime()?;
            return Ok(());
        }
        if prompt {
            write!(out, "you: ").runtime()?;
            out.flush().runtime()?;
        }
        let Some(line) = lines.next() else {
            return Ok(());
        };
        let line = line.runtime()?;
        reply = agent.say(line.trim())?;
    }
}
