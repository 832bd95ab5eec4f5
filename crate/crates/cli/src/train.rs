use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use simpleds_client::RemoteEnvironment;
use simpleds_core::dqn::training::{CurvePoint, Trainer};
use simpleds_core::{Environment, Policy, Session};

use crate::settings::{self, Classify, Common, Failure};

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Learning-step budget (environment turns).
    #[arg(long)]
    steps: Option<u64>,
    /// Episode budget.
    #[arg(long)]
    episodes: Option<u64>,
    /// Where to write the policy.
    #[arg(long, value_name = "PATH")]
    policy: Option<PathBuf>,
    /// Where to write the learning curve (CSV).
    #[arg(long, value_name = "PATH")]
    curve: Option<PathBuf>,
    /// Train against a running server instead of an in-process environment.
    #[arg(long, value_name = "HOST:PORT")]
    server: Option<String>,
}

pub fn run(args: TrainArgs) -> Result<(), Failure> {
    let config = args.common.config(|c| {
        if let Some(steps) = args.steps {
            c.learning.total_learning_steps = steps;
        }
        if let Some(episodes) = args.episodes {
            c.learning.max_episodes = episodes;
        }
        if let Some(p) = &args.policy {
            c.output.policy = p.clone();
        }
        if let Some(p) = &args.curve {
            c.output.curve = p.clone();
        }
    })?;

    let (mut env, vocabulary): (Box<dyn Environment>, Vec<String>) = match &args.server {
        Some(addr) => {
            let remote = RemoteEnvironment::connect(addr.as_str(), Some(config.seed))
                .with_context(|| format!("connecting to {addr}"))
                .runtime()?;
            let words = remote.hello().vocabulary.clone();
            (Box::new(remote), words)
        }
        None => {
            let domain = settings::domain(&config)?;
            let words = domain.vocab.words().to_vec();
            (
                Box::new(Session::new(domain, config.env_config(), config.seed)),
                words,
            )
        }
    };

    let trainer = Trainer::new(config.learning.clone(), env.state_size(), config.seed).runtime()?;
    let report_every = 100;
    let outcome = trainer
        .run(env.as_mut(), |p: &CurvePoint| {
            if (p.episode + 1).is_multiple_of(report_every) {
                tracing::info!(
                    episode = p.episode + 1,
                    reward = p.total_reward,
                    epsilon = p.epsilon,
                    "training"
                );
            }
        })
        .runtime()?;

    let policy = Policy {
        net: outcome.net,
        vocabulary,
    };
    policy.save(&config.output.policy).runtime()?;
    outcome
        .curve
        .write(&config.output.curve)
        .with_context(|| format!("writing {}", config.output.curve.display()))
        .runtime()?;

    println!("steps:            {}", outcome.steps);
    println!("episodes:         {}", outcome.episodes);
    match outcome.curve.tail_mean(100) {
        Some(mean) => println!("final 100-episode mean reward: {mean:.4}"),
        None => println!("final 100-episode mean reward: n/a"),
    }
    println!("policy:           {}", config.output.policy.display());
    println!("curve:            {}", config.output.curve.display());
    Ok(())
}
