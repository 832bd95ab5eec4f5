use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use simpleds_core::eval::{run_episode, Controller, EpisodeResult, EvalReport, Expert};
use simpleds_core::transcript::Transcript;
use simpleds_core::Session;

use crate::settings::{self, Classify, Common, Failure};

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Policy file written by `train`.
    #[arg(
        long,
        value_name = "PATH",
        required_unless_present = "expert",
        conflicts_with = "expert"
    )]
    policy: Option<PathBuf>,
    /// Evaluate the scripted expert instead of a policy.
    #[arg(long)]
    expert: bool,
    /// Number of episodes.
    #[arg(long, default_value_t = 500)]
    episodes: usize,
    /// Write every episode as a tab-separated transcript.
    #[arg(long, value_name = "PATH")]
    transcript: Option<PathBuf>,
}

pub fn run(args: EvalArgs) -> Result<(), Failure> {
    let config = args.common.config(|c| {
        if let Some(t) = &args.transcript {
            c.output.transcript = Some(t.clone());
        }
    })?;
    let domain = settings::domain(&config)?;
    let mut controller: Box<dyn Controller> = match &args.policy {
        Some(path) => Box::new(settings::policy(path, &domain)?),
        None => Box::new(Expert {
            apology_threshold: config.dialogue.apology_threshold,
        }),
    };

    let mut session = Session::new(domain, config.env_config(), config.seed);
    let mut log = String::new();
    let mut results: Vec<EpisodeResult> = Vec::with_capacity(args.episodes);
    for i in 0..args.episodes {
        let mut transcript = Transcript::default();
        let keep = config.output.transcript.is_some();
        let result = run_episode(
            &mut session,
            controller.as_mut(),
            keep.then_some(&mut transcript),
        )
        .runtime()?;
        if keep {
            log.push_str(&format!(
                "# episode {i} reward {:.4} success {}\n",
                result.total_reward, result.success
            ));
            log.push_str(&transcript.to_tsv());
            log.push('\n');
        }
        results.push(result);
    }
    if let Some(path) = &config.output.transcript {
        std::fs::write(path, log)
            .with_context(|| format!("writing {}", path.display()))
            .runtime()?;
    }
    println!("{}", EvalReport::from_results(&results));
    Ok(())
}
