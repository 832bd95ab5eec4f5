//! `simpleds`: train, evaluate, serve, chat and replay.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or configuration error,
//! 3 runtime fault.

mod chat;
mod eval;
mod replay;
mod serve;
mod settings;
mod train;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "simpleds",
    version,
    about = "Deep Q-learning dialogue policies from raw words"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a policy and write it with its learning curve.
    Train(train::TrainArgs),
    /// Roll out a policy greedily and report reward, success and length.
    Eval(eval::EvalArgs),
    /// Run the environment server.
    Serve(serve::ServeArgs),
    /// Talk to a trained policy in the terminal.
    Chat(chat::ChatArgs),
    /// Print the demonstration dialogues of the data pack.
    Replay(replay::ReplayArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .with_target(false)
        .init();

    let result = match cli.command {
        Command::Train(args) => train::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Serve(args) => serve::run(args),
        Command::Chat(args) => chat::run(args),
        Command::Replay(args) => replay::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error());
            ExitCode::from(failure.code())
        }
    }
}
