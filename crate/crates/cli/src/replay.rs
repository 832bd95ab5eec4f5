use std::collections::BTreeMap;
use std::io::{self, Write};

use anyhow::anyhow;
use clap::Args;
use simpleds_core::constraints::DemonstrationCorpus;
use simpleds_core::transcript::Transcript;

use crate::settings::{self, Classify, Common, Failure};

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    common: Common,
    /// Only this dialogue (0-based).
    #[arg(long)]
    dialogue: Option<usize>,
    /// Print the state vectors as well as the acts.
    #[arg(long)]
    states: bool,
}

pub fn run(args: ReplayArgs) -> Result<(), Failure> {
    let config = args.common.config(|_| {})?;
    let domain = settings::domain(&config)?;
    let corpus = domain
        .pack
        .demonstrations
        .as_ref()
        .ok_or_else(|| Failure::Data(anyhow!("the data pack has no demonstrations")))?;
    let picked: Vec<usize> = match args.dialogue {
        Some(i) if i < corpus.dialogues.len() => vec![i],
        Some(i) => {
            return Err(Failure::Data(anyhow!(
                "dialogue {i} does not exist; the pack has {}",
                corpus.dialogues.len()
            )))
        }
        None => (0..corpus.dialogues.len()).collect(),
    };

    match print(corpus, &picked, args.states) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e).runtime(),
        _ => Ok(()),
    }
}

fn print(corpus: &DemonstrationCorpus, picked: &[usize], states: bool) -> io::Result<()> {
    let mut out = io::stdout().lock();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut turns = 0;
    for &i in picked {
        let dialogue = &corpus.dialogues[i];
        writeln!(out, "# dialogue {i}: {} turns", dialogue.len())?;
        let mut transcript = Transcript::default();
        for turn in dialogue {
            *counts.entry(turn.action.to_string()).or_default() += 1;
            transcript.push(turn.state.clone(), Some(turn.action), "", "");
        }
        turns += dialogue.len();
        if states {
            write!(out, "{}", transcript.to_tsv())?;
        } else {
            for act in transcript.actions() {
                writeln!(out, "{act}")?;
            }
        }
    }
    writeln!(out, "{} dialogues, {turns} turns", picked.len())?;
    for (act, n) in counts {
        writeln!(out, "{n:>5}  {act}")?;
    }
    Ok(())
}
