//! Hand-written expert policy and the demonstration dialogues it produces.

use std::sync::Arc;

use crate::constraints::{DemoTurn, DemonstrationCorpus, NaiveBayesModel};
use crate::domain::act::{DialogueAct, Slot, SlotSet, CATALOG_SIZE};
use crate::env::context::DialogueContext;
use crate::env::{Domain, EnvConfig, Environment, Session};
use crate::simulator::NoiseConfig;

/// Greet, request what is missing, repair or confirm, then retrieve,
/// inform, offer more and close. Apologies are never repeated back to back,
/// so a dialogue without noise closes within eight turns.
pub fn expert_act(ctx: &DialogueContext, apology_threshold: f64) -> DialogueAct {
    if ctx.turns() == 0 {
        return DialogueAct::Greeting;
    }
    if ctx.declined_more() {
        return DialogueAct::Closing;
    }
    if ctx.info_provided() {
        return DialogueAct::AskForMore;
    }
    if ctx.lookup_done() {
        return if ctx.retrieved().is_some() {
            DialogueAct::ProvideKnown
        } else {
            DialogueAct::ProvideUnknown
        };
    }
    let filled = ctx.filled();
    let unfilled: SlotSet = Slot::ALL
        .into_iter()
        .filter(|s| !filled.contains(*s))
        .collect();
    if !unfilled.is_empty() {
        return DialogueAct::Request(unfilled);
    }
    let open: SlotSet = filled
        .iter()
        .filter(|s| !ctx.confirmed().contains(*s))
        .collect();
    let unsure: SlotSet = ctx
        .low_confidence(apology_threshold)
        .iter()
        .filter(|s| open.contains(*s))
        .collect();
    let repeated = matches!(ctx.last_act(), Some(DialogueAct::Apology(_)));
    if !unsure.is_empty() && !repeated {
        return DialogueAct::Apology(unsure);
    }
    if !open.is_empty() {
        return DialogueAct::ImpConfirm(open);
    }
    DialogueAct::RetrieveInfo
}

/// Rolls out the expert in `session` and records (state, action) pairs.
pub fn expert_dialogue(session: &mut Session) -> Vec<DemoTurn> {
    let threshold = session.config().apology_threshold;
    let mut obs = session.begin(None);
    let mut turns = Vec::new();
    while !obs.terminal {
        let act = expert_act(session.context(), threshold);
        turns.push(DemoTurn {
            state: obs.state.clone(),
            action: act,
        });
        obs = session
            .step(act.index())
            .expect("expert acts are legitimate");
    }
    turns
}

/// The shipped corpus: `clean` noise-free dialogues followed by `noisy` ones
/// at distortion threshold 0.3, generated with an uninformed action model.
pub fn generate_demonstrations(
    domain: &Domain,
    clean: usize,
    noisy: usize,
    seed: u64,
) -> DemonstrationCorpus {
    let uninformed = Domain::with_model(
        domain.pack.clone(),
        domain.vocab.clone(),
        NaiveBayesModel::uninformed(domain.vocab.len(), CATALOG_SIZE),
    );
    let shared = Arc::new(uninformed);
    let mut dialogues = Vec::new();
    for (count, noise) in [
        (
            clean,
            NoiseConfig {
                enabled: false,
                threshold: 0.5,
            },
        ),
        (
            noisy,
            NoiseConfig {
                enabled: true,
                threshold: 0.3,
            },
        ),
    ] {
        let config = EnvConfig {
            noise,
            ..EnvConfig::default()
        };
        let mut session = Session::new(
            shared.clone(),
            config,
            seed.wrapping_add(dialogues.len() as u64),
        );
        for _ in 0..count {
            dialogues.push(expert_dialogue(&mut session));
        }
    }
    DemonstrationCorpus { dialogues }
}

pub const SHIPPED_CLEAN: usize = 14;
pub const SHIPPED_NOISY: usize = 6;
pub const SHIPPED_SEED: u64 = 2016;
