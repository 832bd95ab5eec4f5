//! Per-state action constraints: a Bernoulli Naive Bayes model of `Pr(a|s)`
//! trained on demonstration dialogues, joined with legitimacy heuristics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::domain::act::{DialogueAct, SlotSet, CATALOG, CATALOG_SIZE};
use crate::env::context::DialogueContext;

/// Actions whose posterior exceeds this are considered data-like.
pub const DEFAULT_PROBABLE_THRESHOLD: f64 = 0.01;

/// Filled slots below this confidence may be apologised for.
pub const DEFAULT_APOLOGY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoTurn {
    pub state: Vec<f64>,
    pub action: DialogueAct,
}

pub type Demonstration = Vec<DemoTurn>;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DemonstrationCorpus {
    pub dialogues: Vec<Demonstration>,
}

impl DemonstrationCorpus {
    pub fn parse(source: &str, text: &str) -> Result<Self, DataError> {
        serde_json::from_str(text).map_err(|e| DataError::at(source, e.line(), e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("corpus serialises")
    }

    pub fn turns(&self) -> impl Iterator<Item = &DemoTurn> {
        self.dialogues.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.turns().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("demonstration corpus is empty")]
    EmptyCorpus,
    #[error("demonstration state has {got} features, expected {expected}")]
    StateSize { expected: usize, got: usize },
}

/// Bernoulli Naive Bayes over binarised state features with add-one smoothing.
///
/// Only counts are stored; log parameters are derived from them, so a
/// serialised model reproduces its posteriors exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ModelCounts", into = "ModelCounts")]
pub struct NaiveBayesModel {
    counts: ModelCounts,
    log_prior: Vec<f64>,
    log_on: Vec<Vec<f64>>,
    log_off: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelCounts {
    n_features: usize,
    /// Features strictly above this value count as present.
    binarize_above: f64,
    action_counts: Vec<u64>,
    /// `feature_counts[a][f]`: examples of action `a` with feature `f` present.
    feature_counts: Vec<Vec<u64>>,
}

impl From<ModelCounts> for NaiveBayesModel {
    fn from(counts: ModelCounts) -> Self {
        let n_actions = counts.action_counts.len();
        let total: u64 = counts.action_counts.iter().sum();
        let log_prior = counts
            .action_counts
            .iter()
            .map(|&c| ((c + 1) as f64 / (total + n_actions as u64) as f64).ln())
            .collect();
        let mut log_on = Vec::with_capacity(n_actions);
        let mut log_off = Vec::with_capacity(n_actions);
        for (a, &c) in counts.action_counts.iter().enumerate() {
            let theta: Vec<f64> = counts.feature_counts[a]
                .iter()
                .map(|&n| (n + 1) as f64 / (c + 2) as f64)
                .collect();
            log_on.push(theta.iter().map(|t| t.ln()).collect());
            log_off.push(theta.iter().map(|t| (1.0 - t).ln()).collect());
        }
        Self {
            counts,
            log_prior,
            log_on,
            log_off,
        }
    }
}

impl From<NaiveBayesModel> for ModelCounts {
    fn from(m: NaiveBayesModel) -> Self {
        m.counts
    }
}

impl NaiveBayesModel {
    /// A model that has seen nothing: every posterior is `1 / n_actions`.
    pub fn uninformed(n_features: usize, n_actions: usize) -> Self {
        ModelCounts {
            n_features,
            binarize_above: 0.0,
            action_counts: vec![0; n_actions],
            feature_counts: vec![vec![0; n_features]; n_actions],
        }
        .into()
    }

    /// Fits the model over the full catalog with binarisation at 0.
    pub fn train(corpus: &DemonstrationCorpus, n_features: usize) -> Result<Self, ModelError> {
        Self::train_with(corpus, n_features, CATALOG_SIZE, 0.0)
    }

    pub fn train_with(
        corpus: &DemonstrationCorpus,
        n_features: usize,
        n_actions: usize,
        binarize_above: f64,
    ) -> Result<Self, ModelError> {
        if corpus.is_empty() {
            return Err(ModelError::EmptyCorpus);
        }
        let mut action_counts = vec![0u64; n_actions];
        let mut feature_counts = vec![vec![0u64; n_features]; n_actions];
        for turn in corpus.turns() {
            if turn.state.len() != n_features {
                return Err(ModelError::StateSize {
                    expected: n_features,
                    got: turn.state.len(),
                });
            }
            let a = turn.action.index();
            action_counts[a] += 1;
            for (f, &v) in turn.state.iter().enumerate() {
                if v > binarize_above {
                    feature_counts[a][f] += 1;
                }
            }
        }
        Ok(ModelCounts {
            n_features,
            binarize_above,
            action_counts,
            feature_counts,
        }
        .into())
    }

    pub fn n_features(&self) -> usize {
        self.counts.n_features
    }

    pub fn n_actions(&self) -> usize {
        self.counts.action_counts.len()
    }

    pub fn action_counts(&self) -> &[u64] {
        &self.counts.action_counts
    }

    /// Unnormalised `ln Pr(a) + sum_f ln Pr(x_f | a)` for every action.
    pub fn log_joint(&self, state: &[f64]) -> Vec<f64> {
        assert_eq!(state.len(), self.n_features(), "state size");
        (0..self.n_actions())
            .map(|a| {
                let on = &self.log_on[a];
                let off = &self.log_off[a];
                self.log_prior[a]
                    + state
                        .iter()
                        .enumerate()
                        .map(|(f, &v)| {
                            if v > self.counts.binarize_above {
                                on[f]
                            } else {
                                off[f]
                            }
                        })
                        .sum::<f64>()
            })
            .collect()
    }

    /// Normalised `Pr(a|s)`, computed in log space. Entries are kept strictly
    /// inside (0, 1) even when the evidence is overwhelming.
    pub fn posterior(&self, state: &[f64]) -> Vec<f64> {
        let joint = self.log_joint(state);
        let max = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let norm: f64 = joint.iter().map(|l| (l - max).exp()).sum();
        let lo = f64::MIN_POSITIVE;
        let hi = 1.0 - f64::EPSILON / 2.0;
        joint
            .iter()
            .map(|l| ((l - max).exp() / norm).clamp(lo, hi))
            .collect()
    }
}

/// Actions that the dialogue situation makes sensible, independent of data.
pub fn legitimate_actions(ctx: &DialogueContext, apology_threshold: f64) -> Vec<usize> {
    let filled = ctx.filled();
    let confirmed = ctx.confirmed();
    let unfilled: SlotSet = crate::domain::act::Slot::ALL
        .into_iter()
        .filter(|s| !filled.contains(*s))
        .collect();
    let open = filled
        .iter()
        .filter(|s| !confirmed.contains(*s))
        .collect::<SlotSet>();
    let apologisable = ctx
        .low_confidence(apology_threshold)
        .iter()
        .filter(|s| open.contains(*s))
        .collect::<SlotSet>();
    CATALOG
        .iter()
        .filter(|act| match **act {
            DialogueAct::Greeting => ctx.turns() == 0,
            DialogueAct::RequestHmihy => unfilled == SlotSet::FULL,
            DialogueAct::Request(x) => x.is_subset(unfilled),
            DialogueAct::Apology(x) => x.is_subset(apologisable),
            DialogueAct::ExpConfirm(x) | DialogueAct::ImpConfirm(x) => x.is_subset(open),
            DialogueAct::RetrieveInfo => confirmed == SlotSet::FULL && !ctx.lookup_done(),
            DialogueAct::ProvideKnown => ctx.retrieved().is_some() && !ctx.info_provided(),
            DialogueAct::ProvideUnknown => {
                ctx.lookup_done() && ctx.retrieved().is_none() && !ctx.info_provided()
            }
            DialogueAct::AskForMore => ctx.info_provided() && !ctx.declined_more(),
            DialogueAct::Closing => ctx.declined_more(),
        })
        .map(|a| a.index())
        .collect()
}

/// Whether the context holds what `act` needs to be carried out: slot values
/// for its placeholders, a full query for a lookup, a lookup result to report.
/// A greeting only opens a dialogue. Every legitimate act is executable.
pub fn executable(act: DialogueAct, ctx: &DialogueContext) -> bool {
    let filled = ctx.filled();
    match act {
        DialogueAct::Greeting => ctx.turns() == 0,
        DialogueAct::Apology(x) | DialogueAct::ExpConfirm(x) | DialogueAct::ImpConfirm(x) => {
            x.is_subset(filled)
        }
        DialogueAct::RetrieveInfo => filled == SlotSet::FULL,
        DialogueAct::ProvideKnown => ctx.retrieved().is_some(),
        DialogueAct::ProvideUnknown => ctx.lookup_done() && ctx.retrieved().is_none(),
        _ => true,
    }
}

/// Indices whose posterior strictly exceeds `threshold`.
pub fn probable_actions(posterior: &[f64], threshold: f64) -> Vec<usize> {
    posterior
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > threshold)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstrainedSet {
    /// Sorted action indices; never empty.
    pub actions: Vec<usize>,
    /// Set when neither data nor heuristics proposed anything and the full
    /// catalog was used instead.
    pub anomaly: bool,
}

/// Probable actions united with legitimate ones.
pub fn constrained_set(
    model: &NaiveBayesModel,
    state: &[f64],
    ctx: &DialogueContext,
    probable_threshold: f64,
    apology_threshold: f64,
) -> ConstrainedSet {
    let mut actions = probable_actions(&model.posterior(state), probable_threshold);
    actions.extend(legitimate_actions(ctx, apology_threshold));
    actions.sort_unstable();
    actions.dedup();
    if actions.is_empty() {
        return ConstrainedSet {
            actions: (0..CATALOG_SIZE).collect(),
            anomaly: true,
        };
    }
    ConstrainedSet {
        actions,
        anomaly: false,
    }
}

impl ConstrainedSet {
    /// Drops acts the context cannot carry out, unless that would leave nothing.
    pub fn executable_only(mut self, ctx: &DialogueContext) -> Self {
        let kept: Vec<usize> = self
            .actions
            .iter()
            .copied()
            .filter(|&a| DialogueAct::from_index(a).is_some_and(|act| executable(act, ctx)))
            .collect();
        if !kept.is_empty() {
            self.actions = kept;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::act::Slot;

    fn corpus(turns: Vec<(Vec<f64>, DialogueAct)>) -> DemonstrationCorpus {
        DemonstrationCorpus {
            dialogues: vec![turns
                .into_iter()
                .map(|(state, action)| DemoTurn { state, action })
                .collect()],
        }
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert_eq!(
            NaiveBayesModel::train(&DemonstrationCorpus::default(), 3),
            Err(ModelError::EmptyCorpus)
        );
    }

    #[test]
    fn single_observation_dominates() {
        let s0 = vec![0.0, 1.0, 0.0];
        let model =
            NaiveBayesModel::train(&corpus(vec![(s0.clone(), DialogueAct::Greeting)]), 3).unwrap();
        let p = model.posterior(&s0);
        let best = p.iter().copied().fold(0.0, f64::max);
        assert_eq!(p[0], best);
        assert_eq!(p.iter().filter(|&&v| v == best).count(), 1);
    }

    #[test]
    fn symmetric_observations_tie() {
        let s = vec![1.0, 0.0];
        let model = NaiveBayesModel::train(
            &corpus(vec![
                (s.clone(), DialogueAct::RetrieveInfo),
                (s.clone(), DialogueAct::AskForMore),
            ]),
            2,
        )
        .unwrap();
        let p = model.posterior(&s);
        assert_eq!(
            p[DialogueAct::RetrieveInfo.index()],
            p[DialogueAct::AskForMore.index()]
        );
    }

    #[test]
    fn uninformed_model_is_uniform() {
        let model = NaiveBayesModel::uninformed(5, CATALOG_SIZE);
        for p in model.posterior(&[0.0, 1.0, 0.2, 0.0, 1.0]) {
            assert!((p - 1.0 / 35.0).abs() < 1e-15);
        }
    }

    #[test]
    fn model_round_trips_through_json() {
        let s = vec![1.0, 0.0, 0.4];
        let model =
            NaiveBayesModel::train(&corpus(vec![(s.clone(), DialogueAct::Closing)]), 3).unwrap();
        let text = serde_json::to_string(&model).unwrap();
        let back: NaiveBayesModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back.posterior(&s), model.posterior(&s));
    }

    #[test]
    fn fresh_context_allows_greeting_and_requests() {
        let ctx = DialogueContext::new();
        let legit = legitimate_actions(&ctx, 0.5);
        let expected: Vec<usize> = (0..=8).collect();
        assert_eq!(legit, expected);
    }

    #[test]
    fn uniform_posterior_gives_full_catalog() {
        let model = NaiveBayesModel::uninformed(2, CATALOG_SIZE);
        let ctx = DialogueContext::new();
        let set = constrained_set(&model, &[0.0, 0.0], &ctx, 0.01, 0.5);
        assert_eq!(set.actions.len(), CATALOG_SIZE);
        assert!(!set.anomaly);
        let executable_now: Vec<usize> = CATALOG
            .iter()
            .filter(|a| executable(**a, &ctx))
            .map(|a| a.index())
            .collect();
        assert_eq!(set.executable_only(&ctx).actions, executable_now);
        let set = constrained_set(&model, &[0.0, 0.0], &ctx, 0.05, 0.5);
        assert_eq!(set.actions.len(), 9);
    }

    #[test]
    fn acts_needing_missing_values_are_not_executable() {
        let ctx = DialogueContext::new();
        assert!(executable(DialogueAct::Greeting, &ctx));
        assert!(executable(DialogueAct::Request(SlotSet::FULL), &ctx));
        assert!(executable(DialogueAct::AskForMore, &ctx));
        for act in [
            DialogueAct::ImpConfirm(SlotSet::single(Slot::Food)),
            DialogueAct::ExpConfirm(SlotSet::single(Slot::Area)),
            DialogueAct::Apology(SlotSet::single(Slot::Price)),
            DialogueAct::RetrieveInfo,
            DialogueAct::ProvideKnown,
            DialogueAct::ProvideUnknown,
        ] {
            assert!(!executable(act, &ctx), "{act}");
        }
    }
}
