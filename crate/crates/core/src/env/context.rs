//! Dialogue bookkeeping behind the observable word features.

use serde::Serialize;

use crate::data::{Restaurant, RestaurantDb, SlotLexicon};
use crate::domain::act::{DialogueAct, Slot, SlotSet};
use crate::domain::templates::PlaceholderValues;
use crate::domain::text::ScoredUtterance;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotFill {
    pub value: String,
    /// Mean word confidence of the evidence the value came from.
    pub confidence: f64,
}

/// Words that count as yes/no answers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnswerWords {
    pub affirm: Vec<String>,
    pub negate: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DialogueContext {
    filled: [Option<SlotFill>; 3],
    confirmed: SlotSet,
    turns: usize,
    last_act: Option<DialogueAct>,
    last_system: Vec<String>,
    last_user: ScoredUtterance,
    /// `None` until a lookup ran; then the restaurant found, if any.
    lookup: Option<Option<Restaurant>>,
    info_provided: bool,
    declined_more: bool,
    closed: bool,
    terminal: bool,
}

impl DialogueContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fill(&self, slot: Slot) -> Option<&SlotFill> {
        self.filled[slot.index()].as_ref()
    }

    pub fn filled(&self) -> SlotSet {
        Slot::ALL
            .into_iter()
            .filter(|s| self.filled[s.index()].is_some())
            .collect()
    }

    pub fn confirmed(&self) -> SlotSet {
        self.confirmed
    }

    /// Filled slots whose evidence confidence is below `threshold`.
    pub fn low_confidence(&self, threshold: f64) -> SlotSet {
        Slot::ALL
            .into_iter()
            .filter(|s| self.fill(*s).is_some_and(|f| f.confidence < threshold))
            .collect()
    }

    pub fn turns(&self) -> usize {
        self.turns
    }

    pub fn last_act(&self) -> Option<DialogueAct> {
        self.last_act
    }

    pub fn last_system(&self) -> &[String] {
        &self.last_system
    }

    pub fn last_user(&self) -> &ScoredUtterance {
        &self.last_user
    }

    pub fn lookup_done(&self) -> bool {
        self.lookup.is_some()
    }

    pub fn retrieved(&self) -> Option<&Restaurant> {
        self.lookup.as_ref().and_then(Option::as_ref)
    }

    pub fn info_provided(&self) -> bool {
        self.info_provided
    }

    pub fn declined_more(&self) -> bool {
        self.declined_more
    }

    pub fn closed(&self) -> bool {
        self.closed
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    /// All slots confirmed, information given and the dialogue closed.
    pub fn task_completed(&self) -> bool {
        self.confirmed == SlotSet::FULL && self.info_provided && self.closed
    }

    pub fn placeholders(&self) -> PlaceholderValues {
        let value = |s: Slot| self.fill(s).map(|f| f.value.clone());
        PlaceholderValues {
            food: value(Slot::Food),
            price: value(Slot::Price),
            area: value(Slot::Area),
            name: self.retrieved().map(|r| r.name.clone()),
            location: self.retrieved().map(|r| r.location.clone()),
        }
    }

    /// Current slot values, indexed by slot.
    pub fn values(&self) -> [Option<String>; 3] {
        Slot::ALL.map(|s| self.fill(s).map(|f| f.value.clone()))
    }

    /// System-side effects of uttering `act`; bumps the turn counter.
    pub fn apply_system(&mut self, act: DialogueAct, words: Vec<String>, db: &RestaurantDb) {
        self.turns += 1;
        self.last_act = Some(act);
        self.last_system = words;
        match act {
            // Without a value for every slot there is nothing to look up.
            DialogueAct::RetrieveInfo => {
                if let [Some(f), Some(p), Some(a)] = self.values() {
                    self.lookup = Some(db.lookup(&f, &p, &a).cloned());
                }
            }
            DialogueAct::ProvideKnown => {
                if self.retrieved().is_some() {
                    self.info_provided = true;
                }
            }
            DialogueAct::ProvideUnknown => {
                if self.lookup == Some(None) {
                    self.info_provided = true;
                }
            }
            DialogueAct::Closing => {
                self.closed = true;
                self.terminal = true;
            }
            _ => {}
        }
    }

    /// Folds the user's (noisy) answer to `act` into the context.
    pub fn apply_user(
        &mut self,
        act: DialogueAct,
        user: ScoredUtterance,
        lexicon: &SlotLexicon,
        answers: &AnswerWords,
    ) {
        let has = |list: &[String]| user.words().iter().any(|w| list.contains(w));
        let affirmed = has(&answers.affirm);
        let negated = has(&answers.negate);

        // Strongest evidence per slot.
        let mut best: [Option<(String, f64)>; 3] = Default::default();
        for m in lexicon.scan(user.iter()) {
            let entry = &mut best[m.slot.index()];
            if entry.as_ref().is_none_or(|(_, c)| m.confidence > *c) {
                *entry = Some((m.value, m.confidence));
            }
        }
        let mentioned: SlotSet = Slot::ALL
            .into_iter()
            .filter(|s| best[s.index()].is_some())
            .collect();

        if act == DialogueAct::AskForMore && self.info_provided {
            if !mentioned.is_empty() {
                self.start_new_task();
            } else if negated {
                self.declined_more = true;
            }
        }

        let mut changed = SlotSet::EMPTY;
        for slot in Slot::ALL {
            let Some((value, confidence)) = best[slot.index()].take() else {
                continue;
            };
            match &mut self.filled[slot.index()] {
                Some(f) if f.value == value => f.confidence = f.confidence.max(confidence),
                other => {
                    *other = Some(SlotFill { value, confidence });
                    self.confirmed.remove(slot);
                    changed.insert(slot);
                }
            }
        }

        let confirmable = |slots: SlotSet| -> SlotSet {
            slots
                .iter()
                .filter(|s| self.filled[s.index()].is_some() && !changed.contains(*s))
                .collect()
        };
        let newly = match act {
            DialogueAct::ExpConfirm(slots) if affirmed && !negated => confirmable(slots),
            DialogueAct::ImpConfirm(slots) if !negated => confirmable(slots),
            // A "no" with a correction leaves the uncorrected slots accepted.
            DialogueAct::ExpConfirm(slots) | DialogueAct::ImpConfirm(slots)
                if negated && !changed.is_empty() =>
            {
                confirmable(slots)
            }
            _ => SlotSet::EMPTY,
        };
        for s in newly.iter() {
            self.confirmed.insert(s);
        }
        self.last_user = user;
    }

    fn start_new_task(&mut self) {
        self.filled = Default::default();
        self.confirmed = SlotSet::EMPTY;
        self.lookup = None;
        self.info_provided = false;
        self.declined_more = false;
    }

    pub fn mark_terminal(&mut self) {
        self.terminal = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataPack;
    use crate::domain::text::tokenize;

    fn answers() -> AnswerWords {
        AnswerWords {
            affirm: vec!["yes".into()],
            negate: vec!["no".into()],
        }
    }

    fn say(text: &str) -> ScoredUtterance {
        ScoredUtterance::uniform(tokenize(text), 0.9)
    }

    #[test]
    fn request_fills_and_implicit_confirm_confirms() {
        let pack = DataPack::english();
        let lex = SlotLexicon::from_db(&pack.db);
        let mut ctx = DialogueContext::new();
        let req = DialogueAct::Request(SlotSet::FULL);
        ctx.apply_system(req, vec![], &pack.db);
        ctx.apply_user(
            req,
            say("reasonably priced mexican food in the east of town"),
            &lex,
            &answers(),
        );
        assert_eq!(ctx.filled(), SlotSet::FULL);
        assert!(ctx.confirmed().is_empty());
        let imp = DialogueAct::ImpConfirm(SlotSet::FULL);
        ctx.apply_system(imp, vec![], &pack.db);
        ctx.apply_user(imp, ScoredUtterance::empty(), &lex, &answers());
        assert_eq!(ctx.confirmed(), SlotSet::FULL);
        ctx.apply_system(DialogueAct::RetrieveInfo, vec![], &pack.db);
        assert_eq!(ctx.retrieved().unwrap().name, "pancho");
    }

    #[test]
    fn correction_replaces_value_and_keeps_others_confirmed() {
        let pack = DataPack::english();
        let lex = SlotLexicon::from_db(&pack.db);
        let mut ctx = DialogueContext::new();
        let req = DialogueAct::Request(SlotSet::FULL);
        ctx.apply_user(req, say("cheap italian food in the east"), &lex, &answers());
        let exp = DialogueAct::ExpConfirm(SlotSet::FULL);
        ctx.apply_user(exp, say("no mexican food"), &lex, &answers());
        assert_eq!(ctx.fill(Slot::Food).unwrap().value, "mexican");
        assert_eq!(
            ctx.confirmed(),
            [Slot::Price, Slot::Area].into_iter().collect()
        );
        ctx.apply_user(
            DialogueAct::ExpConfirm(SlotSet::single(Slot::Food)),
            say("yes"),
            &lex,
            &answers(),
        );
        assert_eq!(ctx.confirmed(), SlotSet::FULL);
    }

    #[test]
    fn bare_no_confirms_nothing() {
        let pack = DataPack::english();
        let lex = SlotLexicon::from_db(&pack.db);
        let mut ctx = DialogueContext::new();
        ctx.apply_user(
            DialogueAct::Request(SlotSet::FULL),
            say("cheap italian food in the east"),
            &lex,
            &answers(),
        );
        ctx.apply_user(
            DialogueAct::ExpConfirm(SlotSet::FULL),
            say("no"),
            &lex,
            &answers(),
        );
        assert!(ctx.confirmed().is_empty());
    }

    #[test]
    fn decline_after_information() {
        let pack = DataPack::english();
        let lex = SlotLexicon::from_db(&pack.db);
        let mut ctx = DialogueContext::new();
        ctx.apply_user(DialogueAct::AskForMore, say("no"), &lex, &answers());
        assert!(!ctx.declined_more(), "nothing was provided yet");
        ctx.info_provided = true;
        ctx.apply_user(DialogueAct::AskForMore, say("no"), &lex, &answers());
        assert!(ctx.declined_more());
    }
}
