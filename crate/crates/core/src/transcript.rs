//! Plain-text dialogue logs: state, act, verbalisation and bracketed user text.

use std::fmt::Write as _;

use crate::domain::act::DialogueAct;

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptRow {
    /// State the act was chosen in.
    pub state: Vec<f64>,
    /// `None` for the closing row that only shows the final state.
    pub action: Option<DialogueAct>,
    pub verbalisation: String,
    pub user_text: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transcript {
    pub rows: Vec<TranscriptRow>,
}

/// Two decimals at most, without trailing zeros: `0`, `1`, `0.63`.
pub fn format_feature(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

impl Transcript {
    pub fn push(
        &mut self,
        state: Vec<f64>,
        action: Option<DialogueAct>,
        verbalisation: &str,
        user_text: &str,
    ) {
        self.rows.push(TranscriptRow {
            state,
            action,
            verbalisation: verbalisation.to_string(),
            user_text: user_text.to_string(),
        });
    }

    pub fn actions(&self) -> Vec<DialogueAct> {
        self.rows.iter().filter_map(|r| r.action).collect()
    }

    /// Tab-separated lines: `state<TAB>act<TAB>verbalisation<TAB>[user]`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let state: Vec<String> = r.state.iter().map(|v| format_feature(*v)).collect();
            let act = r.action.map(|a| a.to_string()).unwrap_or_default();
            let user = if r.user_text.is_empty() {
                String::new()
            } else {
                format!("[{}]", r.user_text)
            };
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                state.join(","),
                act,
                r.verbalisation,
                user
            )
            .expect("string write");
        }
        out
    }
}
