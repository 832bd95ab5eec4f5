//! Per-transition reward: confirmation progress, data-likeness and a turn cost.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Weight of the confirmation ratio; the data-likeness term gets `1 - w`.
    pub w: f64,
    /// Cost charged on every turn.
    pub dl: f64,
    pub slots_to_confirm: usize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            w: 0.5,
            dl: 0.1,
            slots_to_confirm: 3,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("reward weight {0} is outside [0, 1]")]
    Weight(f64),
    #[error("turn cost {0} is negative")]
    TurnCost(f64),
    #[error("slots_to_confirm must be at least 1")]
    NoSlots,
    #[error("data-likeness {0} is outside (0, 1]")]
    DataLikeness(f64),
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        if !(0.0..=1.0).contains(&self.w) {
            return Err(RewardError::Weight(self.w));
        }
        if !self.dl.is_finite() || self.dl < 0.0 {
            return Err(RewardError::TurnCost(self.dl));
        }
        if self.slots_to_confirm == 0 {
            return Err(RewardError::NoSlots);
        }
        Ok(())
    }

    /// Smallest and largest reward a single transition can earn.
    pub fn bounds(&self) -> (f64, f64) {
        (-self.dl, 1.0 - self.dl)
    }

    pub fn confirmation_ratio(&self, confirmed: usize) -> f64 {
        (confirmed.min(self.slots_to_confirm)) as f64 / self.slots_to_confirm as f64
    }

    /// `CR * w + DR * (1 - w) - DL`.
    pub fn compute(&self, cr: f64, dr: f64) -> Result<f64, RewardError> {
        if !(dr > 0.0 && dr <= 1.0) {
            return Err(RewardError::DataLikeness(dr));
        }
        Ok(cr * self.w + dr * (1.0 - self.w) - self.dl)
    }
}
