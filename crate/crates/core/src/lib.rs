//! A dialogue-policy engine that learns which dialogue act to take from the
//! raw words of the last system and (noisy) user turns, using deep Q-learning
//! over per-state constrained action sets.

pub mod config;
pub mod constraints;
pub mod data;
pub mod domain;
pub mod dqn;
pub mod env;
pub mod eval;
pub mod expert;
pub mod neural;
pub mod policy;
pub mod reward;
pub mod simulator;
pub mod transcript;

pub use domain::act::{DialogueAct, Slot, SlotSet, CATALOG, CATALOG_SIZE};
pub use env::{Domain, EnvConfig, EnvError, Environment, Observation, Session};
pub use policy::Policy;
