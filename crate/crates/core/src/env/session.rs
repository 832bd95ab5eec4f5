use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Domain, EnvConfig, EnvError, Environment, Observation};
use crate::constraints::constrained_set;
use crate::domain::act::{DialogueAct, CATALOG_SIZE};
use crate::domain::text::{featurize, tokenize, ScoredUtterance};
use crate::env::context::DialogueContext;
use crate::simulator::{distort, SystemTurn, UserGoal, UserSimulator};

/// A system act that has been uttered but whose user reply is still pending.
#[derive(Debug, Clone)]
struct Pending {
    act: DialogueAct,
    dr: f64,
    system_text: String,
}

/// The uttered part of a split turn.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemUtterance {
    pub act: DialogueAct,
    pub text: String,
    pub expects_reply: bool,
}

/// One episode loop with its own context and random stream.
#[derive(Debug, Clone)]
pub struct Session {
    domain: Arc<Domain>,
    config: EnvConfig,
    rng: ChaCha8Rng,
    ctx: DialogueContext,
    user: Option<UserSimulator>,
    state: Vec<f64>,
    valid: Vec<usize>,
    pending: Option<Pending>,
    anomalies: usize,
}

impl Session {
    pub fn new(domain: Arc<Domain>, config: EnvConfig, seed: u64) -> Self {
        let state = vec![0.0; domain.vocab.len()];
        Self {
            domain,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            ctx: DialogueContext::new(),
            user: None,
            state,
            valid: Vec::new(),
            pending: None,
            anomalies: 0,
        }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn context(&self) -> &DialogueContext {
        &self.ctx
    }

    pub fn goal(&self) -> Option<&UserGoal> {
        self.user.as_ref().map(UserSimulator::goal)
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn valid_actions(&self) -> &[usize] {
        &self.valid
    }

    pub fn awaiting_user(&self) -> bool {
        self.pending.is_some()
    }

    pub fn started(&self) -> bool {
        self.user.is_some()
    }

    /// Number of states where the full catalog had to stand in for an empty set.
    pub fn anomalies(&self) -> usize {
        self.anomalies
    }

    /// Starts a fresh episode; the goal is sampled unless given.
    pub fn begin(&mut self, goal: Option<UserGoal>) -> Observation {
        let goal = goal.unwrap_or_else(|| UserGoal::sample(&self.domain.pack.db, &mut self.rng));
        self.user = Some(UserSimulator::new(goal, self.config.p_end));
        self.ctx = DialogueContext::new();
        self.pending = None;
        self.state = vec![0.0; self.domain.vocab.len()];
        self.valid = self.constrain();
        Observation {
            state: self.state.clone(),
            reward: 0.0,
            terminal: false,
            valid_actions: self.valid.clone(),
            system_text: String::new(),
            user_text: String::new(),
            task_success: false,
            turn: 0,
        }
    }

    /// Utters `action` without producing the user's reply yet.
    pub fn system_turn(&mut self, action: usize) -> Result<SystemUtterance, EnvError> {
        if !self.started() {
            return Err(EnvError::rejected("not_started", "reset before acting"));
        }
        if self.pending.is_some() {
            return Err(EnvError::rejected(
                "awaiting_user",
                "a user reply is pending",
            ));
        }
        if self.ctx.is_terminal() {
            return Err(EnvError::rejected(
                "terminal",
                "the episode has ended; reset first",
            ));
        }
        let Some(act) = DialogueAct::from_index(action) else {
            return Err(EnvError::rejected(
                "invalid_action",
                format!("action index {action} is outside [0, {CATALOG_SIZE})"),
            ));
        };
        if !self.valid.contains(&action) {
            return Err(EnvError::rejected(
                "invalid_action",
                format!("{act} is not valid in the current state"),
            ));
        }
        let dr = self.domain.model.posterior(&self.state)[action];
        let text = self
            .domain
            .pack
            .templates
            .realize_lenient(act, &self.ctx.placeholders(), &mut self.rng)
            .expect("every act has a template");
        self.ctx
            .apply_system(act, tokenize(&text), &self.domain.pack.db);
        self.pending = Some(Pending {
            act,
            dr,
            system_text: text.clone(),
        });
        Ok(SystemUtterance {
            act,
            text,
            expects_reply: act.expects_user_reply() && !self.ctx.is_terminal(),
        })
    }

    /// Completes a split turn with text typed by a person; `None` means no reply.
    pub fn human_turn(&mut self, text: Option<&str>) -> Result<Observation, EnvError> {
        let user = match text {
            Some(t) => ScoredUtterance::uniform(tokenize(t), self.config.human_confidence),
            None => ScoredUtterance::empty(),
        };
        self.finish(user)
    }

    /// Completes a split turn with the simulated user's noisy reply.
    pub fn simulated_turn(&mut self) -> Result<Observation, EnvError> {
        let Some(pending) = &self.pending else {
            return Err(EnvError::rejected(
                "not_awaiting",
                "no system act is pending",
            ));
        };
        let turn = SystemTurn::asserting(pending.act, self.ctx.values());
        let user = self.user.as_mut().expect("started");
        let words = user.respond(
            &self.domain.pack.rules,
            &self.domain.pack.db,
            &turn,
            &mut self.rng,
        );
        let heard = distort(
            &words,
            &self.config.noise,
            &self.domain.vocab,
            &mut self.rng,
        );
        self.finish(heard)
    }

    fn finish(&mut self, user: ScoredUtterance) -> Result<Observation, EnvError> {
        let Some(pending) = self.pending.take() else {
            return Err(EnvError::rejected(
                "not_awaiting",
                "no system act is pending",
            ));
        };
        let user_text = user.text();
        let system_words = self.ctx.last_system().to_vec();
        self.ctx.apply_user(
            pending.act,
            user.clone(),
            &self.domain.lexicon,
            &self.domain.answers,
        );
        if self.ctx.turns() >= self.config.max_turns {
            self.ctx.mark_terminal();
        }
        self.state = featurize(&system_words, &user, &self.domain.vocab);
        let cr = self
            .config
            .reward
            .confirmation_ratio(self.ctx.confirmed().len());
        let reward = self
            .config
            .reward
            .compute(cr, pending.dr)
            .expect("posteriors lie in (0, 1]");
        let terminal = self.ctx.is_terminal();
        self.valid = if terminal {
            Vec::new()
        } else {
            self.constrain()
        };
        Ok(Observation {
            state: self.state.clone(),
            reward,
            terminal,
            valid_actions: self.valid.clone(),
            system_text: pending.system_text,
            user_text,
            task_success: terminal && self.ctx.task_completed(),
            turn: self.ctx.turns(),
        })
    }

    /// Ends the episode without a final transition.
    pub fn abort(&mut self) {
        self.pending = None;
        self.ctx.mark_terminal();
        self.valid.clear();
    }

    fn constrain(&mut self) -> Vec<usize> {
        let mut set = constrained_set(
            &self.domain.model,
            &self.state,
            &self.ctx,
            self.config.probable_threshold,
            self.config.apology_threshold,
        );
        if self.config.executable_only {
            set = set.executable_only(&self.ctx);
        }
        if set.anomaly {
            self.anomalies += 1;
        }
        set.actions
    }
}

impl Environment for Session {
    fn reset(&mut self, goal: Option<UserGoal>) -> Result<Observation, EnvError> {
        Ok(self.begin(goal))
    }

    fn step(&mut self, action: usize) -> Result<Observation, EnvError> {
        self.system_turn(action)?;
        self.simulated_turn()
    }

    fn state_size(&self) -> usize {
        self.domain.vocab.len()
    }
}
