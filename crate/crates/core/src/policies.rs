//! Non-learning agents: uniform random play and fixed stochastic policies
//! over a model's abstract states.

use std::sync::Arc;

use crate::agent::{Agent, AgentError};
use crate::alphabet::Alphabets;
use crate::envs::FiniteStateModel;
use crate::history::{EnvStep, History, Step};
use crate::rng::Rng;
use crate::wire::{ByteReader, ByteWriter, WireError};

/// Action probabilities per abstract state.
pub type PolicyTable = Vec<Vec<f64>>;

#[derive(Debug, Clone)]
pub struct RandomAgent {
    alphabets: Alphabets,
    history: History,
    rng: Rng,
}

impl RandomAgent {
    pub fn new(alphabets: Alphabets, rng: Rng) -> Self {
        Self {
            alphabets,
            history: History::new(),
            rng,
        }
    }
}

impl Agent for RandomAgent {
    fn name(&self) -> &'static str {
        "random"
    }

    fn alphabets(&self) -> &Alphabets {
        &self.alphabets
    }

    fn act(&mut self) -> Result<usize, AgentError> {
        Ok(self.rng.below(self.alphabets.action_count()))
    }

    fn observe(&mut self, action: usize, percept: EnvStep) -> Result<(), AgentError> {
        self.history.push(Step::new(action, percept), &self.alphabets)?;
        Ok(())
    }

    fn exploration_rate(&self) -> f64 {
        1.0
    }

    fn history(&self) -> &History {
        &self.history
    }

    fn save_state(&self, w: &mut ByteWriter) {
        self.history.write(w);
        self.rng.write(w);
    }

    fn load_state(&mut self, r: &mut ByteReader<'_>) -> Result<(), AgentError> {
        self.history = History::read(r)?;
        self.rng = Rng::read(r)?;
        Ok(())
    }
}

/// Plays a fixed table over the abstract states of a percept-deterministic
/// model, tracking the state from its own actions and percepts.
#[derive(Debug, Clone)]
pub struct MarkovPolicyAgent {
    name: &'static str,
    model: Arc<dyn FiniteStateModel>,
    table: PolicyTable,
    state: usize,
    history: History,
    rng: Rng,
}

impl MarkovPolicyAgent {
    pub fn new(
        name: &'static str,
        model: Arc<dyn FiniteStateModel>,
        table: PolicyTable,
        rng: Rng,
    ) -> Result<Self, AgentError> {
        let k = model.alphabets().action_count();
        if table.len() != model.state_count() {
            return Err(AgentError::Config(format!(
                "policy has {} rows for {} states",
                table.len(),
                model.state_count()
            )));
        }
        for row in &table {
            let total: f64 = row.iter().sum();
            if row.len() != k || row.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
                return Err(AgentError::Config("policy rows must be distributions".into()));
            }
        }
        let state = model.initial_state();
        Ok(Self {
            name,
            model,
            table,
            state,
            history: History::new(),
            rng,
        })
    }

    /// Deterministic policy from one action per state.
    pub fn deterministic(actions: &[usize], action_count: usize) -> PolicyTable {
        actions
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; action_count];
                row[a] = 1.0;
                row
            })
            .collect()
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn table(&self) -> &PolicyTable {
        &self.table
    }
}

impl Agent for MarkovPolicyAgent {
    fn name(&self) -> &'static str {
        self.name
    }

    fn alphabets(&self) -> &Alphabets {
        self.model.alphabets()
    }

    fn act(&mut self) -> Result<usize, AgentError> {
        Ok(self.rng.categorical(&self.table[self.state]))
    }

    fn observe(&mut self, action: usize, percept: EnvStep) -> Result<(), AgentError> {
        self.history
            .push(Step::new(action, percept), self.model.alphabets())?;
        self.state = self
            .model
            .successor(self.state, action, percept)
            .ok_or_else(|| {
                AgentError::Config(format!(
                    "percept {percept:?} is impossible from {} under action {action}",
                    self.model.describe_state(self.state)
                ))
            })?;
        Ok(())
    }

    fn exploration_rate(&self) -> f64 {
        0.0
    }

    fn history(&self) -> &History {
        &self.history
    }

    fn save_state(&self, w: &mut ByteWriter) {
        self.history.write(w);
        self.rng.write(w);
        w.put_u64(self.state as u64);
    }

    fn load_state(&mut self, r: &mut ByteReader<'_>) -> Result<(), AgentError> {
        let history = History::read(r)?;
        let rng = Rng::read(r)?;
        let state = r.get_u64()? as usize;
        if state >= self.model.state_count() {
            return Err(WireError::Corrupt("policy state".into()).into());
        }
        self.history = history;
        self.rng = rng;
        self.state = state;
        Ok(())
    }
}
