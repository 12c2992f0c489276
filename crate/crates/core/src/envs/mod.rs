//! Benchmark environments.
//!
//! Most environments are declared as a [`FiniteStateModel`]: a finite
//! Markov abstraction with exact rational transition probabilities, from
//! which [`ModelEnvironment`] derives a runnable environment and the oracle
//! derives exact values. Every model here is *percept-deterministic*: the
//! next state is a function of the state, the action and the percept, so a
//! policy that sees only the history can still track the state.

pub mod bandit;
pub mod counterexample;
pub mod grid;
pub mod kuhn;
pub mod rps;

pub use bandit::BernoulliBandit;
pub use counterexample::{CounterexampleConfig, CounterexampleModel};
pub use grid::Grid4x4;
pub use kuhn::{KuhnPoker, Card, KUHN_ALPHA};
pub use rps::BiasedRps;

use std::fmt::Debug;

use num_rational::Rational64;
use num_traits::ToPrimitive;

use crate::alphabet::Alphabets;
use crate::history::EnvStep;
use crate::rng::Rng;
use crate::wire::{ByteReader, ByteWriter, WireError};

/// One outcome of taking an action in a state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub probability: Rational64,
    pub percept: EnvStep,
    pub next: usize,
}

pub trait FiniteStateModel: Debug + Send + Sync {
    fn name(&self) -> &'static str;
    fn alphabets(&self) -> &Alphabets;
    fn state_count(&self) -> usize;
    fn initial_state(&self) -> usize;
    /// Outcomes in a fixed order; probabilities sum to exactly 1.
    fn transitions(&self, state: usize, action: usize) -> Vec<Transition>;
    /// Normalized reward of a reward level, exactly.
    fn reward_exact(&self, reward: usize) -> Rational64;

    fn reward(&self, reward: usize) -> f64 {
        self.reward_exact(reward).to_f64().unwrap_or(f64::NAN)
    }

    /// The state reached from `state` via `action` and `percept`, if that
    /// percept is possible.
    fn successor(&self, state: usize, action: usize, percept: EnvStep) -> Option<usize> {
        self.transitions(state, action)
            .into_iter()
            .find(|t| t.percept == percept)
            .map(|t| t.next)
    }

    fn describe_state(&self, state: usize) -> String {
        format!("state {state}")
    }
}

/// A steppable environment.
pub trait Environment: Send {
    fn name(&self) -> &'static str;
    fn alphabets(&self) -> &Alphabets;
    /// Percept distribution for `action` in the current state.
    fn distribution(&self, action: usize) -> Vec<(EnvStep, f64)>;
    fn step(&mut self, action: usize, rng: &mut Rng) -> EnvStep;
    fn reset(&mut self);
    fn save_state(&self, w: &mut ByteWriter);
    fn load_state(&mut self, r: &mut ByteReader<'_>) -> Result<(), WireError>;
    fn finite_model(&self) -> Option<&dyn FiniteStateModel> {
        None
    }
    /// Current abstract state, for environments backed by a model.
    fn model_state(&self) -> Option<usize> {
        None
    }
}

#[derive(Debug, Clone)]
pub struct ModelEnvironment<M> {
    model: M,
    state: usize,
}

impl<M: FiniteStateModel> ModelEnvironment<M> {
    pub fn new(model: M) -> Self {
        let state = model.initial_state();
        Self { model, state }
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn set_state(&mut self, state: usize) {
        assert!(state < self.model.state_count());
        self.state = state;
    }
}

impl<M: FiniteStateModel + 'static> Environment for ModelEnvironment<M> {
    fn name(&self) -> &'static str {
        self.model.name()
    }

    fn alphabets(&self) -> &Alphabets {
        self.model.alphabets()
    }

    fn distribution(&self, action: usize) -> Vec<(EnvStep, f64)> {
        self.model
            .transitions(self.state, action)
            .into_iter()
            .map(|t| (t.percept, t.probability.to_f64().unwrap_or(0.0)))
            .collect()
    }

    fn step(&mut self, action: usize, rng: &mut Rng) -> EnvStep {
        let outcomes = self.model.transitions(self.state, action);
        let chosen = if outcomes.len() == 1 {
            0
        } else {
            let weights: Vec<f64> = outcomes
                .iter()
                .map(|t| t.probability.to_f64().unwrap_or(0.0))
                .collect();
            rng.categorical(&weights)
        };
        let t = &outcomes[chosen];
        self.state = t.next;
        t.percept
    }

    fn reset(&mut self) {
        self.state = self.model.initial_state();
    }

    fn save_state(&self, w: &mut ByteWriter) {
        w.put_u64(self.state as u64);
    }

    fn load_state(&mut self, r: &mut ByteReader<'_>) -> Result<(), WireError> {
        let state = r.get_u64()? as usize;
        if state >= self.model.state_count() {
            return Err(WireError::Corrupt(format!("state {state} out of range")));
        }
        self.state = state;
        Ok(())
    }

    fn finite_model(&self) -> Option<&dyn FiniteStateModel> {
        Some(&self.model)
    }

    fn model_state(&self) -> Option<usize> {
        Some(self.state)
    }
}
