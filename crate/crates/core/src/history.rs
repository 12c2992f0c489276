//! Append-only interaction history.

use thiserror::Error;

use crate::alphabet::Alphabets;
use crate::wire::{ByteReader, ByteWriter, WireError};

/// What the environment returns after an action: an observation index and
/// the index of a reward level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EnvStep {
    pub observation: usize,
    pub reward: usize,
}

impl EnvStep {
    pub fn new(observation: usize, reward: usize) -> Self {
        Self {
            observation,
            reward,
        }
    }
}

/// One interaction cycle `a_i e_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Step {
    pub action: usize,
    pub observation: usize,
    pub reward: usize,
}

impl Step {
    pub fn new(action: usize, percept: EnvStep) -> Self {
        Self {
            action,
            observation: percept.observation,
            reward: percept.reward,
        }
    }

    pub fn percept(&self) -> EnvStep {
        EnvStep::new(self.observation, self.reward)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HistoryError {
    #[error("step {step:?} is outside the alphabets ({actions} actions, {observations} observations, {rewards} rewards)")]
    OutOfAlphabet {
        step: Step,
        actions: usize,
        observations: usize,
        rewards: usize,
    },
}

/// `h_{<t}`: the steps so far. Time is 1-based, so [`History::at`]`(1)` is the
/// first step and a history of length `t - 1` precedes time `t`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct History {
    steps: Vec<Step>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push(&mut self, step: Step, alphabets: &Alphabets) -> Result<(), HistoryError> {
        if step.action >= alphabets.action_count()
            || step.observation >= alphabets.observation_count()
            || step.reward >= alphabets.reward_count()
        {
            return Err(HistoryError::OutOfAlphabet {
                step,
                actions: alphabets.action_count(),
                observations: alphabets.observation_count(),
                rewards: alphabets.reward_count(),
            });
        }
        self.steps.push(step);
        Ok(())
    }

    /// Step at 1-based time `t`.
    pub fn at(&self, t: usize) -> Option<&Step> {
        t.checked_sub(1).and_then(|i| self.steps.get(i))
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn last(&self) -> Option<&Step> {
        self.steps.last()
    }

    pub(crate) fn write(&self, w: &mut ByteWriter) {
        w.put_u64(self.steps.len() as u64);
        for s in &self.steps {
            w.put_u32(s.action as u32);
            w.put_u32(s.observation as u32);
            w.put_u32(s.reward as u32);
        }
    }

    pub(crate) fn read(r: &mut ByteReader<'_>) -> Result<Self, WireError> {
        let n = r.get_len()?;
        let mut steps = Vec::with_capacity(n);
        for _ in 0..n {
            steps.push(Step {
                action: r.get_u32()? as usize,
                observation: r.get_u32()? as usize,
                reward: r.get_u32()? as usize,
            });
        }
        Ok(Self { steps })
    }
}

impl std::ops::Deref for History {
    type Target = [Step];

    fn deref(&self) -> &[Step] {
        &self.steps
    }
}
