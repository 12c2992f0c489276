//! Repeated rock-paper-scissors against an opponent who repeats rock after
//! winning with it and otherwise plays uniformly.
//!
//! Actions and observations share the move encoding rock 0, paper 1,
//! scissors 2. The observation is the opponent's move in the round just
//! played. Raw rewards are loss 0, draw 1, win 2.

use num_rational::Rational64;

use super::{FiniteStateModel, Transition};
use crate::alphabet::Alphabets;
use crate::history::EnvStep;

pub const ROCK: usize = 0;
pub const PAPER: usize = 1;
pub const SCISSORS: usize = 2;

/// Opponent plays uniformly.
const UNIFORM: usize = 0;
/// Opponent won the last round with rock and will play rock.
const ROCK_NEXT: usize = 1;

#[derive(Debug, Clone)]
pub struct BiasedRps {
    alphabets: Alphabets,
}

impl Default for BiasedRps {
    fn default() -> Self {
        Self::new()
    }
}

impl BiasedRps {
    pub fn new() -> Self {
        Self {
            alphabets: Alphabets::new(3, 3, vec![0.0, 1.0, 2.0]).expect("static alphabets"),
        }
    }

    /// Reward level of `ours` against `theirs`.
    pub fn outcome(ours: usize, theirs: usize) -> usize {
        match (3 + ours - theirs) % 3 {
            0 => 1,
            1 => 2,
            _ => 0,
        }
    }
}

impl FiniteStateModel for BiasedRps {
    fn name(&self) -> &'static str {
        "rps"
    }

    fn alphabets(&self) -> &Alphabets {
        &self.alphabets
    }

    fn state_count(&self) -> usize {
        2
    }

    fn initial_state(&self) -> usize {
        UNIFORM
    }

    fn transitions(&self, state: usize, action: usize) -> Vec<Transition> {
        let moves: &[usize] = if state == ROCK_NEXT {
            &[ROCK]
        } else {
            &[ROCK, PAPER, SCISSORS]
        };
        let probability = Rational64::new(1, moves.len() as i64);
        moves
            .iter()
            .map(|&theirs| {
                let reward = Self::outcome(action, theirs);
                let next = if theirs == ROCK && reward == 0 {
                    ROCK_NEXT
                } else {
                    UNIFORM
                };
                Transition {
                    probability,
                    percept: EnvStep::new(theirs, reward),
                    next,
                }
            })
            .collect()
    }

    fn reward_exact(&self, reward: usize) -> Rational64 {
        Rational64::new(reward as i64, 2)
    }

    fn describe_state(&self, state: usize) -> String {
        if state == ROCK_NEXT { "rock-next" } else { "uniform" }.into()
    }
}
