//! A 4×4 gridworld. The agent starts in the top-left corner and earns
//! reward 1 on entering the bottom-right corner, after which it is put back
//! at the start. Moves off the lattice leave the position unchanged. The
//! observation is constant.

use num_rational::Rational64;

use super::{FiniteStateModel, Transition};
use crate::alphabet::Alphabets;
use crate::history::EnvStep;

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;

const SIDE: usize = 4;
const START: (usize, usize) = (0, 0);
const GOAL: (usize, usize) = (3, 3);

#[derive(Debug, Clone)]
pub struct Grid4x4 {
    alphabets: Alphabets,
}

impl Default for Grid4x4 {
    fn default() -> Self {
        Self::new()
    }
}

impl Grid4x4 {
    pub fn new() -> Self {
        Self {
            alphabets: Alphabets::new(4, 1, vec![0.0, 1.0]).expect("static alphabets"),
        }
    }

    pub fn side(&self) -> usize {
        SIDE
    }

    pub fn index(x: usize, y: usize) -> usize {
        y * SIDE + x
    }

    pub fn coords(state: usize) -> (usize, usize) {
        (state % SIDE, state / SIDE)
    }

    pub fn start() -> usize {
        Self::index(START.0, START.1)
    }

    pub fn goal() -> usize {
        Self::index(GOAL.0, GOAL.1)
    }

    /// Position after a move, before any goal reset.
    pub fn moved(state: usize, action: usize) -> usize {
        let (x, y) = Self::coords(state);
        let (x, y) = match action {
            UP => (x, y.saturating_sub(1)),
            DOWN => (x, (y + 1).min(SIDE - 1)),
            LEFT => (x.saturating_sub(1), y),
            _ => ((x + 1).min(SIDE - 1), y),
        };
        Self::index(x, y)
    }
}

impl FiniteStateModel for Grid4x4 {
    fn name(&self) -> &'static str {
        "grid"
    }

    fn alphabets(&self) -> &Alphabets {
        &self.alphabets
    }

    fn state_count(&self) -> usize {
        SIDE * SIDE
    }

    fn initial_state(&self) -> usize {
        Self::start()
    }

    fn transitions(&self, state: usize, action: usize) -> Vec<Transition> {
        let target = Self::moved(state, action);
        let (reward, next) = if target == Self::goal() {
            (1, Self::start())
        } else {
            (0, target)
        };
        vec![Transition {
            probability: Rational64::from_integer(1),
            percept: EnvStep::new(0, reward),
            next,
        }]
    }

    fn reward_exact(&self, reward: usize) -> Rational64 {
        Rational64::from_integer(reward as i64)
    }

    fn describe_state(&self, state: usize) -> String {
        let (x, y) = Self::coords(state);
        format!("({x}, {y})")
    }
}
