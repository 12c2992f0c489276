//! Stateless multi-armed bandit with Bernoulli rewards.

use num_rational::Rational64;
use num_traits::{One, Zero};

use super::{FiniteStateModel, Transition};
use crate::alphabet::Alphabets;
use crate::history::EnvStep;

#[derive(Debug, Clone)]
pub struct BernoulliBandit {
    alphabets: Alphabets,
    success: Vec<Rational64>,
}

impl BernoulliBandit {
    /// One arm per success probability; each must lie in `[0, 1]`.
    pub fn new(success: Vec<Rational64>) -> Self {
        assert!(success.len() >= 2, "a bandit needs at least two arms");
        assert!(success
            .iter()
            .all(|p| *p >= Rational64::zero() && *p <= Rational64::one()));
        Self {
            alphabets: Alphabets::new(success.len(), 1, vec![0.0, 1.0]).expect("two arms"),
            success,
        }
    }

    pub fn success(&self) -> &[Rational64] {
        &self.success
    }
}

impl FiniteStateModel for BernoulliBandit {
    fn name(&self) -> &'static str {
        "bandit"
    }

    fn alphabets(&self) -> &Alphabets {
        &self.alphabets
    }

    fn state_count(&self) -> usize {
        1
    }

    fn initial_state(&self) -> usize {
        0
    }

    fn transitions(&self, _state: usize, action: usize) -> Vec<Transition> {
        let p = self.success[action];
        [(Rational64::one() - p, 0), (p, 1)]
            .into_iter()
            .filter(|(q, _)| !q.is_zero())
            .map(|(probability, reward)| Transition {
                probability,
                percept: EnvStep::new(0, reward),
                next: 0,
            })
            .collect()
    }

    fn reward_exact(&self, reward: usize) -> Rational64 {
        Rational64::from_integer(reward as i64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::testing::check_model;

    #[test]
    fn model_is_well_formed() {
        check_model(&BernoulliBandit::new(vec![
            Rational64::new(1, 10),
            Rational64::new(9, 10),
            Rational64::one(),
            Rational64::zero(),
        ]));
    }
}
