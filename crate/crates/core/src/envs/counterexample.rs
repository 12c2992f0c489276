//! An episodic environment on which an agent trained off-policy on a
//! cautious historic policy learns to avoid the optimal action.
//!
//! Episodes last `H` steps. The first `H - 1` percepts are `(·, 0)`; the
//! last is `(★, r)` with `r = 1` if every action of the episode was the
//! first action, `r = 0` if only the opening was, and `r = δ` otherwise.
//!
//! Action `k` of the usual 1-based description is index `k - 1` here, so
//! the "all ones" action is index 0. Observation 0 is `·`, 1 is `★`.
//! Reward levels are `{0, δ, 1}` in that order.

use num_rational::Rational64;
use num_traits::{One, ToPrimitive, Zero};

use super::{FiniteStateModel, Transition};
use crate::alphabet::Alphabets;
use crate::history::EnvStep;
use crate::rng::Rng;

pub const BLANK: usize = 0;
pub const STAR: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleConfig {
    pub actions: usize,
    pub horizon: usize,
    pub delta: Rational64,
}

impl CounterexampleConfig {
    pub fn new(actions: usize, horizon: usize, delta: Rational64) -> Result<Self, String> {
        if actions < 2 {
            return Err("need at least two actions".into());
        }
        if horizon < 2 {
            return Err("episodes need at least two steps".into());
        }
        if delta <= Rational64::zero() || delta >= Rational64::one() {
            return Err("delta must lie in (0, 1)".into());
        }
        Ok(Self {
            actions,
            horizon,
            delta,
        })
    }

    pub fn delta_f64(&self) -> f64 {
        self.delta.to_f64().unwrap_or(f64::NAN)
    }

    /// `γ = (H-1)/H`, the discount maximizing `(1-γ)γ^{H-1}`.
    pub fn gamma_exact(&self) -> Rational64 {
        Rational64::new(self.horizon as i64 - 1, self.horizon as i64)
    }

    pub fn gamma(&self) -> f64 {
        (self.horizon as f64 - 1.0) / self.horizon as f64
    }

    /// `c = (1-γ)γ^{H-1}`, the weight of the terminal reward in the
    /// `H`-step return from an episode start.
    pub fn c(&self) -> f64 {
        let g = self.gamma();
        (1.0 - g) * g.powi(self.horizon as i32 - 1)
    }

    pub fn c_exact(&self) -> Rational64 {
        let g = self.gamma_exact();
        (Rational64::one() - g) * g.pow(self.horizon as i32 - 1)
    }

    /// `p = (δ/2)^{1/(H-1)}`.
    pub fn p(&self) -> f64 {
        (self.delta_f64() / 2.0).powf(1.0 / (self.horizon as f64 - 1.0))
    }

    /// `p` as a rational when it is one, i.e. for two-step episodes.
    pub fn p_exact(&self) -> Option<Rational64> {
        (self.horizon == 2).then(|| self.delta / 2)
    }

    /// Smallest `M` with `1/M < cδ/2`.
    pub fn min_levels(&self) -> usize {
        let bound = Rational64::from_integer(2) / (self.c_exact() * self.delta);
        bound.floor().to_integer() as usize + 1
    }
}

#[derive(Debug, Clone)]
pub struct CounterexampleModel {
    config: CounterexampleConfig,
    alphabets: Alphabets,
}

impl CounterexampleModel {
    pub fn new(config: CounterexampleConfig) -> Self {
        let alphabets = Alphabets::new(config.actions, 2, vec![0.0, config.delta_f64(), 1.0])
            .expect("validated config");
        Self { config, alphabets }
    }

    pub fn config(&self) -> &CounterexampleConfig {
        &self.config
    }

    pub fn state(position: usize, first_is_one: bool, all_ones: bool) -> usize {
        position * 4 + (first_is_one as usize) * 2 + all_ones as usize
    }

    /// `(position within the episode, first action was 1, all actions were 1)`.
    pub fn decode_state(state: usize) -> (usize, bool, bool) {
        (state / 4, state & 2 != 0, state & 1 != 0)
    }

    pub fn is_episode_start(state: usize) -> bool {
        state / 4 == 0
    }

    /// Terminal reward level for a complete episode's actions.
    pub fn terminal_reward(actions: &[usize]) -> usize {
        match actions.first() {
            Some(0) if actions.iter().all(|&a| a == 0) => 2,
            Some(0) => 0,
            _ => 1,
        }
    }

    fn historic_row<S>(&self, state: usize, p: S, one: S, div: impl Fn(S, usize) -> S) -> Vec<S>
    where
        S: Clone + std::ops::Sub<Output = S>,
    {
        let k = self.config.actions;
        let (position, first_is_one, _) = Self::decode_state(state);
        if position == 0 || !first_is_one {
            return vec![div(one, k); k];
        }
        let rest = div(one - p.clone(), k - 1);
        let mut row = vec![rest; k];
        row[0] = p;
        row
    }

    /// The historic policy as a table over states.
    pub fn historic_policy(&self) -> Vec<Vec<f64>> {
        (0..self.state_count())
            .map(|s| self.historic_row(s, self.config.p(), 1.0, |x, n| x / n as f64))
            .collect()
    }

    pub fn historic_policy_exact(&self) -> Option<Vec<Vec<Rational64>>> {
        let p = self.config.p_exact()?;
        Some(
            (0..self.state_count())
                .map(|s| {
                    self.historic_row(s, p, Rational64::one(), |x, n| x / Rational64::from_integer(n as i64))
                })
                .collect(),
        )
    }

    /// Draw the historic policy's action given the actions taken so far in
    /// the current episode.
    pub fn historic_action(&self, episode_actions: &[usize], rng: &mut Rng) -> usize {
        let k = self.config.actions;
        match episode_actions.first() {
            Some(0) => {
                if rng.uniform() < self.config.p() {
                    0
                } else {
                    1 + rng.below(k - 1)
                }
            }
            _ => rng.below(k),
        }
    }
}

impl FiniteStateModel for CounterexampleModel {
    fn name(&self) -> &'static str {
        "counterexample"
    }

    fn alphabets(&self) -> &Alphabets {
        &self.alphabets
    }

    fn state_count(&self) -> usize {
        self.config.horizon * 4
    }

    fn initial_state(&self) -> usize {
        0
    }

    fn transitions(&self, state: usize, action: usize) -> Vec<Transition> {
        let (position, first_is_one, all_ones) = Self::decode_state(state);
        let (first_is_one, all_ones) = if position == 0 {
            (action == 0, action == 0)
        } else {
            (first_is_one, all_ones && action == 0)
        };
        let (percept, next) = if position + 1 == self.config.horizon {
            let reward = match (first_is_one, all_ones) {
                (true, true) => 2,
                (true, false) => 0,
                _ => 1,
            };
            (EnvStep::new(STAR, reward), Self::state(0, false, false))
        } else {
            (
                EnvStep::new(BLANK, 0),
                Self::state(position + 1, first_is_one, all_ones),
            )
        };
        vec![Transition {
            probability: Rational64::one(),
            percept,
            next,
        }]
    }

    fn reward_exact(&self, reward: usize) -> Rational64 {
        match reward {
            0 => Rational64::zero(),
            1 => self.config.delta,
            _ => Rational64::one(),
        }
    }

    fn describe_state(&self, state: usize) -> String {
        let (position, first, all) = Self::decode_state(state);
        format!("pos {position} first-is-1 {first} all-1 {all}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::testing::check_model;

    fn cfg() -> CounterexampleConfig {
        CounterexampleConfig::new(4, 2, Rational64::new(1, 5)).unwrap()
    }

    #[test]
    fn model_is_well_formed() {
        check_model(&CounterexampleModel::new(cfg()));
        let three = CounterexampleConfig::new(3, 3, Rational64::new(1, 10)).unwrap();
        check_model(&CounterexampleModel::new(three));
    }

    #[test]
    fn derived_constants() {
        let c = cfg();
        assert_eq!(c.gamma(), 0.5);
        assert_eq!(c.c_exact(), Rational64::new(1, 4));
        assert_eq!(c.p_exact(), Some(Rational64::new(1, 10)));
        assert!((c.p() - 0.1).abs() < 1e-15);
        assert_eq!(c.min_levels(), 41);
        // c_H = (1/H)((H-1)/H)^{H-1}
        let c3 = CounterexampleConfig::new(2, 3, Rational64::new(1, 2)).unwrap();
        assert_eq!(c3.c_exact(), Rational64::new(4, 27));
        assert!(c3.p_exact().is_none());
        assert!((c3.p().powi(2) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn terminal_rewards() {
        let m = CounterexampleModel::new(cfg());
        let run = |actions: &[usize]| -> EnvStep {
            let mut s = m.initial_state();
            let mut last = None;
            for &a in actions {
                let t = &m.transitions(s, a)[0];
                s = t.next;
                last = Some(t.percept);
            }
            last.unwrap()
        };
        assert_eq!(run(&[0, 0]), EnvStep::new(STAR, 2));
        assert_eq!(run(&[0, 2]), EnvStep::new(STAR, 0));
        assert_eq!(run(&[1, 0]), EnvStep::new(STAR, 1));
        assert_eq!(run(&[0]), EnvStep::new(BLANK, 0));
        assert_eq!(CounterexampleModel::terminal_reward(&[0, 0]), 2);
        assert_eq!(CounterexampleModel::terminal_reward(&[0, 2]), 0);
        assert_eq!(CounterexampleModel::terminal_reward(&[1, 0]), 1);
    }

    #[test]
    fn historic_policy_tables() {
        let m = CounterexampleModel::new(cfg());
        let exact = m.historic_policy_exact().unwrap();
        let quarter = Rational64::new(1, 4);
        assert_eq!(exact[0], vec![quarter; 4]);
        let after_one = CounterexampleModel::state(1, true, true);
        assert_eq!(exact[after_one][0], Rational64::new(1, 10));
        assert_eq!(exact[after_one][1], Rational64::new(3, 10));
        let after_three = CounterexampleModel::state(1, false, false);
        assert_eq!(exact[after_three], vec![quarter; 4]);
        // P(all-ones episode) = (1/K)·(δ/2)
        assert_eq!(exact[0][0] * exact[after_one][0], Rational64::new(1, 40));
    }

    #[test]
    fn historic_sampler_matches_table() {
        let m = CounterexampleModel::new(cfg());
        let mut rng = Rng::new(12);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| m.historic_action(&[0], &mut rng) == 0)
            .count();
        let sd = (n as f64 * 0.1 * 0.9).sqrt();
        assert!((ones as f64 - 0.1 * n as f64).abs() < 4.0 * sd);
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[m.historic_action(&[2], &mut rng)] += 1;
        }
        for c in counts {
            assert!((c as f64 - n as f64 / 4.0).abs() < 4.0 * (n as f64 * 0.1875).sqrt());
        }
    }
}
