//! The AIQI control loop: greedy on `Q̂` with ε-greedy exploration.

use thiserror::Error;

use crate::alphabet::Alphabets;
use crate::history::{EnvStep, History, HistoryError, Step};
use crate::ctw::MAX_DEPTH;
use crate::qinduction::{AugmentationScheme, DiscountConfig, Discretizer, QError, UnifiedPredictor};
use crate::rng::Rng;
use crate::wire::{ByteReader, ByteWriter, WireError};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error("observed action {got} but the agent chose {expected:?}")]
    ActionMismatch { expected: Option<usize>, got: usize },
    #[error(transparent)]
    Predictor(#[from] QError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Anything that can be driven through the act/observe loop.
pub trait Agent: Send {
    fn name(&self) -> &'static str;
    fn alphabets(&self) -> &Alphabets;
    fn act(&mut self) -> Result<usize, AgentError>;
    fn observe(&mut self, action: usize, percept: EnvStep) -> Result<(), AgentError>;
    /// Exploration rate that the next `act` will use.
    fn exploration_rate(&self) -> f64;
    fn history(&self) -> &History;
    fn save_state(&self, w: &mut ByteWriter);
    fn load_state(&mut self, r: &mut ByteReader<'_>) -> Result<(), AgentError>;
}

/// Lowest-index argmax.
pub fn greedy_action(q: &[f64]) -> usize {
    let mut best = 0;
    for (a, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = a;
        }
    }
    best
}

/// `(1-ε) 𝟙[a = a*] + ε/|𝒜|`.
pub fn action_distribution(q: &[f64], eps: f64) -> Vec<f64> {
    let k = q.len() as f64;
    let mut dist = vec![eps / k; q.len()];
    dist[greedy_action(q)] += 1.0 - eps;
    dist
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub tau: f64,
    pub epsilon0: f64,
    pub decay: f64,
    pub learning_period: u64,
    pub terminating_age: u64,
    pub gamma: f64,
    pub horizon: usize,
    pub period: usize,
    pub levels: usize,
    pub depth: usize,
    /// Stop learning return bits once the learning period is over.
    pub freeze_after_learning: bool,
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::Config(m.into()));
        if !(0.0 <= self.tau && self.tau <= self.epsilon0 && self.epsilon0 <= 1.0) {
            return bad("need 0 <= tau <= epsilon0 <= 1");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay must lie in (0, 1]");
        }
        if self.learning_period > self.terminating_age {
            return bad("learning period exceeds terminating age");
        }
        self.discount()?;
        AugmentationScheme::new(self.period, self.horizon)?;
        Discretizer::new(self.levels)?;
        if self.depth > MAX_DEPTH {
            return bad("context depth exceeds the maximum");
        }
        Ok(())
    }

    pub fn discount(&self) -> Result<DiscountConfig, AgentError> {
        Ok(DiscountConfig::new(self.gamma, self.horizon)?)
    }

    /// Exploration rate after `completed` steps.
    pub fn exploration_rate(&self, completed: u64) -> f64 {
        if completed >= self.learning_period {
            return 0.0;
        }
        let decayed = self.epsilon0 * self.decay.powf(completed as f64);
        decayed.max(self.tau)
    }
}

const MAGIC: [u8; 4] = *b"AIQ1";
const VERSION: u16 = 1;

/// AIQI-CTW.
#[derive(Debug, Clone)]
pub struct AiqiAgent {
    config: AgentConfig,
    alphabets: Alphabets,
    predictor: UnifiedPredictor,
    history: History,
    rng: Rng,
    chosen: Option<usize>,
    last_q: Option<Vec<f64>>,
    draws: u64,
}

impl AiqiAgent {
    pub fn new(config: AgentConfig, alphabets: Alphabets, rng: Rng) -> Result<Self, AgentError> {
        config.validate()?;
        let predictor = UnifiedPredictor::new(
            &alphabets,
            config.discount()?,
            config.levels,
            config.period,
            config.depth,
        )?;
        Ok(Self {
            config,
            alphabets,
            predictor,
            history: History::new(),
            rng,
            chosen: None,
            last_q: None,
            draws: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn predictor(&self) -> &UnifiedPredictor {
        &self.predictor
    }

    pub fn predictor_mut(&mut self) -> &mut UnifiedPredictor {
        &mut self.predictor
    }

    /// `Q̂` computed by the most recent greedy `act`, if it was greedy.
    pub fn last_q_values(&self) -> Option<&[f64]> {
        self.last_q.as_deref()
    }

    /// Number of exploration draws made so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// `Q̂(h_{<t}, ·)` for the current history.
    pub fn q_values(&mut self) -> Result<Vec<f64>, AgentError> {
        Ok(self.predictor.q_values(self.history.steps())?)
    }

    /// Return distributions for a hypothetical continuation of the current
    /// history, leaving the predictor untouched.
    pub fn probe_return_distributions(
        &mut self,
        history: &[Step],
    ) -> Result<Vec<Vec<f64>>, AgentError> {
        Ok(self.predictor.probe_return_distributions(history)?)
    }

    /// Append a step chosen by someone else, e.g. a historic policy.
    pub fn record(&mut self, action: usize, percept: EnvStep) -> Result<(), AgentError> {
        self.history.push(Step::new(action, percept), &self.alphabets)?;
        self.chosen = None;
        if self.config.freeze_after_learning
            && self.history.len() as u64 >= self.config.learning_period
        {
            self.predictor.set_learning(false);
        }
        Ok(())
    }
}

impl Agent for AiqiAgent {
    fn name(&self) -> &'static str {
        "aiqi"
    }

    fn alphabets(&self) -> &Alphabets {
        &self.alphabets
    }

    fn act(&mut self) -> Result<usize, AgentError> {
        let eps = self.exploration_rate();
        let k = self.alphabets.action_count();
        let p = self.rng.uniform();
        let random = self.rng.below(k);
        self.draws += 1;
        let action = if p < 1.0 - eps {
            let q = self.predictor.q_values(self.history.steps())?;
            let a = greedy_action(&q);
            self.last_q = Some(q);
            a
        } else {
            self.last_q = None;
            random
        };
        self.chosen = Some(action);
        Ok(action)
    }

    fn observe(&mut self, action: usize, percept: EnvStep) -> Result<(), AgentError> {
        if self.chosen != Some(action) {
            return Err(AgentError::ActionMismatch {
                expected: self.chosen,
                got: action,
            });
        }
        self.record(action, percept)
    }

    fn exploration_rate(&self) -> f64 {
        self.config.exploration_rate(self.history.len() as u64)
    }

    fn history(&self) -> &History {
        &self.history
    }

    fn save_state(&self, w: &mut ByteWriter) {
        w.put_bytes(&MAGIC);
        w.put_u16(VERSION);
        self.history.write(w);
        self.rng.write(w);
        w.put_u64(self.chosen.map_or(0, |a| a as u64 + 1));
        w.put_u64(self.draws);
        self.predictor.write(w);
    }

    fn load_state(&mut self, r: &mut ByteReader<'_>) -> Result<(), AgentError> {
        r.expect_magic(MAGIC)?;
        r.expect_version(VERSION)?;
        let history = History::read(r)?;
        let rng = Rng::read(r)?;
        let chosen = match r.get_u64()? {
            0 => None,
            a => Some(a as usize - 1),
        };
        let draws = r.get_u64()?;
        self.predictor.read_phases(r)?;
        self.history = history;
        self.rng = rng;
        self.chosen = chosen;
        self.draws = draws;
        self.last_q = None;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> AgentConfig {
        AgentConfig {
            tau: 0.01,
            epsilon0: 0.999,
            decay: 0.9999,
            learning_period: 1000,
            terminating_age: 2000,
            gamma: 0.5,
            horizon: 2,
            period: 2,
            levels: 9,
            depth: 8,
            freeze_after_learning: false,
        }
    }

    fn bandit() -> Alphabets {
        Alphabets::new(3, 1, vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn validation_covers_the_return_scheme() {
        assert!(config().validate().is_ok());
        assert!(AgentConfig { period: 1, ..config() }.validate().is_err());
        assert!(AgentConfig { levels: 0, ..config() }.validate().is_err());
        assert!(AgentConfig { depth: MAX_DEPTH + 1, ..config() }.validate().is_err());
        assert!(AgentConfig { gamma: 1.0, ..config() }.validate().is_err());
    }

    #[test]
    fn action_distribution_examples() {
        let d = action_distribution(&[0.1, 0.9, 0.3], 0.3);
        for (got, want) in d.iter().zip([0.1, 0.8, 0.1]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(action_distribution(&[0.5, 0.5], 0.0), vec![1.0, 0.0]);
        let u = action_distribution(&[0.2, 0.7, 0.1, 0.0], 1.0);
        assert!(u.iter().all(|&p| (p - 0.25).abs() < 1e-12));
    }

    #[test]
    fn exploration_schedule() {
        let c = config();
        assert_eq!(c.exploration_rate(0), 0.999);
        assert!((c.exploration_rate(500) - 0.999 * 0.9999f64.powi(500)).abs() < 1e-12);
        assert_eq!(c.exploration_rate(1000), 0.0);
        let slow = AgentConfig {
            decay: 0.99,
            ..config()
        };
        assert_eq!(slow.exploration_rate(999), 0.01);
    }

    #[test]
    fn config_validation() {
        assert!(config().validate().is_ok());
        for bad in [
            AgentConfig { tau: 0.5, epsilon0: 0.4, ..config() },
            AgentConfig { decay: 0.0, ..config() },
            AgentConfig { learning_period: 3000, ..config() },
            AgentConfig { period: 1, ..config() },
            AgentConfig { gamma: 1.0, ..config() },
        ] {
            assert!(AiqiAgent::new(bad, bandit(), Rng::new(0)).is_err());
        }
    }

    #[test]
    fn greedy_depth_zero_agent_always_plays_first_action() {
        let cfg = AgentConfig {
            tau: 0.0,
            epsilon0: 0.0,
            depth: 0,
            ..config()
        };
        let mut agent = AiqiAgent::new(cfg, bandit(), Rng::new(1)).unwrap();
        let mut rng = Rng::new(2);
        for _ in 0..200 {
            let a = agent.act().unwrap();
            assert_eq!(a, 0);
            agent.observe(a, EnvStep::new(0, rng.below(2))).unwrap();
        }
    }

    #[test]
    fn full_exploration_is_uniform() {
        let cfg = AgentConfig {
            tau: 1.0,
            epsilon0: 1.0,
            learning_period: 20_000,
            terminating_age: 20_000,
            ..config()
        };
        let mut agent = AiqiAgent::new(cfg, bandit(), Rng::new(9)).unwrap();
        let mut counts = [0usize; 3];
        for _ in 0..10_000 {
            let a = agent.act().unwrap();
            counts[a] += 1;
            agent.observe(a, EnvStep::new(0, 0)).unwrap();
        }
        let n: f64 = 10_000.0;
        let sd = (n * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for c in counts {
            assert!((c as f64 - n / 3.0).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn learns_to_prefer_the_rewarding_arm() {
        let cfg = AgentConfig {
            learning_period: 3000,
            terminating_age: 4000,
            decay: 0.999,
            ..config()
        };
        let mut agent = AiqiAgent::new(cfg, bandit(), Rng::new(4)).unwrap();
        for _ in 0..3000 {
            let a = agent.act().unwrap();
            agent.observe(a, EnvStep::new(0, (a == 2) as usize)).unwrap();
        }
        assert_eq!(agent.exploration_rate(), 0.0);
        for _ in 0..50 {
            let a = agent.act().unwrap();
            assert_eq!(a, 2);
            agent.observe(a, EnvStep::new(0, 1)).unwrap();
        }
    }

    #[test]
    fn observe_rejects_a_different_action() {
        let mut agent = AiqiAgent::new(config(), bandit(), Rng::new(0)).unwrap();
        let a = agent.act().unwrap();
        let before = agent.history().len();
        assert!(matches!(
            agent.observe((a + 1) % 3, EnvStep::new(0, 0)),
            Err(AgentError::ActionMismatch { .. })
        ));
        agent.observe(a, EnvStep::new(0, 0)).unwrap();
        assert_eq!(agent.history().len(), before + 1);
    }

    #[test]
    fn exploration_draws_happen_on_every_step() {
        let greedy = AgentConfig { tau: 0.0, epsilon0: 0.0, ..config() };
        let mut a = AiqiAgent::new(greedy, bandit(), Rng::new(3)).unwrap();
        let mut b = AiqiAgent::new(config(), bandit(), Rng::new(3)).unwrap();
        for _ in 0..20 {
            let x = a.act().unwrap();
            a.observe(x, EnvStep::new(0, 0)).unwrap();
            let y = b.act().unwrap();
            b.observe(y, EnvStep::new(0, 0)).unwrap();
        }
        assert_eq!(a.rng.next_u64(), b.rng.next_u64());
    }

    #[test]
    fn frozen_predictor_stops_learning_after_the_learning_period() {
        let cfg = AgentConfig {
            learning_period: 100,
            terminating_age: 300,
            freeze_after_learning: true,
            ..config()
        };
        let mut agent = AiqiAgent::new(cfg, bandit(), Rng::new(6)).unwrap();
        let learned = |agent: &AiqiAgent| -> u64 {
            agent.predictor().phases().iter().map(|p| p.tree().learned_bits()).sum()
        };
        for _ in 0..150 {
            let a = agent.act().unwrap();
            agent.observe(a, EnvStep::new(0, 1)).unwrap();
        }
        let frozen = learned(&agent);
        for _ in 0..100 {
            let a = agent.act().unwrap();
            agent.observe(a, EnvStep::new(0, 1)).unwrap();
        }
        assert_eq!(learned(&agent), frozen);
    }

    #[test]
    fn snapshot_round_trip_continues_identically() {
        let mut a = AiqiAgent::new(config(), bandit(), Rng::new(8)).unwrap();
        let mut env = Rng::new(80);
        for _ in 0..300 {
            let x = a.act().unwrap();
            a.observe(x, EnvStep::new(0, env.below(2))).unwrap();
        }
        let mut w = ByteWriter::new();
        a.save_state(&mut w);
        let bytes = w.into_inner();
        let mut b = AiqiAgent::new(config(), bandit(), Rng::new(0)).unwrap();
        b.load_state(&mut ByteReader::new(&bytes)).unwrap();
        let mut env_b = env.clone();
        for _ in 0..300 {
            let x = a.act().unwrap();
            let y = b.act().unwrap();
            assert_eq!(x, y);
            a.observe(x, EnvStep::new(0, env.below(2))).unwrap();
            b.observe(y, EnvStep::new(0, env_b.below(2))).unwrap();
        }
    }
}
