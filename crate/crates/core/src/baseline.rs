//! MC-AIXI-CTW: a CTW model of the percept stream conditioned on actions,
//! planned over with ρUCT.
//!
//! Search constants: exploration constant `C = √2` on values normalized to
//! `[0, 1]` by dividing the summed normalized reward by the search horizon;
//! unvisited decision nodes are valued by a uniformly random rollout;
//! unexplored root actions are tried in random order before UCB kicks in.

use crate::agent::{Agent, AgentError};
use crate::alphabet::Alphabets;
use crate::codec::{bit_width, bits_msb_first};
use crate::ctw::{ContextTree, CtwError};
use crate::history::{EnvStep, History, Step};
use crate::rng::Rng;
use crate::wire::{ByteReader, ByteWriter};

pub const DEFAULT_EXPLORATION: f64 = std::f64::consts::SQRT_2;

/// Action-conditional CTW model over percepts.
#[derive(Debug, Clone)]
pub struct EnvModel {
    tree: ContextTree,
    action_width: u32,
    observation_width: u32,
    reward_width: u32,
    observations: usize,
    rewards: usize,
    codes: Vec<u64>,
    normalized: Vec<f64>,
}

impl EnvModel {
    pub fn new(alphabets: &Alphabets, depth: usize) -> Result<Self, CtwError> {
        let observation_width = bit_width(alphabets.observation_count());
        let reward_width = bit_width(alphabets.reward_count());
        let observations = alphabets.observation_count();
        let rewards = alphabets.reward_count();
        let codes = (0..observations as u64)
            .flat_map(|o| (0..rewards as u64).map(move |r| (o << reward_width) | r))
            .collect();
        Ok(Self {
            tree: ContextTree::new(depth)?,
            action_width: bit_width(alphabets.action_count()),
            observation_width,
            reward_width,
            observations,
            rewards,
            codes,
            normalized: alphabets.normalized_levels().to_vec(),
        })
    }

    pub fn tree(&self) -> &ContextTree {
        &self.tree
    }

    pub fn tree_mut(&mut self) -> &mut ContextTree {
        &mut self.tree
    }

    fn percept_width(&self) -> u32 {
        self.observation_width + self.reward_width
    }

    fn percept_index(&self, e: EnvStep) -> usize {
        e.observation * self.rewards + e.reward
    }

    fn percept_at(&self, index: usize) -> EnvStep {
        EnvStep::new(index / self.rewards, index % self.rewards)
    }

    /// Number of distinct percepts.
    pub fn percept_count(&self) -> usize {
        self.observations * self.rewards
    }

    pub fn normalized_reward(&self, reward: usize) -> f64 {
        self.normalized[reward]
    }

    /// Append an action as context.
    pub fn update_action(&mut self, action: usize) {
        for b in bits_msb_first(action as u64, self.action_width) {
            self.tree.update(b, false);
        }
    }

    /// Learn a percept.
    pub fn update_percept(&mut self, e: EnvStep) {
        let code = self.codes[self.percept_index(e)];
        for b in bits_msb_first(code, self.percept_width()) {
            self.tree.update(b, true);
        }
    }

    /// Predicted distribution over percepts, indexed by
    /// `observation · |rewards| + reward`.
    pub fn percept_distribution(&mut self) -> Vec<f64> {
        self.tree.block_distribution(&self.codes, self.percept_width())
    }

    /// Draw a percept from the model and learn it.
    pub fn sample_percept(&mut self, rng: &mut Rng) -> EnvStep {
        let width = self.percept_width();
        if self.codes.len() == 1usize << width {
            // every code is valid: sample bit by bit, learning as we go
            let mut code = 0u64;
            for _ in 0..width {
                let b = (rng.uniform() >= self.tree.predict(0)) as u8;
                self.tree.update(b, true);
                code = (code << 1) | b as u64;
            }
            let o = (code >> self.reward_width) as usize;
            let r = (code & ((1 << self.reward_width) - 1)) as usize;
            return EnvStep::new(o, r);
        }
        let dist = self.percept_distribution();
        let e = self.percept_at(rng.categorical(&dist));
        self.update_percept(e);
        e
    }
}

#[derive(Debug, Clone)]
struct Decision {
    visits: u64,
    mean: f64,
    children: Vec<Option<u32>>,
}

#[derive(Debug, Clone)]
struct Chance {
    visits: u64,
    mean: f64,
    children: Vec<(u32, u32)>,
}

/// Per-action statistics at the root after a search.
#[derive(Debug, Clone, PartialEq)]
pub struct RootStats {
    pub visits: Vec<u64>,
    /// Mean summed normalized reward divided by the horizon.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    pub horizon: usize,
    pub simulations: usize,
    pub exploration: f64,
}

struct Search<'a> {
    model: &'a mut EnvModel,
    rng: &'a mut Rng,
    params: SearchParams,
    actions: usize,
    decisions: Vec<Decision>,
    chances: Vec<Chance>,
}

impl Search<'_> {
    fn new_decision(&mut self) -> u32 {
        self.decisions.push(Decision {
            visits: 0,
            mean: 0.0,
            children: vec![None; self.actions],
        });
        (self.decisions.len() - 1) as u32
    }

    fn rollout(&mut self, remaining: usize) -> f64 {
        let mut total = 0.0;
        for _ in 0..remaining {
            let a = self.rng.below(self.actions);
            self.model.update_action(a);
            let e = self.model.sample_percept(self.rng);
            total += self.model.normalized_reward(e.reward);
        }
        total
    }

    fn select(&mut self, node: u32) -> usize {
        let d = &self.decisions[node as usize];
        let unexplored: Vec<usize> = (0..self.actions)
            .filter(|&a| match d.children[a] {
                None => true,
                Some(c) => self.chances[c as usize].visits == 0,
            })
            .collect();
        if !unexplored.is_empty() {
            return unexplored[self.rng.below(unexplored.len())];
        }
        let ln = (d.visits as f64).ln();
        let scale = self.params.horizon as f64;
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for a in 0..self.actions {
            let c = &self.chances[d.children[a].expect("explored") as usize];
            let score = c.mean / scale + self.params.exploration * (ln / c.visits as f64).sqrt();
            if score > best_score {
                best_score = score;
                best = a;
            }
        }
        best
    }

    fn simulate_decision(&mut self, node: u32, remaining: usize, force_expand: bool) -> f64 {
        if remaining == 0 {
            return 0.0;
        }
        let value = if self.decisions[node as usize].visits == 0 && !force_expand {
            self.rollout(remaining)
        } else {
            let a = self.select(node);
            let child = match self.decisions[node as usize].children[a] {
                Some(c) => c,
                None => {
                    self.chances.push(Chance {
                        visits: 0,
                        mean: 0.0,
                        children: Vec::new(),
                    });
                    let c = (self.chances.len() - 1) as u32;
                    self.decisions[node as usize].children[a] = Some(c);
                    c
                }
            };
            self.model.update_action(a);
            self.simulate_chance(child, remaining)
        };
        let d = &mut self.decisions[node as usize];
        d.visits += 1;
        d.mean += (value - d.mean) / d.visits as f64;
        value
    }

    fn simulate_chance(&mut self, node: u32, remaining: usize) -> f64 {
        let e = self.model.sample_percept(self.rng);
        let key = self.model.percept_index(e) as u32;
        let found = self.chances[node as usize]
            .children
            .iter()
            .find(|(k, _)| *k == key)
            .map(|&(_, c)| c);
        let child = match found {
            Some(c) => c,
            None => {
                let c = self.new_decision();
                self.chances[node as usize].children.push((key, c));
                c
            }
        };
        let value =
            self.model.normalized_reward(e.reward) + self.simulate_decision(child, remaining - 1, false);
        let c = &mut self.chances[node as usize];
        c.visits += 1;
        c.mean += (value - c.mean) / c.visits as f64;
        value
    }
}

/// Run ρUCT from the model's current context and return the root action
/// with the highest mean value (action 0 when no simulation is run),
/// together with the root statistics. The model is left unchanged.
pub fn uct_search(
    model: &mut EnvModel,
    actions: usize,
    params: SearchParams,
    rng: &mut Rng,
) -> (usize, RootStats) {
    let mut search = Search {
        model,
        rng,
        params,
        actions,
        decisions: Vec::new(),
        chances: Vec::new(),
    };
    let root = search.new_decision();
    for _ in 0..params.simulations {
        let token = search.model.tree.checkpoint();
        search.simulate_decision(root, params.horizon, true);
        search.model.tree.revert(token).expect("own checkpoint");
    }
    let scale = params.horizon as f64;
    let mut stats = RootStats {
        visits: vec![0; actions],
        values: vec![0.0; actions],
    };
    for a in 0..actions {
        if let Some(c) = search.decisions[root as usize].children[a] {
            let c = &search.chances[c as usize];
            stats.visits[a] = c.visits;
            stats.values[a] = c.mean / scale;
        }
    }
    let mut best = 0;
    for a in 1..actions {
        if stats.visits[a] > 0 && (stats.visits[best] == 0 || stats.values[a] > stats.values[best]) {
            best = a;
        }
    }
    (best, stats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McAixiConfig {
    pub depth: usize,
    pub horizon: usize,
    pub simulations: usize,
    pub exploration: f64,
    pub epsilon0: f64,
    pub decay: f64,
    pub learning_period: u64,
    pub terminating_age: u64,
}

impl McAixiConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::Config(m.into()));
        if self.horizon == 0 {
            return bad("search horizon must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.epsilon0) || !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("exploration schedule out of range");
        }
        if self.exploration < 0.0 {
            return bad("exploration constant must be nonnegative");
        }
        if self.learning_period > self.terminating_age {
            return bad("learning period exceeds terminating age");
        }
        if self.depth > crate::ctw::MAX_DEPTH {
            return bad("context depth exceeds the maximum");
        }
        Ok(())
    }

    pub fn exploration_rate(&self, completed: u64) -> f64 {
        if completed >= self.learning_period {
            0.0
        } else {
            self.epsilon0 * self.decay.powf(completed as f64)
        }
    }
}

const MAGIC: [u8; 4] = *b"MCX1";
const VERSION: u16 = 1;

#[derive(Debug, Clone)]
pub struct McAixiAgent {
    config: McAixiConfig,
    alphabets: Alphabets,
    model: EnvModel,
    history: History,
    rng: Rng,
    chosen: Option<usize>,
    last_stats: Option<RootStats>,
}

impl McAixiAgent {
    pub fn new(config: McAixiConfig, alphabets: Alphabets, rng: Rng) -> Result<Self, AgentError> {
        config.validate()?;
        let model = EnvModel::new(&alphabets, config.depth)
            .map_err(|e| AgentError::Config(e.to_string()))?;
        Ok(Self {
            config,
            alphabets,
            model,
            history: History::new(),
            rng,
            chosen: None,
            last_stats: None,
        })
    }

    pub fn config(&self) -> &McAixiConfig {
        &self.config
    }

    pub fn model(&self) -> &EnvModel {
        &self.model
    }

    pub fn last_root_stats(&self) -> Option<&RootStats> {
        self.last_stats.as_ref()
    }
}

impl Agent for McAixiAgent {
    fn name(&self) -> &'static str {
        "mcaixi"
    }

    fn alphabets(&self) -> &Alphabets {
        &self.alphabets
    }

    fn act(&mut self) -> Result<usize, AgentError> {
        let eps = self.exploration_rate();
        let k = self.alphabets.action_count();
        let action = if eps > 0.0 && self.rng.uniform() < eps {
            self.last_stats = None;
            self.rng.below(k)
        } else {
            let params = SearchParams {
                horizon: self.config.horizon,
                simulations: self.config.simulations,
                exploration: self.config.exploration,
            };
            let (a, stats) = uct_search(&mut self.model, k, params, &mut self.rng);
            self.last_stats = Some(stats);
            a
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
        self.history.push(Step::new(action, percept), &self.alphabets)?;
        self.model.update_action(action);
        self.model.update_percept(percept);
        self.chosen = None;
        Ok(())
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
        self.model.tree.write(w);
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
        let tree = ContextTree::read(r).map_err(|e| AgentError::Config(e.to_string()))?;
        self.history = history;
        self.rng = rng;
        self.chosen = chosen;
        self.model.tree = tree;
        self.last_stats = None;
        Ok(())
    }
}
