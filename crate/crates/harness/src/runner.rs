//! Agent/environment wiring, the act/observe loop, CSV logs and snapshots.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use aiqi::agent::{Agent, AiqiAgent};
use aiqi::baseline::McAixiAgent;
use aiqi::envs::{
    BernoulliBandit, BiasedRps, CounterexampleModel, Environment, FiniteStateModel, Grid4x4,
    KuhnPoker, ModelEnvironment,
};
use aiqi::oracle::optimal_policy;
use aiqi::policies::{MarkovPolicyAgent, RandomAgent};
use aiqi::wire::{ByteReader, ByteWriter};
use aiqi::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{AgentName, EnvName, RunConfig};
use crate::error::HarnessError;
use crate::plot;

/// Discount used to derive the fixed-optimal reference policy.
pub const FIXED_OPTIMAL_GAMMA: f64 = 0.99;

const SNAPSHOT_MAGIC: [u8; 4] = *b"AQRS";
const SNAPSHOT_VERSION: u16 = 1;

/// One CSV row. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub step: u64,
    pub action: usize,
    pub observation: usize,
    pub reward_raw: f64,
    pub reward_norm: f64,
    pub ema_reward: f64,
    pub epsilon: f64,
    pub wallclock_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub rows: Vec<Row>,
}

impl RunLog {
    pub fn mean_reward(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.reward_norm))
    }

    /// Mean normalized reward over the last `n` rows.
    pub fn tail_mean(&self, n: usize) -> f64 {
        let start = self.rows.len().saturating_sub(n);
        mean(self.rows[start..].iter().map(|r| r.reward_norm))
    }

    pub fn final_ema(&self) -> Option<f64> {
        self.rows.last().map(|r| r.ema_reward)
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn ema_update(prev: f64, r: f64, alpha: f64) -> f64 {
    alpha * r + (1.0 - alpha) * prev
}

/// The finite-state model behind an environment, where there is one.
pub fn build_model(cfg: &RunConfig) -> Result<Option<Arc<dyn FiniteStateModel>>, HarnessError> {
    Ok(match cfg.run.env {
        EnvName::Rps => Some(Arc::new(BiasedRps::new())),
        EnvName::Grid => Some(Arc::new(Grid4x4::new())),
        EnvName::Counterexample => Some(Arc::new(CounterexampleModel::new(cfg.counterexample()?))),
        EnvName::Bandit => Some(Arc::new(BernoulliBandit::new(cfg.arms()?))),
        EnvName::Kuhn => None,
    })
}

pub fn build_env(cfg: &RunConfig) -> Result<Box<dyn Environment>, HarnessError> {
    Ok(match cfg.run.env {
        EnvName::Rps => Box::new(ModelEnvironment::new(BiasedRps::new())),
        EnvName::Grid => Box::new(ModelEnvironment::new(Grid4x4::new())),
        EnvName::Counterexample => Box::new(ModelEnvironment::new(CounterexampleModel::new(
            cfg.counterexample()?,
        ))),
        EnvName::Bandit => Box::new(ModelEnvironment::new(BernoulliBandit::new(cfg.arms()?))),
        EnvName::Kuhn => Box::new(KuhnPoker::new()),
    })
}

pub fn build_agent(cfg: &RunConfig, env: &dyn Environment) -> Result<Box<dyn Agent>, HarnessError> {
    let alphabets = env.alphabets().clone();
    let rng = Rng::with_stream(cfg.run.seed, 0);
    let need_model = || -> Result<Arc<dyn FiniteStateModel>, HarnessError> {
        build_model(cfg)?.ok_or_else(|| {
            HarnessError::Config(format!("{} has no finite-state model", cfg.run.env.as_str()))
        })
    };
    Ok(match cfg.run.agent {
        AgentName::Aiqi => Box::new(AiqiAgent::new(cfg.aiqi.agent_config(), alphabets, rng)?),
        AgentName::Mcaixi => Box::new(McAixiAgent::new(cfg.mcaixi.agent_config(), alphabets, rng)?),
        AgentName::Random => Box::new(RandomAgent::new(alphabets, rng)),
        AgentName::FixedOptimal => {
            let model = need_model()?;
            let table = optimal_policy(model.as_ref(), FIXED_OPTIMAL_GAMMA);
            Box::new(MarkovPolicyAgent::new("fixed-optimal", model, table, rng)?)
        }
        AgentName::Historic => {
            let model = CounterexampleModel::new(cfg.counterexample()?);
            let table = model.historic_policy();
            Box::new(MarkovPolicyAgent::new("historic", Arc::new(model), table, rng)?)
        }
    })
}

/// A live run: agent, environment and the bookkeeping needed to resume.
pub struct Session {
    cfg: RunConfig,
    env: Box<dyn Environment>,
    agent: Box<dyn Agent>,
    env_rng: Rng,
    step: u64,
    ema: Option<f64>,
    /// Wall-clock seconds accumulated before the current process.
    elapsed_before: f64,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("env", &self.env.name())
            .field("agent", &self.agent.name())
            .field("step", &self.step)
            .finish()
    }
}

impl Session {
    pub fn new(cfg: RunConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let env = build_env(&cfg)?;
        let agent = build_agent(&cfg, env.as_ref())?;
        let env_rng = Rng::with_stream(cfg.run.seed, 1);
        Ok(Self {
            cfg,
            env,
            agent,
            env_rng,
            step: 0,
            ema: None,
            elapsed_before: 0.0,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn steps_done(&self) -> u64 {
        self.step
    }

    pub fn agent(&self) -> &dyn Agent {
        self.agent.as_ref()
    }

    pub fn agent_mut(&mut self) -> &mut dyn Agent {
        self.agent.as_mut()
    }

    pub fn env(&self) -> &dyn Environment {
        self.env.as_ref()
    }

    /// One act/observe cycle. `clock` marks the start of this process's
    /// share of the run.
    pub fn step(&mut self, clock: Instant) -> Result<Row, HarnessError> {
        let epsilon = self.agent.exploration_rate();
        let action = self.agent.act()?;
        let percept = self.env.step(action, &mut self.env_rng);
        self.agent.observe(action, percept)?;
        let alphabets = self.env.alphabets();
        let reward_raw = alphabets.raw_level(percept.reward);
        let reward_norm = alphabets.normalized_level(percept.reward);
        let ema = match self.ema {
            None => reward_norm,
            Some(prev) => ema_update(prev, reward_norm, self.cfg.run.ema_alpha),
        };
        self.ema = Some(ema);
        self.step += 1;
        Ok(Row {
            step: self.step,
            action,
            observation: percept.observation,
            reward_raw,
            reward_norm,
            ema_reward: ema,
            epsilon,
            wallclock_s: self.elapsed_before + clock.elapsed().as_secs_f64(),
        })
    }

    /// Run until `cfg.run.steps` in total or the time budget, handing each
    /// row to `sink`. Writes periodic snapshots when configured.
    pub fn run_with(&mut self, mut sink: impl FnMut(&Row) -> Result<(), HarnessError>) -> Result<(), HarnessError> {
        let clock = Instant::now();
        let budget = self.cfg.run.time_budget_s;
        while self.step < self.cfg.run.steps {
            let row = self.step(clock)?;
            sink(&row)?;
            if let (Some(every), Some(path)) = (self.cfg.run.snapshot_every, &self.cfg.run.snapshot) {
                if every > 0 && self.step.is_multiple_of(every) {
                    let bytes = self.snapshot_bytes(row.wallclock_s);
                    std::fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))?;
                }
            }
            if budget.is_some_and(|b| row.wallclock_s >= b) {
                break;
            }
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<RunLog, HarnessError> {
        let mut log = RunLog::default();
        self.run_with(|row| {
            log.rows.push(row.clone());
            Ok(())
        })?;
        Ok(log)
    }

    /// Serialize the session. `elapsed` is the wall-clock total so far.
    pub fn snapshot_bytes(&self, elapsed: f64) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.put_bytes(&SNAPSHOT_MAGIC);
        w.put_u16(SNAPSHOT_VERSION);
        w.put_str(self.cfg.run.env.as_str());
        w.put_str(self.cfg.run.agent.as_str());
        w.put_u64(self.step);
        match self.ema {
            None => w.put_u8(0),
            Some(e) => {
                w.put_u8(1);
                w.put_f64(e);
            }
        }
        w.put_f64(elapsed);
        self.env_rng.write(&mut w);
        let mut env = ByteWriter::new();
        self.env.save_state(&mut env);
        w.put_blob(&env.into_inner());
        let mut agent = ByteWriter::new();
        self.agent.save_state(&mut agent);
        w.put_blob(&agent.into_inner());
        w.into_inner()
    }

    /// Rebuild a session from `cfg` and a snapshot taken under the same
    /// environment and agent.
    pub fn restore(cfg: RunConfig, bytes: &[u8]) -> Result<Self, HarnessError> {
        let snap = |e: aiqi::wire::WireError| HarnessError::Snapshot(e.to_string());
        let mut r = ByteReader::new(bytes);
        r.expect_magic(SNAPSHOT_MAGIC).map_err(snap)?;
        r.expect_version(SNAPSHOT_VERSION).map_err(snap)?;
        let env_name = r.get_str().map_err(snap)?;
        let agent_name = r.get_str().map_err(snap)?;
        if env_name != cfg.run.env.as_str() {
            return Err(HarnessError::Snapshot(format!(
                "snapshot is for environment {env_name:?}, not {:?}",
                cfg.run.env.as_str()
            )));
        }
        if agent_name != cfg.run.agent.as_str() {
            return Err(HarnessError::Snapshot(format!(
                "snapshot is for agent {agent_name:?}, not {:?}",
                cfg.run.agent.as_str()
            )));
        }
        let mut session = Session::new(cfg)?;
        session.step = r.get_u64().map_err(snap)?;
        session.ema = match r.get_u8().map_err(snap)? {
            0 => None,
            _ => Some(r.get_f64().map_err(snap)?),
        };
        session.elapsed_before = r.get_f64().map_err(snap)?;
        session.env_rng = Rng::read(&mut r).map_err(snap)?;
        let env = r.get_blob().map_err(snap)?;
        session.env.load_state(&mut ByteReader::new(env)).map_err(snap)?;
        let agent = r.get_blob().map_err(snap)?;
        session
            .agent
            .load_state(&mut ByteReader::new(agent))
            .map_err(|e| HarnessError::Snapshot(e.to_string()))?;
        if !r.is_at_end() {
            return Err(HarnessError::Snapshot("trailing bytes".into()));
        }
        Ok(session)
    }

    pub fn save(&self, path: &Path, elapsed: f64) -> Result<(), HarnessError> {
        std::fs::write(path, self.snapshot_bytes(elapsed)).map_err(|e| HarnessError::io(path, e))
    }

    pub fn load(cfg: RunConfig, path: &Path) -> Result<Self, HarnessError> {
        let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
        Self::restore(cfg, &bytes)
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record([
            "step", "action", "observation", "reward_raw", "reward_norm", "ema_reward", "epsilon",
            "wallclock_s",
        ])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<Row>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::io(path, e))?;
    r.deserialize()
        .collect::<Result<Vec<Row>, _>>()
        .map_err(|e| HarnessError::io(path, e))
}

/// Run a session to completion and write the configured outputs.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunLog, HarnessError> {
    let mut session = Session::new(cfg.clone())?;
    finish(&mut session)
}

/// Continue a restored session to completion and write its outputs.
pub fn finish(session: &mut Session) -> Result<RunLog, HarnessError> {
    let log = session.run()?;
    let cfg = session.config();
    if let Some(path) = &cfg.run.csv {
        let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
        write_csv(std::io::BufWriter::new(file), &log.rows).map_err(|e| HarnessError::io(path, e))?;
    }
    if let Some(path) = &cfg.run.svg {
        let title = format!(
            "{} on {} (seed {})",
            cfg.run.agent.as_str(),
            cfg.run.env.as_str(),
            cfg.run.seed
        );
        let series = plot::Series::from_rows(cfg.run.agent.as_str(), &log.rows);
        let svg = plot::render(&title, &[series]);
        std::fs::write(path, svg).map_err(|e| HarnessError::io(path, e))?;
    }
    if let Some(path) = &cfg.run.snapshot {
        let elapsed = log.rows.last().map_or(0.0, |r| r.wallclock_s);
        session.save(path, elapsed)?;
    }
    Ok(log)
}
