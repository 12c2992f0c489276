//! Run configuration: TOML with `[run]`, `[aiqi]`, `[mcaixi]` and `[env]`
//! sections. Anything left out falls back to the defaults for the chosen
//! environment, which follow the published hyperparameter table.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use aiqi::agent::AgentConfig;
use aiqi::baseline::{McAixiConfig, DEFAULT_EXPLORATION};
use aiqi::envs::CounterexampleConfig;
use aiqi::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvName {
    Rps,
    Kuhn,
    Grid,
    Counterexample,
    Bandit,
}

impl EnvName {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvName::Rps => "rps",
            EnvName::Kuhn => "kuhn",
            EnvName::Grid => "grid",
            EnvName::Counterexample => "counterexample",
            EnvName::Bandit => "bandit",
        }
    }
}

impl FromStr for EnvName {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rps" => Ok(EnvName::Rps),
            "kuhn" => Ok(EnvName::Kuhn),
            "grid" => Ok(EnvName::Grid),
            "counterexample" => Ok(EnvName::Counterexample),
            "bandit" => Ok(EnvName::Bandit),
            _ => Err(HarnessError::Config(format!("unknown environment {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentName {
    Aiqi,
    Mcaixi,
    Random,
    FixedOptimal,
    Historic,
}

impl AgentName {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentName::Aiqi => "aiqi",
            AgentName::Mcaixi => "mcaixi",
            AgentName::Random => "random",
            AgentName::FixedOptimal => "fixed-optimal",
            AgentName::Historic => "historic",
        }
    }
}

impl FromStr for AgentName {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "aiqi" => Ok(AgentName::Aiqi),
            "mcaixi" => Ok(AgentName::Mcaixi),
            "random" => Ok(AgentName::Random),
            "fixed-optimal" => Ok(AgentName::FixedOptimal),
            "historic" => Ok(AgentName::Historic),
            _ => Err(HarnessError::Config(format!("unknown agent {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub env: EnvName,
    pub agent: AgentName,
    pub steps: u64,
    pub seed: u64,
    pub ema_alpha: f64,
    /// Stop early once this much wall-clock time has passed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_budget_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AiqiSection {
    pub horizon: usize,
    pub period: usize,
    pub levels: usize,
    pub gamma: f64,
    pub tau: f64,
    pub epsilon0: f64,
    pub decay: f64,
    pub depth: usize,
    pub learning_period: u64,
    pub terminating_age: u64,
    pub freeze_after_learning: bool,
}

impl AiqiSection {
    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            tau: self.tau,
            epsilon0: self.epsilon0,
            decay: self.decay,
            learning_period: self.learning_period,
            terminating_age: self.terminating_age,
            gamma: self.gamma,
            horizon: self.horizon,
            period: self.period,
            levels: self.levels,
            depth: self.depth,
            freeze_after_learning: self.freeze_after_learning,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McAixiSection {
    pub depth: usize,
    pub horizon: usize,
    pub simulations: usize,
    pub exploration: f64,
    pub epsilon0: f64,
    pub decay: f64,
    pub learning_period: u64,
    pub terminating_age: u64,
}

impl McAixiSection {
    pub fn agent_config(&self) -> McAixiConfig {
        McAixiConfig {
            depth: self.depth,
            horizon: self.horizon,
            simulations: self.simulations,
            exploration: self.exploration,
            epsilon0: self.epsilon0,
            decay: self.decay,
            learning_period: self.learning_period,
            terminating_age: self.terminating_age,
        }
    }
}

/// Parameters of the parametric environments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    /// Counterexample: number of actions.
    pub actions: usize,
    /// Counterexample: episode length.
    pub episode_length: usize,
    /// Counterexample: the consolation reward, as a fraction like "1/5".
    pub delta: String,
    /// Bandit: success probability per arm, as fractions.
    pub arms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub aiqi: AiqiSection,
    pub mcaixi: McAixiSection,
    pub env: EnvSection,
}

pub fn parse_fraction(s: &str) -> Result<Rational64, HarnessError> {
    let r = Rational64::from_str(s.trim())
        .map_err(|_| HarnessError::Config(format!("{s:?} is not a fraction")))?;
    Ok(r)
}

impl RunConfig {
    /// Defaults for an environment and agent.
    pub fn defaults(env: EnvName, agent: AgentName) -> Self {
        // (H, M, depth, γ, MC-AIXI depth, search horizon, simulations, MC-AIXI ε0)
        let (horizon, levels, depth, gamma, mc_depth, mc_horizon, simulations, mc_eps) = match env {
            EnvName::Rps => (4, 9, 32, 0.5, 32, 4, 200, 0.999),
            EnvName::Kuhn => (2, 9, 42, 0.5, 42, 2, 200, 0.99),
            EnvName::Grid => (12, 13, 96, 0.8, 96, 12, 40, 0.999),
            EnvName::Counterexample => (2, 41, 16, 0.5, 16, 2, 200, 0.999),
            EnvName::Bandit => (2, 9, 8, 0.5, 8, 1, 100, 0.999),
        };
        let mc_decay = if env == EnvName::Rps { 0.99999 } else { 0.9999 };
        RunConfig {
            run: RunSection {
                env,
                agent,
                steps: if agent == AgentName::Mcaixi { 10_000 } else { 100_000 },
                seed: 0,
                ema_alpha: 1e-3,
                time_budget_s: None,
                snapshot_every: None,
                snapshot: None,
                csv: None,
                svg: None,
            },
            aiqi: AiqiSection {
                horizon,
                period: horizon,
                levels,
                gamma,
                tau: 0.01,
                epsilon0: 0.999,
                decay: 0.9999,
                depth,
                learning_period: 100_000,
                terminating_age: 100_000,
                freeze_after_learning: false,
            },
            mcaixi: McAixiSection {
                depth: mc_depth,
                horizon: mc_horizon,
                simulations,
                exploration: DEFAULT_EXPLORATION,
                epsilon0: mc_eps,
                decay: mc_decay,
                learning_period: 5_000,
                terminating_age: 10_000,
            },
            env: EnvSection {
                actions: 4,
                episode_length: 2,
                delta: "1/5".into(),
                arms: vec!["1/10".into(), "9/10".into()],
            },
        }
    }

    /// Parse TOML text, filling gaps from the defaults of the environment
    /// and agent it names (or the given fallbacks).
    pub fn from_toml(
        text: &str,
        env: Option<EnvName>,
        agent: Option<AgentName>,
    ) -> Result<Self, HarnessError> {
        let user: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        let named = |key: &str| -> Option<String> {
            user.get("run")?.get(key)?.as_str().map(str::to_owned)
        };
        let env = match env {
            Some(e) => e,
            None => named("env").as_deref().unwrap_or("rps").parse()?,
        };
        let agent = match agent {
            Some(a) => a,
            None => named("agent").as_deref().unwrap_or("aiqi").parse()?,
        };
        let defaults = Self::defaults(env, agent);
        let mut merged = toml::Table::try_from(&defaults)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        merge(&mut merged, user);
        let run = merged
            .get_mut("run")
            .and_then(|v| v.as_table_mut())
            .expect("defaults have a run section");
        run.insert("env".into(), env.as_str().into());
        run.insert("agent".into(), agent.as_str().into());
        let cfg: RunConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, env: Option<EnvName>, agent: Option<AgentName>) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text, env, agent)
    }

    /// Apply a `section.key=value` override; the value is parsed as TOML,
    /// falling back to a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<(), HarnessError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("expected key=value, got {assignment:?}")))?;
        let (section, field) = key
            .trim()
            .split_once('.')
            .ok_or_else(|| HarnessError::Config(format!("expected section.key, got {key:?}")))?;
        let value = value.trim();
        let parsed: toml::Value = format!("v = {value}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_owned()));
        let mut table =
            toml::Table::try_from(&*self).map_err(|e| HarnessError::Config(e.to_string()))?;
        let sec = table
            .get_mut(section)
            .and_then(|v| v.as_table_mut())
            .ok_or_else(|| HarnessError::Config(format!("no section [{section}]")))?;
        sec.insert(field.to_owned(), parsed);
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        *self = cfg;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn counterexample(&self) -> Result<CounterexampleConfig, HarnessError> {
        CounterexampleConfig::new(
            self.env.actions,
            self.env.episode_length,
            parse_fraction(&self.env.delta)?,
        )
        .map_err(HarnessError::Config)
    }

    pub fn arms(&self) -> Result<Vec<Rational64>, HarnessError> {
        let arms: Vec<Rational64> = self
            .env
            .arms
            .iter()
            .map(|s| parse_fraction(s))
            .collect::<Result<_, _>>()?;
        if arms.len() < 2
            || arms
                .iter()
                .any(|p| *p < Rational64::from_integer(0) || *p > Rational64::from_integer(1))
        {
            return Err(HarnessError::Config("bandit needs at least two arms in [0, 1]".into()));
        }
        Ok(arms)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if !(self.run.ema_alpha > 0.0 && self.run.ema_alpha <= 1.0) {
            return bad("ema_alpha must lie in (0, 1]".into());
        }
        let age = match self.run.agent {
            AgentName::Aiqi => Some(self.aiqi.terminating_age),
            AgentName::Mcaixi => Some(self.mcaixi.terminating_age),
            _ => None,
        };
        if let Some(age) = age {
            if self.run.steps > age {
                return bad(format!(
                    "steps ({}) exceed the terminating age ({age})",
                    self.run.steps
                ));
            }
        }
        if self.run.snapshot_every.is_some() && self.run.snapshot.is_none() {
            return bad("snapshot_every needs a snapshot path".into());
        }
        self.aiqi
            .agent_config()
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.mcaixi
            .agent_config()
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        match self.run.env {
            EnvName::Counterexample => {
                self.counterexample()?;
            }
            EnvName::Bandit => {
                self.arms()?;
            }
            _ => {}
        }
        if self.run.agent == AgentName::Historic && self.run.env != EnvName::Counterexample {
            return bad("the historic policy exists only for the counterexample".into());
        }
        if self.run.agent == AgentName::FixedOptimal && self.run.env == EnvName::Kuhn {
            return bad("kuhn has no finite-state model to optimize over".into());
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
