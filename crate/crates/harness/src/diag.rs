//! Oracle diagnostics: train AIQI on a small environment, freeze its policy
//! at checkpoints and compare its return predictions with exact ones.

use aiqi::agent::{Agent, AiqiAgent};
use aiqi::oracle::{diagnose, freeze_policy, Diagnostics};
use aiqi::Rng;
use serde::Serialize;

use crate::config::{AgentName, RunConfig};
use crate::error::HarnessError;
use crate::runner::{build_env, build_model};

/// Enumeration budget for exact return distributions.
pub const DIAG_BUDGET: u64 = 5_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagRow {
    pub step: u64,
    pub state: usize,
    pub delta_psi: f64,
    pub delta_q: f64,
    pub delta_1: f64,
    pub delta_inf: f64,
}

impl DiagRow {
    fn new(step: u64, state: usize, d: Diagnostics) -> Self {
        DiagRow {
            step,
            state,
            delta_psi: d.delta_psi,
            delta_q: d.delta_q,
            delta_1: d.delta_1,
            delta_inf: d.delta_inf,
        }
    }
}

/// Train for `cfg.run.steps` steps, diagnosing every `every` steps. The
/// frozen policy uses the agent's exploration rate at the checkpoint.
pub fn run_diagnostics(cfg: &RunConfig, every: u64) -> Result<Vec<DiagRow>, HarnessError> {
    if cfg.run.agent != AgentName::Aiqi {
        return Err(HarnessError::Config("diagnostics need agent = \"aiqi\"".into()));
    }
    cfg.validate()?;
    let model = build_model(cfg)?.ok_or_else(|| {
        HarnessError::Config(format!("{} has no finite-state model", cfg.run.env.as_str()))
    })?;
    let mut env = build_env(cfg)?;
    let mut agent = AiqiAgent::new(
        cfg.aiqi.agent_config(),
        env.alphabets().clone(),
        Rng::with_stream(cfg.run.seed, 0),
    )?;
    let mut env_rng = Rng::with_stream(cfg.run.seed, 1);
    let every = every.max(1);
    let mut out = Vec::new();
    for step in 1..=cfg.run.steps {
        let a = agent.act()?;
        let e = env.step(a, &mut env_rng);
        agent.observe(a, e)?;
        if step % every == 0 || step == cfg.run.steps {
            let state = env.model_state().expect("model-backed environment");
            let eps = agent.exploration_rate();
            let (table, probes) = freeze_policy(&mut agent, model.as_ref(), state, eps)?;
            let predicted = probes[state].as_ref().expect("current state is reachable");
            let d = diagnose(
                model.as_ref(),
                &table,
                state,
                predicted,
                cfg.aiqi.horizon,
                cfg.aiqi.gamma,
                DIAG_BUDGET,
            )?;
            out.push(DiagRow::new(step, state, d));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EnvName;

    #[test]
    fn bandit_diagnostics_are_bounded() {
        let mut cfg = RunConfig::defaults(EnvName::Bandit, AgentName::Aiqi);
        cfg.run.steps = 400;
        let rows = run_diagnostics(&cfg, 100).unwrap();
        assert_eq!(rows.iter().map(|r| r.step).collect::<Vec<_>>(), vec![100, 200, 300, 400]);
        for r in rows {
            assert!((0.0..=2.0).contains(&r.delta_psi));
            assert!(r.delta_q >= 0.0 && r.delta_1 >= -1e-12 && r.delta_inf >= -1e-12);
        }
    }

    #[test]
    fn requires_a_model() {
        let cfg = RunConfig::defaults(EnvName::Kuhn, AgentName::Aiqi);
        assert!(matches!(run_diagnostics(&cfg, 10), Err(HarnessError::Config(_))));
    }
}
