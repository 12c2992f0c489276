//! Brute-force reference computations on small finite-state models.
//!
//! Enumerations are generic over [`Scalar`] so the same code runs in `f64`
//! and in exact big-rational arithmetic. Value tables use value iteration
//! in `f64`. Policies are tables over a model's abstract states; the AIQI
//! agent's history-dependent policy is approximated by freezing it (see
//! [`freeze_policy`]).

use std::collections::VecDeque;
use std::fmt::Debug;
use std::ops::{Add, Mul, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Rational64};
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::agent::{action_distribution, AgentError, AiqiAgent, Agent};
use crate::envs::FiniteStateModel;
use crate::history::Step;
use crate::par;
use crate::policies::PolicyTable;
use crate::qinduction::{discretize, expected_return};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("enumeration needs more than {0} paths")]
    Budget(u64),
    #[error("not a probability vector: {0}")]
    NotDistribution(String),
    #[error("vectors differ in length ({0} vs {1})")]
    Length(usize, usize),
    #[error("policy table does not match the model: {0}")]
    Policy(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// Number type for enumerations.
pub trait Scalar:
    Clone + Debug + PartialEq + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_rational(r: Rational64) -> Self;
    /// Index of the `levels`-discretization of `self`.
    fn level(&self, levels: usize) -> usize;
    fn to_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }

    fn one() -> Self {
        1.0
    }

    fn from_rational(r: Rational64) -> Self {
        r.to_f64().unwrap_or(f64::NAN)
    }

    fn level(&self, levels: usize) -> usize {
        discretize(*self, levels)
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }

    fn one() -> Self {
        One::one()
    }

    fn from_rational(r: Rational64) -> Self {
        BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
    }

    fn level(&self, levels: usize) -> usize {
        let scaled = self * BigInt::from(levels);
        let floor = scaled.numer().div_floor(scaled.denom());
        floor.to_usize().unwrap_or(0).min(levels - 1)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Exact rational from a 64-bit one.
pub fn big(r: Rational64) -> BigRational {
    BigRational::from_rational(r)
}

/// Exact big-rational copy of a rational policy table.
pub fn big_table(table: &[Vec<Rational64>]) -> Vec<Vec<BigRational>> {
    table
        .iter()
        .map(|row| row.iter().map(|&p| big(p)).collect())
        .collect()
}

/// Total variation distance `½ Σ |p_i - q_i|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64, OracleError> {
    if p.len() != q.len() {
        return Err(OracleError::Length(p.len(), q.len()));
    }
    for v in [p, q] {
        let total: f64 = v.iter().sum();
        if v.iter().any(|&x| x.is_nan() || x < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(OracleError::NotDistribution(format!("{v:?}")));
        }
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

fn check_policy<S>(model: &dyn FiniteStateModel, policy: &[Vec<S>]) -> Result<(), OracleError> {
    let k = model.alphabets().action_count();
    if policy.len() != model.state_count() || policy.iter().any(|row| row.len() != k) {
        return Err(OracleError::Policy(format!(
            "{} rows for {} states",
            policy.len(),
            model.state_count()
        )));
    }
    Ok(())
}

struct Enumeration<'a, S> {
    model: &'a dyn FiniteStateModel,
    policy: &'a [Vec<S>],
    horizon: usize,
    gamma: S,
    levels: usize,
    budget: u64,
    paths: u64,
    out: Vec<S>,
}

impl<S: Scalar> Enumeration<'_, S> {
    fn visit(
        &mut self,
        state: usize,
        k: usize,
        weight: S,
        sum: S,
        discount: S,
        forced: Option<usize>,
    ) -> Result<(), OracleError> {
        if k == self.horizon {
            self.paths += 1;
            if self.paths > self.budget {
                return Err(OracleError::Budget(self.budget));
            }
            let ret = (S::one() - self.gamma.clone()) * sum;
            self.out[ret.level(self.levels)] = self.out[ret.level(self.levels)].clone() + weight;
            return Ok(());
        }
        let actions: Vec<(usize, S)> = match forced {
            Some(a) => vec![(a, S::one())],
            None => self.policy[state]
                .iter()
                .cloned()
                .enumerate()
                .filter(|(_, p)| *p != S::zero())
                .collect(),
        };
        for (a, pa) in actions {
            for t in self.model.transitions(state, a) {
                let r = S::from_rational(self.model.reward_exact(t.percept.reward));
                self.visit(
                    t.next,
                    k + 1,
                    weight.clone() * pa.clone() * S::from_rational(t.probability),
                    sum.clone() + discount.clone() * r,
                    discount.clone() * self.gamma.clone(),
                    None,
                )?;
            }
        }
        Ok(())
    }
}

/// Distribution of the discretized `H`-step return from `state` when
/// `action` is taken first and `policy` afterwards.
#[allow(clippy::too_many_arguments)]
pub fn exact_return_distribution<S: Scalar>(
    model: &dyn FiniteStateModel,
    policy: &[Vec<S>],
    state: usize,
    action: usize,
    horizon: usize,
    gamma: S,
    levels: usize,
    budget: u64,
) -> Result<Vec<S>, OracleError> {
    check_policy(model, policy)?;
    let mut e = Enumeration {
        model,
        policy,
        horizon,
        gamma,
        levels,
        budget,
        paths: 0,
        out: vec![S::zero(); levels],
    };
    e.visit(state, 0, S::one(), S::zero(), S::one(), Some(action))?;
    Ok(e.out)
}

/// Expected undiscretized `H`-step return, `Q^π_H(s, a)`.
pub fn h_step_q(
    model: &dyn FiniteStateModel,
    policy: &[Vec<f64>],
    state: usize,
    action: usize,
    horizon: usize,
    gamma: f64,
) -> f64 {
    fn go(
        model: &dyn FiniteStateModel,
        policy: &[Vec<f64>],
        state: usize,
        action: Option<usize>,
        left: usize,
        gamma: f64,
    ) -> f64 {
        if left == 0 {
            return 0.0;
        }
        let q = |a: usize| -> f64 {
            model
                .transitions(state, a)
                .iter()
                .map(|t| {
                    t.probability.to_f64().unwrap_or(0.0)
                        * ((1.0 - gamma) * model.reward(t.percept.reward)
                            + gamma * go(model, policy, t.next, None, left - 1, gamma))
                })
                .sum()
        };
        match action {
            Some(a) => q(a),
            None => policy[state]
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(a, &p)| p * q(a))
                .sum(),
        }
    }
    go(model, policy, state, Some(action), horizon, gamma)
}

/// Value tables in the normalized convention
/// `Q(s, a) = Σ P · [(1-γ) r + γ V(s')]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    pub v_pi: Vec<f64>,
    pub q_pi: Vec<Vec<f64>>,
    pub v_star: Vec<f64>,
    pub q_star: Vec<Vec<f64>>,
}

const VI_TOLERANCE: f64 = 1e-12;
const VI_MAX_SWEEPS: usize = 1_000_000;

fn backup(model: &dyn FiniteStateModel, v: &[f64], gamma: f64) -> Vec<Vec<f64>> {
    let k = model.alphabets().action_count();
    (0..model.state_count())
        .map(|s| {
            (0..k)
                .map(|a| {
                    model
                        .transitions(s, a)
                        .iter()
                        .map(|t| {
                            t.probability.to_f64().unwrap_or(0.0)
                                * ((1.0 - gamma) * model.reward(t.percept.reward) + gamma * v[t.next])
                        })
                        .sum()
                })
                .collect()
        })
        .collect()
}

fn iterate(
    model: &dyn FiniteStateModel,
    gamma: f64,
    value_of: impl Fn(usize, &[f64]) -> f64,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut v = vec![0.0; model.state_count()];
    for _ in 0..VI_MAX_SWEEPS {
        let q = backup(model, &v, gamma);
        let next: Vec<f64> = q.iter().enumerate().map(|(s, row)| value_of(s, row)).collect();
        let change = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if change < VI_TOLERANCE {
            break;
        }
    }
    let q = backup(model, &v, gamma);
    (v, q)
}

/// `V^π, Q^π, V*, Q*` by value iteration.
pub fn exact_values(
    model: &dyn FiniteStateModel,
    policy: &[Vec<f64>],
    gamma: f64,
) -> Result<ValueTables, OracleError> {
    check_policy(model, policy)?;
    let (v_pi, q_pi) = iterate(model, gamma, |s, row| {
        row.iter().zip(&policy[s]).map(|(q, p)| q * p).sum()
    });
    let (v_star, q_star) = iterate(model, gamma, |_, row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    Ok(ValueTables {
        v_pi,
        q_pi,
        v_star,
        q_star,
    })
}

/// A deterministic optimal policy, lowest action index among ties.
pub fn optimal_policy(model: &dyn FiniteStateModel, gamma: f64) -> PolicyTable {
    let k = model.alphabets().action_count();
    let uniform = vec![vec![1.0 / k as f64; k]; model.state_count()];
    let tables = exact_values(model, &uniform, gamma).expect("uniform policy fits");
    tables
        .q_star
        .iter()
        .map(|row| {
            let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let a = row.iter().position(|&q| q >= best - 1e-9).unwrap_or(0);
            let mut out = vec![0.0; k];
            out[a] = 1.0;
            out
        })
        .collect()
}

fn expected_reward(model: &dyn FiniteStateModel, s: usize, a: usize) -> f64 {
    model
        .transitions(s, a)
        .iter()
        .map(|t| t.probability.to_f64().unwrap_or(0.0) * model.reward(t.percept.reward))
        .sum()
}

/// Relative value iteration on the lazy chain `½ I + ½ P`, which has the
/// same stationary distributions as `P` but no periodicity.
fn average_reward_by(
    model: &dyn FiniteStateModel,
    choose: impl Fn(usize, &[f64]) -> f64,
) -> f64 {
    let n = model.state_count();
    let k = model.alphabets().action_count();
    let reference = model.initial_state();
    let mut h = vec![0.0; n];
    let mut gain = 0.0;
    for _ in 0..VI_MAX_SWEEPS {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                let row: Vec<f64> = (0..k)
                    .map(|a| {
                        let future: f64 = model
                            .transitions(s, a)
                            .iter()
                            .map(|t| t.probability.to_f64().unwrap_or(0.0) * h[t.next])
                            .sum();
                        expected_reward(model, s, a) + 0.5 * h[s] + 0.5 * future
                    })
                    .collect();
                choose(s, &row)
            })
            .collect();
        let g = next[reference] - h[reference];
        let shifted: Vec<f64> = next.iter().map(|x| x - next[reference]).collect();
        let change = shifted
            .iter()
            .zip(&h)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        h = shifted;
        gain = g;
        if change < VI_TOLERANCE {
            break;
        }
    }
    gain
}

/// Best long-run average normalized reward per step (unichain models).
pub fn optimal_average_reward(model: &dyn FiniteStateModel) -> f64 {
    average_reward_by(model, |_, row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

/// Long-run average normalized reward per step of a policy.
pub fn policy_average_reward(model: &dyn FiniteStateModel, policy: &[Vec<f64>]) -> Result<f64, OracleError> {
    check_policy(model, policy)?;
    Ok(average_reward_by(model, |s, row| {
        row.iter().zip(&policy[s]).map(|(q, p)| q * p).sum()
    }))
}

/// Fewest steps from `start` until some transition pays a positive reward.
pub fn steps_to_reward(model: &dyn FiniteStateModel, start: usize) -> Option<usize> {
    let k = model.alphabets().action_count();
    let mut dist = vec![usize::MAX; model.state_count()];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        for a in 0..k {
            for t in model.transitions(s, a) {
                if model.reward(t.percept.reward) > 0.0 {
                    return Some(dist[s] + 1);
                }
                if dist[t.next] == usize::MAX {
                    dist[t.next] = dist[s] + 1;
                    queue.push_back(t.next);
                }
            }
        }
    }
    None
}

/// A shortest hypothetical continuation reaching each model state from
/// `from`, as steps to append to a history (`None` if unreachable).
pub fn state_extensions(model: &dyn FiniteStateModel, from: usize) -> Vec<Option<Vec<Step>>> {
    let k = model.alphabets().action_count();
    let mut ext: Vec<Option<Vec<Step>>> = vec![None; model.state_count()];
    ext[from] = Some(Vec::new());
    let mut queue = VecDeque::from([from]);
    while let Some(s) = queue.pop_front() {
        for a in 0..k {
            for t in model.transitions(s, a) {
                if ext[t.next].is_none() {
                    let mut path = ext[s].clone().expect("visited");
                    path.push(Step::new(a, t.percept));
                    ext[t.next] = Some(path);
                    queue.push_back(t.next);
                }
            }
        }
    }
    ext
}

/// The agent's current policy, frozen: for every reachable state, the
/// ε-greedy distribution over its `Q̂` after a shortest hypothetical
/// continuation of its real history into that state. Also returns the
/// probed return distributions per state. Unreachable states get the
/// uniform row.
#[allow(clippy::type_complexity)]
pub fn freeze_policy(
    agent: &mut AiqiAgent,
    model: &dyn FiniteStateModel,
    current: usize,
    eps: f64,
) -> Result<(PolicyTable, Vec<Option<Vec<Vec<f64>>>>), OracleError> {
    let k = model.alphabets().action_count();
    let base: Vec<Step> = agent.history().steps().to_vec();
    // Probes revert whatever they ingest; catching up first keeps that small.
    agent.predictor_mut().ingest_all(&base);
    let mut table = Vec::with_capacity(model.state_count());
    let mut probes = Vec::with_capacity(model.state_count());
    for ext in state_extensions(model, current) {
        match ext {
            None => {
                table.push(vec![1.0 / k as f64; k]);
                probes.push(None);
            }
            Some(ext) => {
                let mut h = base.clone();
                h.extend(ext);
                let dists = agent.probe_return_distributions(&h)?;
                let q: Vec<f64> = dists.iter().map(|d| expected_return(d)).collect();
                table.push(action_distribution(&q, eps));
                probes.push(Some(dists));
            }
        }
    }
    Ok((table, probes))
}

/// The four diagnostic gaps at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    /// Largest L1 distance between predicted and exact return distributions.
    pub delta_psi: f64,
    /// Largest `|Q̂ - Q^π|` over actions.
    pub delta_q: f64,
    /// `max_a Q^π - V^π`.
    pub delta_1: f64,
    /// `V* - V^π`.
    pub delta_inf: f64,
}

/// Compare predicted return distributions (one per action) at `state`
/// with the exact ones under `policy`.
#[allow(clippy::too_many_arguments)]
pub fn diagnose(
    model: &dyn FiniteStateModel,
    policy: &[Vec<f64>],
    state: usize,
    predicted: &[Vec<f64>],
    horizon: usize,
    gamma: f64,
    budget: u64,
) -> Result<Diagnostics, OracleError> {
    let tables = exact_values(model, policy, gamma)?;
    let levels = predicted.first().map_or(1, Vec::len);
    let per_action = par::map(predicted.iter().enumerate().collect(), |(a, pred)| -> Result<(f64, f64), OracleError> {
        let exact = exact_return_distribution(model, policy, state, a, horizon, gamma, levels, budget)?;
        Ok((2.0 * tv_distance(pred, &exact)?, (expected_return(pred) - tables.q_pi[state][a]).abs()))
    });
    let mut delta_psi: f64 = 0.0;
    let mut delta_q: f64 = 0.0;
    for r in per_action {
        let (psi, q) = r?;
        delta_psi = delta_psi.max(psi);
        delta_q = delta_q.max(q);
    }
    let best = tables.q_pi[state].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(Diagnostics {
        delta_psi,
        delta_q,
        delta_1: best - tables.v_pi[state],
        delta_inf: tables.v_star[state] - tables.v_pi[state],
    })
}
