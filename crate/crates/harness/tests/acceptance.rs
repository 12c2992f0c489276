//! Acceptance suite. Criteria run one after another so that wall-clock
//! comparisons are not disturbed by each other, and each prints one
//! PASS/FAIL line. The process fails if any criterion fails.

use std::time::{Duration, Instant};

use aiqi::agent::{greedy_action, Agent, AgentConfig, AiqiAgent};
use aiqi::envs::{BernoulliBandit, BiasedRps, CounterexampleModel, Environment, Grid4x4, ModelEnvironment};
use aiqi::oracle::{
    exact_return_distribution, exact_values, freeze_policy, optimal_average_reward, steps_to_reward, tv_distance,
};
use aiqi::qinduction::{DiscountConfig, UnifiedPredictor};
use aiqi::{Alphabets, ContextTree, EnvStep, Rational64, Rng, Step};
use aiqi_harness::config::{AgentName, EnvName, RunConfig};
use aiqi_harness::runner::{run_experiment, RunLog};
use aiqi_harness::sweep::run_sweep_sequential;

const SEEDS: [u64; 8] = [0, 1, 2, 3, 4, 5, 6, 7];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

// 1. CTW against the explicit mixture over suffix trees.

fn trees(depth: usize, max: usize, prefix: Vec<u8>) -> Vec<(f64, Vec<Vec<u8>>)> {
    if depth == max {
        return vec![(0.0, vec![prefix])];
    }
    let half = 0.5f64.ln();
    let mut out = vec![(half, vec![prefix.clone()])];
    let (mut p0, mut p1) = (prefix.clone(), prefix);
    p0.push(0);
    p1.push(1);
    let (left, right) = (trees(depth + 1, max, p0), trees(depth + 1, max, p1));
    for (wl, l) in &left {
        for (wr, r) in &right {
            let mut leaves = l.clone();
            leaves.extend(r.iter().cloned());
            out.push((half + wl + wr, leaves));
        }
    }
    out
}

fn log_kt(bits: &[u8]) -> f64 {
    let (mut n0, mut n1, mut lp) = (0.0f64, 0.0f64, 0.0);
    for &x in bits {
        let count = if x == 0 { n0 } else { n1 };
        lp += ((count + 0.5) / (n0 + n1 + 1.0)).ln();
        if x == 0 {
            n0 += 1.0;
        } else {
            n1 += 1.0;
        }
    }
    lp
}

fn mixture(seq: &[u8], depth: usize) -> f64 {
    let context = |i: usize, d: usize| if i > d { seq[i - 1 - d] } else { 0 };
    trees(0, depth, Vec::new())
        .into_iter()
        .map(|(prior, leaves)| {
            let lp: f64 = leaves
                .iter()
                .map(|leaf| {
                    let sub: Vec<u8> = (0..seq.len())
                        .filter(|&i| leaf.iter().enumerate().all(|(d, &b)| context(i, d) == b))
                        .map(|i| seq[i])
                        .collect();
                    log_kt(&sub)
                })
                .sum();
            (prior + lp).exp()
        })
        .sum()
}

fn ctw_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(20_240_601);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let len = rng.below(13);
        let seq: Vec<u8> = (0..len).map(|_| rng.below(2) as u8).collect();
        for depth in 0..=2 {
            let mut tree = ContextTree::new(depth).unwrap();
            for &b in &seq {
                tree.update(b, true);
            }
            let (a, b) = (tree.log_block_probability().exp(), mixture(&seq, depth));
            worst = worst.max((a - b).abs() / b);
        }
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-9 && within(t, 10),
        format!("200 strings x D in {{0,1,2}}, max relative error {worst:.1e}, {:.2}s", t.as_secs_f64()),
    )
}

// 2. Checkpoint/revert against replay.

fn revert_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(7);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let depth = rng.below(10);
        let mut tree = ContextTree::new(depth).unwrap();
        let mut updates: Vec<(u8, bool)> = Vec::new();
        let mut open: Vec<(aiqi::Checkpoint, usize)> = Vec::new();
        for _ in 0..rng.below(60) {
            match rng.below(10) {
                0..=5 => {
                    let (b, learn) = (rng.below(2) as u8, rng.below(4) != 0);
                    tree.update(b, learn);
                    updates.push((b, learn));
                }
                6 | 7 => open.push((tree.checkpoint(), updates.len())),
                _ if !open.is_empty() => {
                    let j = rng.below(open.len());
                    let (token, len) = open[j];
                    tree.revert(token).unwrap();
                    updates.truncate(len);
                    open.truncate(j);
                }
                _ => {}
            }
        }
        let mut reference = ContextTree::new(depth).unwrap();
        for &(b, learn) in &updates {
            reference.update(b, learn);
        }
        if tree.to_bytes() != reference.to_bytes() {
            mismatches += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        mismatches == 0 && within(t, 10),
        format!("10000 interleavings, {mismatches} mismatches, {:.2}s", t.as_secs_f64()),
    )
}

// 3 and 4. Return prediction on a two-armed Bernoulli bandit under a fixed
// behaviour policy.

const BEHAVIOUR: [f64; 2] = [0.1, 0.9];

struct BanditTrace {
    /// (step, max over actions of the TV distance) at each checkpoint.
    tv: Vec<(u64, f64)>,
    /// max over actions of |Q̂ − Q^π| at the last checkpoint.
    q_error: f64,
}

fn bandit_trace(levels: usize, steps: u64, every: u64) -> BanditTrace {
    let (horizon, gamma) = (2, 0.5);
    let model = BernoulliBandit::new(vec![Rational64::new(1, 10), Rational64::new(9, 10)]);
    let mut env = ModelEnvironment::new(model.clone());
    let config = AgentConfig {
        tau: 0.01,
        epsilon0: 0.01,
        decay: 1.0,
        learning_period: steps,
        terminating_age: steps,
        gamma,
        horizon,
        period: horizon,
        levels,
        depth: 8,
        freeze_after_learning: false,
    };
    let mut agent = AiqiAgent::new(config, env.alphabets().clone(), Rng::new(1)).unwrap();
    let policy = vec![BEHAVIOUR.to_vec()];
    let exact: Vec<Vec<f64>> = (0..2)
        .map(|a| exact_return_distribution(&model, &policy, 0, a, horizon, gamma, levels, 1000).unwrap())
        .collect();
    let q_pi = exact_values(&model, &policy, gamma).unwrap().q_pi[0].clone();
    let (mut rng, mut behaviour) = (Rng::new(2), Rng::new(3));
    let mut tv = Vec::new();
    let mut q_error = f64::NAN;
    for step in 1..=steps {
        let a = behaviour.categorical(&BEHAVIOUR);
        let e = env.step(a, &mut rng);
        agent.record(a, e).unwrap();
        if step % every == 0 {
            let history = agent.history().steps().to_vec();
            let predicted = agent.probe_return_distributions(&history).unwrap();
            let worst = (0..2)
                .map(|a| tv_distance(&predicted[a], &exact[a]).unwrap())
                .fold(0.0, f64::max);
            tv.push((step, worst));
            let q_hat = agent.q_values().unwrap();
            q_error = (0..2).map(|a| (q_hat[a] - q_pi[a]).abs()).fold(0.0, f64::max);
        }
    }
    BanditTrace { tv, q_error }
}

fn predictor_convergence() -> Outcome {
    let start = Instant::now();
    let trace = bandit_trace(9, 20_000, 1_000);
    let first = trace.tv.iter().find(|(_, d)| *d < 0.05);
    let t = start.elapsed();
    let shown: Vec<String> = trace.tv.iter().map(|(s, d)| format!("{}k:{d:.3}", s / 1000)).collect();
    outcome(
        first.is_some() && within(t, 120),
        format!(
            "first checkpoint with TV < 0.05: {}, {:.1}s [{}]",
            first.map_or_else(|| "none".into(), |(s, d)| format!("step {s} ({d:.4})")),
            t.as_secs_f64(),
            shown.join(" ")
        ),
    )
}

fn q_error_bound() -> Outcome {
    let start = Instant::now();
    let eta = 0.5f64.powi(2);
    let mut pass = true;
    let mut parts = Vec::new();
    for levels in [9, 13] {
        let trace = bandit_trace(levels, 20_000, 1_000);
        let bound = 1.0 / levels as f64 + eta + 0.05;
        pass &= trace.q_error <= bound;
        parts.push(format!("M={levels}: {:.4} <= {bound:.4}", trace.q_error));
    }
    let t = start.elapsed();
    outcome(pass && within(t, 120), format!("{}, {:.1}s", parts.join(", "), t.as_secs_f64()))
}

// 5 and 7. Biased rock-paper-scissors.

fn rps_aiqi_logs() -> Vec<RunLog> {
    let cfg = RunConfig::defaults(EnvName::Rps, AgentName::Aiqi);
    run_sweep_sequential(&cfg, &SEEDS).unwrap().logs
}

fn rps_control(logs: &[RunLog], elapsed: Duration) -> Outcome {
    let optimal = optimal_average_reward(&BiasedRps::new());
    let target = 0.95 * optimal;
    let burn_in = 5_000;
    let peaks: Vec<f64> = logs
        .iter()
        .map(|l| l.rows[burn_in..].iter().map(|r| r.ema_reward).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let hits = peaks.iter().filter(|&&p| p >= target).count();
    let shown: Vec<String> = peaks.iter().map(|p| format!("{p:.4}")).collect();
    outcome(
        hits >= 6 && within(elapsed, 15 * 60),
        format!(
            "{hits}/8 seeds reach EMA >= {target:.5} (0.95 x {optimal:.4}) after step {burn_in}; peaks [{}], {:.0}s",
            shown.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

fn comparative_ordering(aiqi: &[RunLog]) -> Outcome {
    let start = Instant::now();
    let mut wins = 0;
    let mut parts = Vec::new();
    for (&seed, log) in SEEDS.iter().zip(aiqi) {
        let budget = log.rows.last().unwrap().wallclock_s;
        let mut cfg = RunConfig::defaults(EnvName::Rps, AgentName::Mcaixi);
        cfg.run.seed = seed;
        cfg.run.time_budget_s = Some(budget);
        let mc = run_experiment(&cfg).unwrap();
        let (a, m) = (log.final_ema().unwrap(), mc.final_ema().unwrap());
        wins += (a > m) as usize;
        parts.push(format!("{a:.3}/{m:.3}@{}", mc.rows.len()));
    }
    let t = start.elapsed();
    outcome(
        wins >= 6,
        format!(
            "AIQI beats MC-AIXI on {wins}/8 seeds at equal wall-clock (aiqi/mcaixi@mcaixi-steps: {}), {:.0}s",
            parts.join(" "),
            t.as_secs_f64()
        ),
    )
}

// 6. Grid.

fn grid_control() -> Outcome {
    let start = Instant::now();
    let grid = Grid4x4::new();
    let path = steps_to_reward(&grid, Grid4x4::start()).unwrap();
    let optimal = optimal_average_reward(&grid);
    assert!((optimal - 1.0 / path as f64).abs() < 1e-9);
    let target = 0.8 * optimal;
    let cfg = RunConfig::defaults(EnvName::Grid, AgentName::Aiqi);
    let logs = run_sweep_sequential(&cfg, &SEEDS).unwrap().logs;
    let tails: Vec<f64> = logs.iter().map(|l| l.tail_mean(20_000)).collect();
    let hits = tails.iter().filter(|&&m| m >= target).count();
    let t = start.elapsed();
    let shown: Vec<String> = tails.iter().map(|m| format!("{m:.4}")).collect();
    outcome(
        hits >= 6 && within(t, 30 * 60),
        format!(
            "{hits}/8 seeds average >= {target:.4} (0.8 x 1/{path}) over the last 20000 steps; [{}], {:.0}s",
            shown.join(", "),
            t.as_secs_f64()
        ),
    )
}

// 8. The counterexample.

fn non_self_optimization() -> Outcome {
    let start = Instant::now();
    let cfg = RunConfig::defaults(EnvName::Counterexample, AgentName::Aiqi);
    let ce = cfg.counterexample().unwrap();
    let model = CounterexampleModel::new(ce.clone());
    let (c, delta) = (ce.c(), ce.delta_f64());
    assert!(cfg.aiqi.levels >= ce.min_levels());
    let mut env = ModelEnvironment::new(model.clone());
    let mut agent = AiqiAgent::new(cfg.aiqi.agent_config(), env.alphabets().clone(), Rng::new(1)).unwrap();
    let (mut rng, mut behaviour) = (Rng::new(2), Rng::new(3));
    let mut episode: Vec<usize> = Vec::new();
    let mut play = |agent: &mut AiqiAgent, env: &mut ModelEnvironment<CounterexampleModel>| {
        if CounterexampleModel::is_episode_start(env.state()) {
            episode.clear();
        }
        let a = model.historic_action(&episode, &mut behaviour);
        episode.push(a);
        let e = env.step(a, &mut rng);
        agent.record(a, e).unwrap();
    };
    for _ in 0..100_000 {
        play(&mut agent, &mut env);
    }
    let threshold = c * (1.0 - 1.5 * delta) - 0.02;
    let (mut queries, mut avoided, mut confirmed) = (0, 0, 0);
    let mut smallest_gap = f64::INFINITY;
    while queries < 500 {
        if CounterexampleModel::is_episode_start(env.state()) {
            queries += 1;
            let q = agent.q_values().unwrap();
            if greedy_action(&q) != 0 {
                avoided += 1;
                let (table, _) = freeze_policy(&mut agent, &model, env.state(), 0.0).unwrap();
                let v = exact_values(&model, &table, ce.gamma()).unwrap();
                let gap = v.v_star[env.state()] - v.v_pi[env.state()];
                smallest_gap = smallest_gap.min(gap);
                confirmed += (gap >= threshold) as usize;
            }
        }
        play(&mut agent, &mut env);
    }
    let t = start.elapsed();
    let share = avoided as f64 / queries as f64;
    outcome(
        share >= 0.9 && confirmed == avoided && within(t, 5 * 60),
        format!(
            "greedy action != 1 at {avoided}/{queries} episode starts; oracle gap >= {threshold:.3} at {confirmed} of them (smallest {smallest_gap:.4}), {:.1}s",
            t.as_secs_f64()
        ),
    )
}

// 9. Which phases may be advanced.

fn phase_arithmetic() -> Outcome {
    let start = Instant::now();
    let alphabets = Alphabets::new(2, 2, vec![0.0, 0.5, 1.0]).unwrap();
    let mut rng = Rng::new(5);
    let history: Vec<Step> = (0..200)
        .map(|_| Step::new(rng.below(2), EnvStep::new(rng.below(2), rng.below(3))))
        .collect();
    let (mut cases, mut wrong, mut inserted, mut premature) = (0u64, 0u64, 0u64, 0u64);
    for period in 1..=8usize {
        for horizon in 1..=period {
            let discount = DiscountConfig::new(0.5, horizon).unwrap();
            let mut p = UnifiedPredictor::new(&alphabets, discount, 4, period, 2).unwrap();
            for n in 0..period {
                p.phase_mut(n).enable_trace();
            }
            for t in 1..=200usize {
                for n in 0..period {
                    cases += 1;
                    let has_position = (1..t).any(|i| i % period == n);
                    let valid = (t as i64 - 1 - n as i64).rem_euclid(period as i64) as usize >= horizon - 1;
                    let ok = p.advance_phase(n, &history[..t - 1], t).is_ok();
                    if ok != (valid || !has_position) {
                        wrong += 1;
                    }
                }
            }
            for phase in p.phases() {
                for ins in phase.trace() {
                    inserted += 1;
                    if ins.position + horizon - 1 > ins.available {
                        premature += 1;
                    }
                }
            }
        }
    }
    let t = start.elapsed();
    outcome(
        wrong == 0 && premature == 0 && inserted > 0 && t <= Duration::from_secs(1),
        format!(
            "{cases} (t, N, H, n) cases, {wrong} wrong; {inserted} insertions, {premature} premature; {:.3}s",
            t.as_secs_f64()
        ),
    )
}

// 10. Determinism.

fn strip_wallclock(path: &std::path::Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_owned())
        .collect()
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<_> = (0..2)
        .map(|i| {
            let mut cfg = RunConfig::defaults(EnvName::Rps, AgentName::Aiqi);
            cfg.run.seed = 42;
            let path = dir.path().join(format!("rps{i}.csv"));
            cfg.run.csv = Some(path.clone());
            run_experiment(&cfg).unwrap();
            strip_wallclock(&path)
        })
        .collect();
    let t = start.elapsed();
    let same = files[0] == files[1];
    outcome(
        same && files[0].len() == 100_001 && files[0][0].ends_with("epsilon") && within(t, 5 * 60),
        format!(
            "two seeded 100000-step runs {} apart from wallclock_s, {:.1}s",
            if same { "identical" } else { "differ" },
            t.as_secs_f64()
        ),
    )
}

/// Criteria to run: the numbers given on the command line, or all of them.
fn selected() -> Vec<u32> {
    let picked: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if picked.is_empty() {
        (1..=10).collect()
    } else {
        picked
    }
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        for id in 1..=10 {
            println!("criterion_{id}: test");
        }
        return;
    }
    let wanted = selected();
    let mut failed = Vec::new();
    let mut report = |id: u32, name: &str, run: &mut dyn FnMut() -> Outcome| {
        if !wanted.contains(&id) {
            return;
        }
        let o = run();
        println!("criterion {id:>2} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(id);
        }
    };
    report(1, "ctw exactness", &mut ctw_exactness);
    report(2, "revert exactness", &mut revert_exactness);
    report(3, "return-predictor convergence", &mut predictor_convergence);
    report(4, "q-hat error bound", &mut q_error_bound);
    let mut rps: Option<Vec<RunLog>> = None;
    report(5, "biased rps control", &mut || {
        let start = Instant::now();
        let logs = rps_aiqi_logs();
        let o = rps_control(&logs, start.elapsed());
        rps = Some(logs);
        o
    });
    report(6, "grid control", &mut grid_control);
    report(7, "comparative ordering", &mut || comparative_ordering(rps.get_or_insert_with(rps_aiqi_logs)));
    report(8, "non-self-optimization", &mut non_self_optimization);
    report(9, "phase arithmetic", &mut phase_arithmetic);
    report(10, "determinism", &mut determinism);
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
