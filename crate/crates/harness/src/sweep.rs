//! Multi-seed runs: one independent session per seed, merged in seed order.

use std::io::Write;

use aiqi::par;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::HarnessError;
use crate::plot::Series;
use crate::runner::{run_experiment, RunLog};

/// Mean and standard error across seeds at one logged step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub step: u64,
    pub wallclock_mean_s: f64,
    pub ema_mean: f64,
    pub ema_stderr: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub seeds: Vec<u64>,
    pub logs: Vec<RunLog>,
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn seed_configs(base: &RunConfig, seeds: &[u64]) -> Vec<RunConfig> {
    seeds
        .iter()
        .map(|&seed| {
            let mut cfg = base.clone();
            cfg.run.seed = seed;
            cfg.run.csv = None;
            cfg.run.svg = None;
            cfg.run.snapshot = None;
            cfg.run.snapshot_every = None;
            cfg
        })
        .collect()
}

/// Run every seed; parallel when the `parallel` feature is on.
pub fn run_sweep(base: &RunConfig, seeds: &[u64]) -> Result<SweepResult, HarnessError> {
    let logs = par::map(seed_configs(base, seeds), |cfg| run_experiment(&cfg));
    Ok(SweepResult {
        seeds: seeds.to_vec(),
        logs: logs.into_iter().collect::<Result<_, _>>()?,
    })
}

/// Same as [`run_sweep`] but always one seed after another.
pub fn run_sweep_sequential(base: &RunConfig, seeds: &[u64]) -> Result<SweepResult, HarnessError> {
    let logs = par::map_sequential(seed_configs(base, seeds), |cfg| run_experiment(&cfg));
    Ok(SweepResult {
        seeds: seeds.to_vec(),
        logs: logs.into_iter().collect::<Result<_, _>>()?,
    })
}

impl SweepResult {
    /// Aggregate every `every` steps, plus the final step. Runs that stopped
    /// early drop out of later points.
    pub fn aggregate(&self, every: u64) -> Vec<SweepPoint> {
        let every = every.max(1);
        let longest = self.logs.iter().map(|l| l.rows.len() as u64).max().unwrap_or(0);
        let mut steps: Vec<u64> = (1..=longest / every).map(|k| k * every).collect();
        if longest > 0 && steps.last() != Some(&longest) {
            steps.push(longest);
        }
        steps
            .into_iter()
            .map(|step| {
                let rows: Vec<_> = self
                    .logs
                    .iter()
                    .filter_map(|l| l.rows.get(step as usize - 1))
                    .collect();
                let ema: Vec<f64> = rows.iter().map(|r| r.ema_reward).collect();
                let clock: Vec<f64> = rows.iter().map(|r| r.wallclock_s).collect();
                let (ema_mean, ema_stderr) = mean_stderr(&ema);
                SweepPoint {
                    step,
                    wallclock_mean_s: mean_stderr(&clock).0,
                    ema_mean,
                    ema_stderr,
                    seeds: rows.len(),
                }
            })
            .collect()
    }

    pub fn final_emas(&self) -> Vec<f64> {
        self.logs.iter().filter_map(RunLog::final_ema).collect()
    }

    pub fn series(&self, label: &str, every: u64) -> Series {
        Series {
            label: label.to_owned(),
            points: self
                .aggregate(every)
                .into_iter()
                .map(|p| (p.wallclock_mean_s, p.ema_mean, p.ema_stderr))
                .collect(),
        }
    }
}

pub fn write_points<W: Write>(out: W, points: &[SweepPoint]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{AgentName, EnvName};

    #[test]
    fn stderr_examples() {
        assert_eq!(mean_stderr(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let mut cfg = RunConfig::defaults(EnvName::Rps, AgentName::Aiqi);
        cfg.run.steps = 200;
        cfg.aiqi.depth = 8;
        let seeds = [3, 1, 2];
        let a = run_sweep(&cfg, &seeds).unwrap();
        let b = run_sweep_sequential(&cfg, &seeds).unwrap();
        for (x, y) in a.logs.iter().zip(&b.logs) {
            let strip = |l: &RunLog| l.rows.iter().map(|r| (r.action, r.observation, r.ema_reward)).collect::<Vec<_>>();
            assert_eq!(strip(x), strip(y));
        }
        let pts = a.aggregate(64);
        assert_eq!(pts.iter().map(|p| p.step).collect::<Vec<_>>(), vec![64, 128, 192, 200]);
        assert!(pts.iter().all(|p| p.seeds == 3));
    }
}
