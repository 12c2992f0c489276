use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use aiqi_harness::config::{AgentName, EnvName, RunConfig};
use aiqi_harness::diag::run_diagnostics;
use aiqi_harness::error::HarnessError;
use aiqi_harness::plot::{self, Series};
use aiqi_harness::runner::{finish, read_csv, Session};
use aiqi_harness::sweep::{mean_stderr, run_sweep, write_points};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aiqi", version, about = "Run AIQI-CTW and baselines on the benchmark environments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML file; unspecified keys take the defaults for the environment.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    agent: Option<String>,
    /// Override a key, e.g. `--set run.seed=3` or `--set aiqi.depth=16`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, HarnessError> {
        let env = self.env.as_deref().map(str::parse::<EnvName>).transpose()?;
        let agent = self.agent.as_deref().map(str::parse::<AgentName>).transpose()?;
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path, env, agent)?,
            None => RunConfig::from_toml("", env, agent)?,
        };
        for o in &self.overrides {
            cfg.set(o)?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// One seeded run.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Continue from a snapshot written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Several seeds, aggregated as mean and standard error.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 8)]
        seeds: u64,
        /// Aggregate every this many steps.
        #[arg(long, default_value_t = 1000)]
        every: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Oracle diagnostics for AIQI on an environment with a finite model.
    Diag {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 1000)]
        every: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot one or more CSV logs.
    Replay {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long)]
        svg: PathBuf,
        #[arg(long, default_value = "EMA reward")]
        title: String,
    },
}

fn print_config(cfg: &RunConfig) {
    print!("{}", cfg.to_toml());
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { cfg, resume } => {
            let config = cfg.load()?;
            if cfg.print_config {
                print_config(&config);
                return Ok(());
            }
            let mut session = match resume {
                Some(path) => Session::load(config, &path)?,
                None => Session::new(config)?,
            };
            let start = session.steps_done();
            let log = finish(&mut session)?;
            let final_ema = log.final_ema().unwrap_or(f64::NAN);
            println!(
                "{} steps ({} to {}), mean reward {:.4}, final EMA {:.4}",
                log.rows.len(),
                start + 1,
                session.steps_done(),
                log.mean_reward(),
                final_ema
            );
        }
        Command::Sweep { cfg, seeds, every, out, svg } => {
            let config = cfg.load()?;
            if cfg.print_config {
                print_config(&config);
                return Ok(());
            }
            let seed_list: Vec<u64> = (0..seeds).map(|i| config.run.seed + i).collect();
            let result = run_sweep(&config, &seed_list)?;
            let points = result.aggregate(every);
            if let Some(path) = &out {
                let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
                write_points(BufWriter::new(file), &points).map_err(|e| HarnessError::io(path, e))?;
            }
            if let Some(path) = &svg {
                let title = format!("{} on {}, {} seeds", config.run.agent.as_str(), config.run.env.as_str(), seeds);
                let doc = plot::render(&title, &[result.series(config.run.agent.as_str(), every)]);
                std::fs::write(path, doc).map_err(|e| HarnessError::io(path, e))?;
            }
            for (seed, log) in result.seeds.iter().zip(&result.logs) {
                println!("seed {seed}: final EMA {:.4}", log.final_ema().unwrap_or(f64::NAN));
            }
            let (m, s) = mean_stderr(&result.final_emas());
            println!("final EMA {m:.4} ± {s:.4}");
        }
        Command::Diag { cfg, every, out } => {
            let config = cfg.load()?;
            if cfg.print_config {
                print_config(&config);
                return Ok(());
            }
            let rows = run_diagnostics(&config, every)?;
            match &out {
                Some(path) => {
                    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
                    let mut w = csv::Writer::from_writer(BufWriter::new(file));
                    for r in &rows {
                        w.serialize(r).map_err(|e| HarnessError::io(path, e))?;
                    }
                    w.flush().map_err(|e| HarnessError::io(path, e))?;
                }
                None => {
                    println!("step,state,delta_psi,delta_q,delta_1,delta_inf");
                    for r in &rows {
                        println!(
                            "{},{},{:.6},{:.6},{:.6},{:.6}",
                            r.step, r.state, r.delta_psi, r.delta_q, r.delta_1, r.delta_inf
                        );
                    }
                }
            }
        }
        Command::Replay { csv, svg, title } => {
            let mut series = Vec::new();
            for path in &csv {
                let rows = read_csv(path)?;
                let label = path.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
                series.push(Series::from_rows(&label, &rows));
            }
            std::fs::write(&svg, plot::render(&title, &series)).map_err(|e| HarnessError::io(&svg, e))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
