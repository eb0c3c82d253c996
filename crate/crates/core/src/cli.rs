//! Command-line surface: `simulate-plant`, `identify` and `compare`.
//!
//! Exit codes: 0 success, 1 internal or numerical failure, 2 usage, config or
//! I/O error, 3 plant divergence.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{network_to_string, parse_config, serialize_config, ExperimentConfig};
use crate::config::{LearnerKind, PlantKind};
use crate::error::{Error, Result};
use crate::harness::{run_experiment_with, ExperimentReport, RunOptions};
use crate::io;
use crate::plants::{input_ex1, input_ex2, PlantState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "T2FNN_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "out";

#[derive(Parser, Debug)]
#[command(
    name = "t2fnn",
    version,
    about = "Type-2 fuzzy neural network identification benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Drive a benchmark plant open-loop and write plant.csv.
    SimulatePlant {
        #[command(flatten)]
        common: CommonArgs,
        /// Replace the excitation with a constant input.
        #[arg(long, allow_negative_numbers = true)]
        constant_input: Option<f64>,
        /// Number of samples; defaults to epochs times the plant horizon.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Train one learner and write trace.csv, epochs.csv, runs.csv and summary.csv.
    Identify {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        learner: Option<LearnerArg>,
    },
    /// Train the SMC and GD learners on identical seeds and write compare.csv.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Config document; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $T2FNN_OUT_DIR, else ./out).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, value_enum)]
    plant: Option<PlantArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PlantArg {
    Ex1,
    Ex2,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LearnerArg {
    Smc,
    Gd,
    Frozen,
}

impl CommonArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => parse_config(&fs::read_to_string(path)?)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(epochs) = self.epochs {
            config.epochs = epochs;
        }
        if let Some(runs) = self.runs {
            config.runs = runs;
        }
        if let Some(plant) = self.plant {
            config.plant = match plant {
                PlantArg::Ex1 => PlantKind::Ex1,
                PlantArg::Ex2 => PlantKind::Ex2,
            };
        }
        config.validate()?;
        Ok(config)
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out_dir.clone().unwrap_or_else(|| {
            std::env::var_os(OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
        });
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Exit code reported for an error.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_diverged() {
        return EXIT_DIVERGED;
    }
    match err {
        Error::Parse { .. } | Error::Validation { .. } | Error::Io(_) | Error::Csv(_) => EXIT_USAGE,
        _ => EXIT_INTERNAL,
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::SimulatePlant {
            common,
            constant_input,
            steps,
        } => simulate_plant(&common, constant_input, steps),
        Command::Identify { common, learner } => {
            let mut config = common.resolve()?;
            if let Some(l) = learner {
                config.learner = match l {
                    LearnerArg::Smc => LearnerKind::Smc,
                    LearnerArg::Gd => LearnerKind::Gd,
                    LearnerArg::Frozen => LearnerKind::Frozen,
                };
            }
            identify(&config, &common.out_dir()?)
        }
        Command::Compare { common } => compare(&common.resolve()?, &common.out_dir()?),
    }
}

fn simulate_plant(common: &CommonArgs, constant: Option<f64>, steps: Option<usize>) -> Result<()> {
    let config = common.resolve()?;
    let out = common.out_dir()?.join("plant.csv");
    let steps = steps.unwrap_or(config.epochs * config.horizon());
    let t_o = config.sample_time;
    let mut plant = PlantState::new(t_o);
    let (mut us, mut ys) = (Vec::with_capacity(steps), Vec::with_capacity(steps));
    let mut outcome = Ok(());
    for k in 0..steps as u64 {
        let u = match (constant, config.plant) {
            (Some(c), _) => c,
            (None, PlantKind::Ex1) => input_ex1(k, t_o),
            (None, PlantKind::Ex2) => input_ex2(k, config.timevarying.input_period),
        };
        let y = match config.plant {
            PlantKind::Ex1 => plant.step_nonbibo(u),
            PlantKind::Ex2 => Ok(plant.step_timevarying(u, config.timevarying.period)),
        };
        match y {
            Ok(y) => {
                us.push(u);
                ys.push(y);
            }
            Err(e) => {
                outcome = Err(e);
                break;
            }
        }
    }
    // the trajectory up to divergence is still written
    io::write_plant_csv(&out, t_o, &us, &ys)?;
    outcome?;
    println!("wrote {} samples to {}", ys.len(), out.display());
    Ok(())
}

fn identify(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let options = RunOptions {
        trace_runs: vec![0],
        keep_networks: true,
    };
    let report = run_experiment_with(config, &options)?;
    fs::write(out.join("config.toml"), serialize_config(config))?;
    if let Some(rows) = report.runs.first().and_then(|r| r.trace.as_ref()) {
        io::write_trace_csv(&out.join("trace.csv"), rows)?;
    }
    if let Some(net) = report.runs.first().and_then(|r| r.final_network.as_ref()) {
        fs::write(out.join("network.toml"), network_to_string(net))?;
    }
    io::write_epochs_csv(&out.join("epochs.csv"), &report)?;
    io::write_runs_csv(&out.join("runs.csv"), &report)?;
    io::write_summary_csv(&out.join("summary.csv"), &report)?;
    print_report(&report);
    println!("outputs in {}", out.display());
    Ok(())
}

fn compare(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let reports = [LearnerKind::Smc, LearnerKind::Gd]
        .into_iter()
        .map(|learner| {
            let cfg = ExperimentConfig {
                learner,
                ..config.clone()
            };
            run_experiment_with(&cfg, &RunOptions::default())
        })
        .collect::<Result<Vec<_>>>()?;
    let path = out.join("compare.csv");
    io::write_compare_csv(&path, &reports)?;
    println!(
        "{:<8} {:<26} {:<26} {:>10}",
        "learner", "train RMSE", "test RMSE", "time (s)"
    );
    for r in &reports {
        println!(
            "{:<8} {:<26} {:<26} {:>10.3}",
            r.learner.name(),
            format!("{:.6} ± {:.6}", r.train_rmse_mean, r.train_rmse_std),
            format!("{:.6} ± {:.6}", r.test_rmse_mean, r.test_rmse_std),
            r.wall_clock_s
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn print_report(r: &ExperimentReport) {
    println!(
        "{} on {}: {} runs x {} epochs, train RMSE {:.6} ± {:.6}, test RMSE {:.6} ± {:.6}, {:.3} s",
        r.learner.name(),
        r.plant.name(),
        r.runs.len(),
        r.epochs,
        r.train_rmse_mean,
        r.train_rmse_std,
        r.test_rmse_mean,
        r.test_rmse_std,
        r.wall_clock_s
    );
    for (run, msg) in &r.failed_runs {
        println!("run {run} excluded: {msg}");
    }
}
