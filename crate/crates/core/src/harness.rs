//! Series-parallel identification experiments.
//!
//! The identifier sees the plant input and the plant's own two most recent
//! outputs, `x = (u(k), y(k-1), y(k-2))`, and predicts the next plant output.
//! One epoch is a full pass over the simulated horizon; parameters persist
//! across epochs. Runs differ only in their seed (`seed + run_index`) and are
//! executed in parallel, then aggregated in run order.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, LearnerKind, PlantKind};
use crate::error::{Error, Result};
use crate::gd::GdLearner;
use crate::mf::Type2GaussianMF;
use crate::network::{infer_into, InferenceCache, NetworkState, RuleConsequent};
use crate::plants::{input_ex1_shifted, input_ex2, PlantState};
use crate::smc::{SmcLearner, StepDiagnostics};

/// Number of network inputs used by the harness.
pub const REGRESSOR_LEN: usize = 3;

/// Phase offset of the held-out ex1 excitation, in radians.
pub const EX1_TEST_PHASE: f64 = 1.0;

/// Identifier inputs `(u(k), y(k-1), y(k-2))`.
///
/// `y_hist[0]` is the most recent output; missing history reads as zero.
pub fn build_regressor(u_k: f64, y_hist: &[f64]) -> [f64; REGRESSOR_LEN] {
    [
        u_k,
        y_hist.first().copied().unwrap_or(0.0),
        y_hist.get(1).copied().unwrap_or(0.0),
    ]
}

/// Backward difference `(x(k) - x(k-1)) / dt` of each regressor component.
pub fn regressor_rate(
    x: &[f64; REGRESSOR_LEN],
    prev: &[f64; REGRESSOR_LEN],
    dt: f64,
) -> [f64; REGRESSOR_LEN] {
    std::array::from_fn(|i| (x[i] - prev[i]) / dt)
}

/// Root-mean-square of a sequence of errors.
pub fn rmse(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptySequence);
    }
    let sum: f64 = errors.iter().map(|e| e * e).sum();
    Ok((sum / errors.len() as f64).sqrt())
}

/// One row of a per-step trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub k: u64,
    pub t: f64,
    pub u: f64,
    pub y: f64,
    pub y_n: f64,
    pub e: f64,
    pub alpha: f64,
    pub q: f64,
}

/// Input/output record of one simulated plant trajectory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Segment {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Regressor of sample `k` given the output sequence `y` (which may be a
    /// noisy copy of `self.y`).
    pub fn regressor(&self, y: &[f64], k: usize) -> [f64; REGRESSOR_LEN] {
        let y1 = if k >= 1 { y[k - 1] } else { 0.0 };
        let y2 = if k >= 2 { y[k - 2] } else { 0.0 };
        build_regressor(self.u[k], &[y1, y2])
    }
}

/// Train and held-out test data for one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub train: Segment,
    pub test: Segment,
    /// Output history preceding `test[0]`, most recent first.
    pub test_history: [f64; 2],
}

fn simulate_ex1(horizon: usize, t_o: f64, phase: f64) -> Result<Segment> {
    let mut plant = PlantState::new(t_o);
    let mut seg = Segment::default();
    for k in 0..horizon {
        let u = input_ex1_shifted(k as u64, t_o, phase);
        let y = plant.step_nonbibo(u)?;
        seg.u.push(u);
        seg.y.push(y);
    }
    Ok(seg)
}

fn simulate_ex2(horizon: usize, t_o: f64, period: usize, input_period: usize) -> Segment {
    let mut plant = PlantState::new(t_o);
    let mut seg = Segment::default();
    for k in 0..horizon {
        let u = input_ex2(k as u64, input_period);
        let y = plant.step_timevarying(u, period);
        seg.u.push(u);
        seg.y.push(y);
    }
    seg
}

/// Simulates the configured plant and splits it into train and test data.
pub fn build_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    let horizon = config.horizon();
    let t_o = config.sample_time;
    match config.plant {
        PlantKind::Ex1 => Ok(Dataset {
            train: simulate_ex1(horizon, t_o, 0.0)?,
            test: simulate_ex1(horizon, t_o, EX1_TEST_PHASE)?,
            test_history: [0.0; 2],
        }),
        PlantKind::Ex2 => {
            let tv = &config.timevarying;
            let full = simulate_ex2(horizon, t_o, tv.period, tv.input_period);
            let split = (config.train_fraction * horizon as f64).floor() as usize;
            let at = |k: usize| {
                if k < split + 1 && k >= 1 {
                    full.y[split - k]
                } else {
                    0.0
                }
            };
            Ok(Dataset {
                train: Segment {
                    u: full.u[..split].to_vec(),
                    y: full.y[..split].to_vec(),
                },
                test: Segment {
                    u: full.u[split..].to_vec(),
                    y: full.y[split..].to_vec(),
                },
                test_history: [at(1), at(2)],
            })
        }
    }
}

/// Per-input `(min, max)` of the training regressors.
pub fn regressor_ranges(seg: &Segment) -> [(f64, f64); REGRESSOR_LEN] {
    let mut ranges = [(f64::INFINITY, f64::NEG_INFINITY); REGRESSOR_LEN];
    for k in 0..seg.len() {
        for (r, v) in ranges.iter_mut().zip(seg.regressor(&seg.y, k)) {
            r.0 = r.0.min(v);
            r.1 = r.1.max(v);
        }
    }
    ranges
}

/// Random network spread over the observed input ranges.
pub fn init_network(
    config: &ExperimentConfig,
    ranges: &[(f64, f64)],
    rng: &mut impl Rng,
) -> Result<NetworkState> {
    let init = &config.init;
    let k_sets = config.mfs_per_input;
    let (floor, ceiling) = (config.smc.sigma_floor, config.smc.sigma_ceiling);
    let mut grid = Vec::with_capacity(ranges.len());
    for &(lo, hi) in ranges {
        let span = if hi - lo > 1e-9 { hi - lo } else { 1.0 };
        let mut sets = Vec::with_capacity(k_sets);
        for k in 0..k_sets {
            let base = if k_sets == 1 {
                0.5 * (lo + hi)
            } else {
                lo + span * k as f64 / (k_sets - 1) as f64
            };
            let center = base + span * uniform(rng, -init.center_jitter, init.center_jitter);
            let upper = (uniform(rng, init.sigma_scale_min, init.sigma_scale_max) * span
                / k_sets as f64)
                .clamp(floor, ceiling);
            let lower =
                (upper * uniform(rng, init.sigma_ratio_min, init.sigma_ratio_max)).max(floor);
            sets.push(Type2GaussianMF::new(center, lower, upper)?);
        }
        grid.push(sets);
    }
    let n = k_sets.pow(ranges.len() as u32);
    let consequents = (0..n)
        .map(|_| RuleConsequent {
            a: (0..ranges.len())
                .map(|_| uniform(rng, -init.a_range, init.a_range))
                .collect(),
            b: uniform(rng, -init.b_range, init.b_range),
        })
        .collect();
    let alpha = config.smc.alpha_init;
    NetworkState::new(grid, consequents, init.q, alpha, config.smc.rho_ant * alpha)
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

enum Learner {
    Smc(SmcLearner),
    Gd(GdLearner),
    Frozen(InferenceCache),
}

impl Learner {
    fn new(config: &ExperimentConfig) -> Self {
        match config.learner {
            LearnerKind::Smc => Learner::Smc(SmcLearner::new(config.smc.clone())),
            LearnerKind::Gd => Learner::Gd(GdLearner::new(config.gd.clone())),
            LearnerKind::Frozen => Learner::Frozen(InferenceCache::default()),
        }
    }

    fn step(
        &mut self,
        net: &mut NetworkState,
        x: &[f64],
        x_dot: &[f64],
        y: f64,
    ) -> Result<StepDiagnostics> {
        match self {
            Learner::Smc(l) => l.step(net, x, x_dot, y),
            Learner::Gd(l) => l.step(net, x, y),
            Learner::Frozen(cache) => {
                infer_into(net, x, cache)?;
                Ok(StepDiagnostics {
                    e: cache.y_n - y,
                    y_n: cache.y_n,
                    degenerate_firing: cache.is_degenerate(),
                    ..Default::default()
                })
            }
        }
    }

    /// Value reported in the `alpha` trace column.
    fn rate(&self, net: &NetworkState) -> f64 {
        match self {
            Learner::Gd(l) => l.params.eta,
            _ => net.alpha,
        }
    }
}

/// Outcome of one seeded run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub run: usize,
    pub seed: u64,
    pub epoch_train_rmse: Vec<f64>,
    pub final_train_rmse: f64,
    pub test_rmse: f64,
    pub alpha_initial: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub final_alpha: f64,
    pub final_q: f64,
    /// Largest `|e|` seen during training.
    pub max_abs_error: f64,
    pub max_k_residual: f64,
    pub denom_guard_hits: u64,
    pub sigma_projections: u64,
    pub q_saturations: u64,
    pub degenerate_firings: u64,
    /// Last training epoch of the run, when traces were requested.
    #[serde(skip)]
    pub trace: Option<Vec<TraceRow>>,
    #[serde(skip)]
    pub final_network: Option<NetworkState>,
}

/// Aggregated outcome of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub plant: PlantKind,
    pub learner: LearnerKind,
    pub epochs: usize,
    pub runs: Vec<RunReport>,
    /// `(run index, error message)` of runs excluded from the aggregates.
    pub failed_runs: Vec<(usize, String)>,
    /// Mean over runs of each epoch's train RMSE.
    pub epoch_train_rmse: Vec<f64>,
    pub train_rmse_mean: f64,
    pub train_rmse_std: f64,
    pub test_rmse_mean: f64,
    pub test_rmse_std: f64,
    pub wall_clock_s: f64,
}

/// Options that do not change the numerical outcome.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Keep the last-epoch trace of these runs.
    pub trace_runs: Vec<usize>,
    pub keep_networks: bool,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with(config, &RunOptions::default())
}

pub fn run_experiment_with(
    config: &ExperimentConfig,
    options: &RunOptions,
) -> Result<ExperimentReport> {
    config.validate()?;
    let started = Instant::now();
    let data = build_dataset(config)?;
    let ranges = regressor_ranges(&data.train);

    let outcomes: Vec<Result<RunReport>> = (0..config.runs)
        .into_par_iter()
        .map(|run| {
            run_single(config, &data, &ranges, run, options).map_err(|e| Error::RunFailed {
                run,
                source: Box::new(e),
            })
        })
        .collect();

    let mut runs = Vec::new();
    let mut failed_runs = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(r) => runs.push(r),
            Err(e) if config.exclude_failed_runs => {
                if let Error::RunFailed { run, source } = &e {
                    failed_runs.push((*run, source.to_string()));
                }
            }
            Err(e) => return Err(e),
        }
    }
    if runs.is_empty() {
        return Err(Error::validation("runs", "every run failed"));
    }

    let epoch_train_rmse = (0..config.epochs)
        .map(|ep| mean(runs.iter().map(|r| r.epoch_train_rmse[ep])))
        .collect();
    let train: Vec<f64> = runs.iter().map(|r| r.final_train_rmse).collect();
    let test: Vec<f64> = runs.iter().map(|r| r.test_rmse).collect();

    Ok(ExperimentReport {
        plant: config.plant,
        learner: config.learner,
        epochs: config.epochs,
        epoch_train_rmse,
        train_rmse_mean: mean(train.iter().copied()),
        train_rmse_std: sample_std(&train),
        test_rmse_mean: mean(test.iter().copied()),
        test_rmse_std: sample_std(&test),
        runs,
        failed_runs,
        wall_clock_s: started.elapsed().as_secs_f64(),
    })
}

fn run_single(
    config: &ExperimentConfig,
    data: &Dataset,
    ranges: &[(f64, f64)],
    run: usize,
    options: &RunOptions,
) -> Result<RunReport> {
    let seed = config.seed.wrapping_add(run as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = init_network(config, ranges, &mut rng)?;
    let mut learner = Learner::new(config);
    let noise = if config.noise_std > 0.0 {
        Some(Normal::new(0.0, config.noise_std).expect("validated std"))
    } else {
        None
    };
    let dt = config.smc.dt;
    let train = &data.train;
    let want_trace = options.trace_runs.contains(&run);

    let mut report = RunReport {
        run,
        seed,
        epoch_train_rmse: Vec::with_capacity(config.epochs),
        final_train_rmse: 0.0,
        test_rmse: 0.0,
        alpha_initial: net.alpha,
        alpha_min: net.alpha,
        alpha_max: net.alpha,
        final_alpha: 0.0,
        final_q: 0.0,
        max_abs_error: 0.0,
        max_k_residual: 0.0,
        denom_guard_hits: 0,
        sigma_projections: 0,
        q_saturations: 0,
        degenerate_firings: 0,
        trace: None,
        final_network: None,
    };

    let mut y_meas = train.y.clone();
    let mut errors = vec![0.0; train.len()];
    let mut prev_x: Option<[f64; REGRESSOR_LEN]> = None;
    for epoch in 0..config.epochs {
        if let Some(dist) = &noise {
            for (m, y) in y_meas.iter_mut().zip(&train.y) {
                *m = y + dist.sample(&mut rng);
            }
        }
        let last_epoch = epoch + 1 == config.epochs;
        let mut trace = (want_trace && last_epoch).then(|| Vec::with_capacity(train.len()));
        for k in 0..train.len() {
            let x = train.regressor(&y_meas, k);
            // the regressor stream is continuous across epochs; only the very
            // first sample has no predecessor
            let x_dot = prev_x.map_or([0.0; REGRESSOR_LEN], |p| regressor_rate(&x, &p, dt));
            prev_x = Some(x);
            let (alpha, q) = (learner.rate(&net), net.q);
            let diag = learner.step(&mut net, &x, &x_dot, y_meas[k])?;
            errors[k] = diag.e;

            report.max_abs_error = report.max_abs_error.max(diag.e.abs());
            report.max_k_residual = report.max_k_residual.max(diag.k_r_residual);
            report.alpha_min = report.alpha_min.min(net.alpha);
            report.alpha_max = report.alpha_max.max(net.alpha);
            report.denom_guard_hits += u64::from(diag.denom_guard_hits);
            report.sigma_projections += u64::from(diag.sigma_projections);
            report.q_saturations += u64::from(diag.q_saturated);
            report.degenerate_firings += u64::from(diag.degenerate_firing);
            if let Some(rows) = trace.as_mut() {
                rows.push(TraceRow {
                    k: k as u64,
                    t: k as f64 * config.sample_time,
                    u: train.u[k],
                    y: y_meas[k],
                    y_n: diag.y_n,
                    e: diag.e,
                    alpha,
                    q,
                });
            }
        }
        report.epoch_train_rmse.push(rmse(&errors)?);
        if trace.is_some() {
            report.trace = trace;
        }
    }
    report.final_train_rmse = *report.epoch_train_rmse.last().expect("epochs > 0");
    report.test_rmse = evaluate(&net, &data.test, data.test_history)?;
    report.final_alpha = net.alpha;
    report.final_q = net.q;
    if options.keep_networks {
        report.final_network = Some(net);
    }
    Ok(report)
}

/// RMSE of a frozen network over a segment, seeded with the given history.
pub fn evaluate(net: &NetworkState, seg: &Segment, history: [f64; 2]) -> Result<f64> {
    let mut cache = InferenceCache::for_network(net);
    let mut errors = Vec::with_capacity(seg.len());
    for k in 0..seg.len() {
        let y1 = if k >= 1 { seg.y[k - 1] } else { history[0] };
        let y2 = match k {
            0 => history[1],
            1 => history[0],
            _ => seg.y[k - 2],
        };
        let x = build_regressor(seg.u[k], &[y1, y2]);
        infer_into(net, &x, &mut cache)?;
        errors.push(cache.y_n - seg.y[k]);
    }
    rmse(&errors)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Sample standard deviation; zero for fewer than two values.
fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values.iter().copied());
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    var.sqrt()
}
