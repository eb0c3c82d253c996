//! Deterministic CSV emission.
//!
//! Every float is written as `{:.16e}` (17 significant digits, no locale),
//! which round-trips exactly through `str::parse::<f64>`.

use std::fs::File;
use std::path::Path;

use csv::Writer;

use crate::error::Result;
use crate::harness::{ExperimentReport, TraceRow};

pub const TRACE_HEADER: [&str; 8] = ["k", "t", "u", "y", "y_n", "e", "alpha", "q"];
pub const PLANT_HEADER: [&str; 4] = ["k", "t", "u", "y"];
pub const EPOCHS_HEADER: [&str; 4] = ["run", "seed", "epoch", "train_rmse"];
pub const RUNS_HEADER: [&str; 15] = [
    "run",
    "seed",
    "final_train_rmse",
    "test_rmse",
    "alpha_initial",
    "alpha_min",
    "alpha_max",
    "final_alpha",
    "final_q",
    "max_abs_error",
    "max_k_residual",
    "denom_guard_hits",
    "sigma_projections",
    "q_saturations",
    "degenerate_firings",
];
pub const SUMMARY_HEADER: [&str; 10] = [
    "plant",
    "learner",
    "epochs",
    "runs",
    "failed_runs",
    "train_rmse_mean",
    "train_rmse_std",
    "test_rmse_mean",
    "test_rmse_std",
    "alpha_max",
];
pub const COMPARE_HEADER: [&str; 5] = [
    "learner",
    "plant",
    "train_rmse",
    "test_rmse",
    "wall_clock_s",
];

/// Full-precision, locale-independent float text.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `mean±std` cell used by the comparison table.
pub fn fmt_mean_std(mean: f64, std: f64) -> String {
    format!("{}±{}", fmt_f64(mean), fmt_f64(std))
}

fn create(path: &Path) -> Result<Writer<File>> {
    Ok(Writer::from_path(path)?)
}

/// Simulated plant trajectory `(k, t, u, y)`.
pub fn write_plant_csv(path: &Path, t_o: f64, u: &[f64], y: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(PLANT_HEADER)?;
    for (k, (u, y)) in u.iter().zip(y).enumerate() {
        w.write_record([
            k.to_string(),
            fmt_f64(k as f64 * t_o),
            fmt_f64(*u),
            fmt_f64(*y),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(TRACE_HEADER)?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            fmt_f64(r.t),
            fmt_f64(r.u),
            fmt_f64(r.y),
            fmt_f64(r.y_n),
            fmt_f64(r.e),
            fmt_f64(r.alpha),
            fmt_f64(r.q),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-run, per-epoch training RMSE.
pub fn write_epochs_csv(path: &Path, report: &ExperimentReport) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(EPOCHS_HEADER)?;
    for run in &report.runs {
        for (epoch, v) in run.epoch_train_rmse.iter().enumerate() {
            w.write_record([
                run.run.to_string(),
                run.seed.to_string(),
                (epoch + 1).to_string(),
                fmt_f64(*v),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-run final metrics and learner diagnostics.
pub fn write_runs_csv(path: &Path, report: &ExperimentReport) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(RUNS_HEADER)?;
    for r in &report.runs {
        w.write_record([
            r.run.to_string(),
            r.seed.to_string(),
            fmt_f64(r.final_train_rmse),
            fmt_f64(r.test_rmse),
            fmt_f64(r.alpha_initial),
            fmt_f64(r.alpha_min),
            fmt_f64(r.alpha_max),
            fmt_f64(r.final_alpha),
            fmt_f64(r.final_q),
            fmt_f64(r.max_abs_error),
            fmt_f64(r.max_k_residual),
            r.denom_guard_hits.to_string(),
            r.sigma_projections.to_string(),
            r.q_saturations.to_string(),
            r.degenerate_firings.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One aggregate row. Wall-clock time is left out so the file is reproducible.
pub fn write_summary_csv(path: &Path, report: &ExperimentReport) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(SUMMARY_HEADER)?;
    let alpha_max = report
        .runs
        .iter()
        .map(|r| r.alpha_max)
        .fold(f64::NEG_INFINITY, f64::max);
    w.write_record([
        report.plant.name().to_string(),
        report.learner.name().to_string(),
        report.epochs.to_string(),
        report.runs.len().to_string(),
        report.failed_runs.len().to_string(),
        fmt_f64(report.train_rmse_mean),
        fmt_f64(report.train_rmse_std),
        fmt_f64(report.test_rmse_mean),
        fmt_f64(report.test_rmse_std),
        fmt_f64(alpha_max),
    ])?;
    w.flush()?;
    Ok(())
}

/// Side-by-side learner comparison, one row per report.
pub fn write_compare_csv(path: &Path, reports: &[ExperimentReport]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(COMPARE_HEADER)?;
    for r in reports {
        w.write_record([
            r.learner.name().to_string(),
            r.plant.name().to_string(),
            fmt_mean_std(r.train_rmse_mean, r.train_rmse_std),
            fmt_mean_std(r.test_rmse_mean, r.test_rmse_std),
            format!("{:.3}", r.wall_clock_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}
