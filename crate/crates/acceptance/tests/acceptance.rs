//! Acceptance criteria, each checked at its pinned tolerance.
//!
//! Run with `cargo test -p t2fnn-acceptance`. One line per criterion.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use t2fnn::config::{ExperimentConfig, LearnerKind, PlantKind};
use t2fnn::gd::gd_gradients;
use t2fnn::harness::{
    build_dataset, init_network, regressor_ranges, regressor_rate, run_experiment, ExperimentReport,
};
use t2fnn::mf::Type2GaussianMF;
use t2fnn::network::{infer, InferenceCache, NetworkState, RuleConsequent};
use t2fnn::plants::PlantState;
use t2fnn::smc::{compute_rates, smooth_sign, Rates, SmcLearner, SmcParams};
use t2fnn::Error;
use t2fnn_acceptance::{verdict, Suite, Verdict};

const SUM_TOL: f64 = 1e-12;
const K_TOL: f64 = 1e-10;
const FD_STEP: f64 = 1e-6;
const FD_TOL: f64 = 1e-5;
/// Gradient magnitude below which the finite-difference comparison is absolute.
const FD_SCALE_FLOOR: f64 = 1e-4;
const TYPE1_TOL: f64 = 1e-12;
const ALPHA_SLACK: f64 = 1e-9;

fn main() {
    let mut suite = Suite::new();
    suite.criterion("1", "non-BIBO plant facts", criterion_plant);
    suite.criterion(
        "2",
        "sliding identity and normalization",
        criterion_identities,
    );
    suite.criterion("3", "gradient oracle", criterion_gradients);
    suite.criterion("4", "type-1 reduction", criterion_type1);

    let mut smc_reports = Vec::new();
    let mut smc_ex1 = None;
    suite.criterion("5", "learning efficacy, ex1", || {
        let (verdict, smc) = criterion_ex1();
        smc_ex1 = Some(smc.clone());
        smc_reports.push(smc);
        verdict
    });
    suite.criterion("6", "learning efficacy, ex2", || {
        let (verdict, smc) = criterion_ex2();
        smc_reports.push(smc);
        verdict
    });
    suite.criterion("7", "SMC vs GD ordering, ex1", || {
        criterion_ordering(smc_ex1.as_ref())
    });
    suite.criterion("8", "alpha boundedness", || criterion_alpha(&smc_reports));
    suite.criterion(
        "9",
        "determinism of identify --seed 7",
        criterion_determinism,
    );
    std::process::exit(suite.finish());
}

fn criterion_plant() -> Verdict {
    let started = Instant::now();
    let diverge_at = {
        let mut plant = PlantState::new(1e-3);
        (0..100_000u64).find_map(|_| match plant.step_nonbibo(0.83) {
            Err(Error::Diverged { step, .. }) => Some(step),
            _ => None,
        })
    };
    let mut plant = PlantState::new(1e-3);
    let mut sup: f64 = 0.0;
    let mut bounded = Ok(());
    for _ in 0..100_000 {
        match plant.step_nonbibo(0.82) {
            Ok(y) => sup = sup.max(y.abs()),
            Err(e) => {
                bounded = Err(e);
                break;
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();

    let diverges = diverge_at.is_some();
    let sup_ok = bounded.is_ok() && (sup - 2.26).abs() <= 0.05;
    let sup_text = match &bounded {
        Ok(()) => format!("u=0.82 sup|y| = {sup:.4}"),
        Err(e) => format!("u=0.82 {e} (sup before escape {sup:.4})"),
    };
    verdict(
        diverges && sup_ok && secs < 5.0,
        format!(
            "u=0.83 diverged at step {diverge_at:?}; {sup_text}, expected 2.26 ± 0.05; {secs:.3} s"
        ),
    )
}

/// Random network whose upper widths are strictly wider than the lower ones.
fn random_network(rng: &mut ChaCha8Rng, inputs: usize, sets: usize) -> NetworkState {
    let grid = (0..inputs)
        .map(|_| {
            (0..sets)
                .map(|_| {
                    let lower = rng.random_range(0.3..1.0);
                    let upper = lower + rng.random_range(0.1..1.0);
                    Type2GaussianMF::new(rng.random_range(-1.0..1.0), lower, upper).unwrap()
                })
                .collect()
        })
        .collect();
    let rules = sets.pow(inputs as u32);
    let consequents = (0..rules)
        .map(|_| RuleConsequent {
            a: (0..inputs).map(|_| rng.random_range(-1.0..1.0)).collect(),
            b: rng.random_range(-1.0..1.0),
        })
        .collect();
    let alpha = rng.random_range(0.0..5.0);
    NetworkState::new(
        grid,
        consequents,
        rng.random_range(0.1..0.9),
        alpha,
        0.1 * alpha,
    )
    .unwrap()
}

/// Row-major membership indices of every rule, last input varying fastest.
fn rule_table(inputs: usize, sets: usize) -> Vec<Vec<usize>> {
    let rules = sets.pow(inputs as u32);
    (0..rules)
        .map(|r| {
            let mut rest = r;
            let mut idx = vec![0; inputs];
            for i in (0..inputs).rev() {
                idx[i] = i * sets + rest % sets;
                rest /= sets;
            }
            idx
        })
        .collect()
}

fn sums_ok(cache: &InferenceCache) -> bool {
    let lo: f64 = cache.wt_lower.iter().sum();
    let up: f64 = cache.wt_upper.iter().sum();
    (lo - 1.0).abs() <= SUM_TOL && (up - 1.0).abs() <= SUM_TOL
}

fn criterion_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let params = SmcParams::default();
    let mut rates = Rates::default();
    let mut worst: f64 = 0.0;
    let mut sum_failures = 0;
    let mut inferences = 0;
    let mut triples = 0;
    while triples < 1000 {
        let inputs = rng.random_range(1..=3);
        let sets = rng.random_range(1..=3);
        let net = random_network(&mut rng, inputs, sets);
        let x: Vec<f64> = (0..inputs).map(|_| rng.random_range(-2.0..2.0)).collect();
        // the identity holds exactly only where no width denominator is floored
        let near_center = net.mf_grid.iter().zip(&x).any(|(row, xi)| {
            row.iter()
                .any(|mf| (xi - mf.center).powi(2) < params.denom_guard)
        });
        if near_center {
            continue;
        }
        triples += 1;
        let x_dot: Vec<f64> = (0..inputs).map(|_| rng.random_range(-5.0..5.0)).collect();
        let e = rng.random_range(-1.0..1.0);
        let cache = infer(&net, &x).unwrap();
        inferences += 1;
        sum_failures += usize::from(!sums_ok(&cache));
        compute_rates(&net, &cache, &x, &x_dot, e, &params, &mut rates);

        let alpha_ant = params.rho_ant * net.alpha;
        let target = inputs as f64 * alpha_ant * smooth_sign(e, params.delta_s);
        let flat: Vec<&Type2GaussianMF> = net.mf_grid.iter().flatten().collect();
        let product = |j: usize, sigma: f64, sigma_dot: f64| {
            let i = j / sets;
            let d = x[i] - flat[j].center;
            let a = d / sigma;
            let a_dot = ((x_dot[i] - rates.center[j]) * sigma - d * sigma_dot) / (sigma * sigma);
            a * a_dot
        };
        for mfs in rule_table(inputs, sets) {
            let k_lo: f64 = mfs
                .iter()
                .map(|&j| product(j, flat[j].sigma_lower, rates.sigma_lower[j]))
                .sum();
            let k_up: f64 = mfs
                .iter()
                .map(|&j| product(j, flat[j].sigma_upper, rates.sigma_upper[j]))
                .sum();
            worst = worst.max((k_lo - target).abs()).max((k_up - target).abs());
        }
    }

    // normalization along a full learning epoch
    let config = ExperimentConfig::default();
    let data = build_dataset(&config).unwrap();
    let ranges = regressor_ranges(&data.train);
    let mut net = init_network(&config, &ranges, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let mut learner = SmcLearner::new(config.smc.clone());
    let mut prev = None;
    for k in 0..data.train.len() {
        let x = data.train.regressor(&data.train.y, k);
        let x_dot = prev.map_or([0.0; 3], |p| regressor_rate(&x, &p, config.smc.dt));
        prev = Some(x);
        learner.step(&mut net, &x, &x_dot, data.train.y[k]).unwrap();
        inferences += 1;
        sum_failures += usize::from(!sums_ok(learner.last_cache()));
    }

    verdict(
        worst < K_TOL && sum_failures == 0,
        format!(
            "max K_r residual {worst:.3e} over {triples} triples (tol {K_TOL:e}); \
             {sum_failures}/{inferences} inferences with normalized sums off by > {SUM_TOL:e}"
        ),
    )
}

fn loss(net: &NetworkState, x: &[f64], y: f64) -> f64 {
    let e = infer(net, x).unwrap().y_n - y;
    0.5 * e * e
}

fn criterion_gradients() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let classes = ["center", "sigma_lower", "sigma_upper", "a", "b", "q"];
    let mut covered = [0usize; 6];
    let mut worst: f64 = 0.0;
    let mut worst_at = String::new();
    let states = 120;
    for state in 0..states {
        let inputs = 1 + state % 3;
        let sets = 2 + state % 2;
        let net = random_network(&mut rng, inputs, sets);
        let x: Vec<f64> = (0..inputs).map(|_| rng.random_range(-1.5..1.5)).collect();
        let y = rng.random_range(-2.0..2.0);
        let cache = infer(&net, &x).unwrap();
        let analytic = gd_gradients(&net, &cache, &x, y).to_flat();

        let m = net.mf_count();
        let n = net.rule_count();
        let class_of = |p: usize| match p {
            p if p < m => 0,
            p if p < 2 * m => 1,
            p if p < 3 * m => 2,
            p if p < 3 * m + n * inputs => 3,
            p if p < 3 * m + n * inputs + n => 4,
            _ => 5,
        };
        let base = net.params_flat();
        let mut probe = net.clone();
        for (p, &g) in analytic.iter().enumerate() {
            let mut shifted = base.clone();
            shifted[p] = base[p] + FD_STEP;
            probe.set_params_flat(&shifted).unwrap();
            let plus = loss(&probe, &x, y);
            shifted[p] = base[p] - FD_STEP;
            probe.set_params_flat(&shifted).unwrap();
            let minus = loss(&probe, &x, y);
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let err = (g - numeric).abs() / g.abs().max(numeric.abs()).max(FD_SCALE_FLOOR);
            if g.abs() > FD_SCALE_FLOOR {
                covered[class_of(p)] += 1;
            }
            if err > worst {
                worst = err;
                worst_at = format!("state {state}, {} #{p}", classes[class_of(p)]);
            }
        }
    }
    let coverage = classes
        .iter()
        .zip(covered)
        .map(|(c, k)| format!("{c}:{k}"))
        .collect::<Vec<_>>()
        .join(" ");
    verdict(
        worst < FD_TOL && covered.iter().all(|&k| k > 0),
        format!(
            "max relative error {worst:.3e} at {worst_at} over {states} states (tol {FD_TOL:e}); \
             nonzero gradients checked per class {coverage}"
        ),
    )
}

fn criterion_type1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let mut worst: f64 = 0.0;
    let cases = 1000;
    for _ in 0..cases {
        let inputs = rng.random_range(1..=3);
        let sets = rng.random_range(1..=3);
        let mut net = random_network(&mut rng, inputs, sets);
        for mf in net.mf_grid.iter_mut().flatten() {
            mf.sigma_upper = mf.sigma_lower;
        }
        let x: Vec<f64> = (0..inputs).map(|_| rng.random_range(-1.5..1.5)).collect();

        let flat: Vec<&Type2GaussianMF> = net.mf_grid.iter().flatten().collect();
        let (mut num, mut den) = (0.0, 0.0);
        for (r, mfs) in rule_table(inputs, sets).iter().enumerate() {
            let w: f64 = mfs
                .iter()
                .map(|&j| {
                    let z = (x[j / sets] - flat[j].center) / flat[j].sigma_lower;
                    (-0.5 * z * z).exp()
                })
                .product();
            let c = &net.consequents[r];
            let f = c.b + c.a.iter().zip(&x).map(|(a, xi)| a * xi).sum::<f64>();
            num += w * f;
            den += w;
        }
        let expected = num / den;
        for q in [0.0, 0.5, 1.0] {
            net.q = q;
            let got = infer(&net, &x).unwrap().y_n;
            worst = worst.max((got - expected).abs());
        }
    }
    verdict(
        worst <= TYPE1_TOL,
        format!(
            "max |y_N - y_type1| {worst:.3e} over {cases} cases x 3 q values (tol {TYPE1_TOL:e})"
        ),
    )
}

fn protocol(plant: PlantKind, learner: LearnerKind) -> ExperimentConfig {
    ExperimentConfig {
        plant,
        learner,
        epochs: 30,
        runs: 10,
        seed: 0,
        mfs_per_input: 3,
        ..Default::default()
    }
}

fn run(config: &ExperimentConfig) -> ExperimentReport {
    let report = run_experiment(config).unwrap_or_else(|e| panic!("{e}"));
    assert!(report
        .epoch_train_rmse
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0));
    report
}

fn criterion_ex1() -> (Verdict, ExperimentReport) {
    let started = Instant::now();
    let smc = run(&protocol(PlantKind::Ex1, LearnerKind::Smc));
    let frozen = run(&protocol(PlantKind::Ex1, LearnerKind::Frozen));
    let secs = started.elapsed().as_secs_f64();
    let ratio = smc.train_rmse_mean / frozen.train_rmse_mean;
    let v = verdict(
        smc.train_rmse_mean < 0.1 && ratio < 0.2 && secs < 60.0,
        format!(
            "27 rules, train RMSE {:.5} ± {:.5} vs frozen {:.5} (ratio {:.4}); {secs:.2} s",
            smc.train_rmse_mean, smc.train_rmse_std, frozen.train_rmse_mean, ratio
        ),
    );
    (v, smc)
}

fn criterion_ex2() -> (Verdict, ExperimentReport) {
    let started = Instant::now();
    let smc = run(&protocol(PlantKind::Ex2, LearnerKind::Smc));
    let frozen = run(&protocol(PlantKind::Ex2, LearnerKind::Frozen));
    let secs = started.elapsed().as_secs_f64();
    let v = verdict(
        smc.train_rmse_mean < 0.15 && smc.train_rmse_mean < frozen.train_rmse_mean && secs < 30.0,
        format!(
            "T = 1000, train RMSE {:.5} ± {:.5} vs frozen {:.5}; {secs:.2} s",
            smc.train_rmse_mean, smc.train_rmse_std, frozen.train_rmse_mean
        ),
    );
    (v, smc)
}

fn criterion_ordering(smc: Option<&ExperimentReport>) -> Verdict {
    let smc = smc.ok_or("ex1 SMC report unavailable")?;
    let gd = run(&protocol(PlantKind::Ex1, LearnerKind::Gd));
    verdict(
        smc.train_rmse_mean <= gd.train_rmse_mean,
        format!(
            "seeds 0..9, 30 epochs: SMC {:.5} vs GD {:.5}",
            smc.train_rmse_mean, gd.train_rmse_mean
        ),
    )
}

fn criterion_alpha(reports: &[ExperimentReport]) -> Verdict {
    if reports.is_empty() {
        return Err("no SMC runs recorded".into());
    }
    let inputs = 3.0;
    let nu = SmcParams::default().nu;
    let mut checked = 0;
    let mut worst_margin = f64::INFINITY;
    let mut min_alpha = f64::INFINITY;
    for run in reports.iter().flat_map(|r| &r.runs) {
        let bound = run
            .alpha_initial
            .max((inputs + 2.0) * run.max_abs_error / nu)
            + ALPHA_SLACK;
        worst_margin = worst_margin.min(bound - run.alpha_max);
        min_alpha = min_alpha.min(run.alpha_min);
        checked += 1;
    }
    verdict(
        worst_margin >= 0.0 && min_alpha >= 0.0,
        format!(
            "{checked} runs, smallest margin to the equilibrium bound {worst_margin:.4}, \
             smallest alpha {min_alpha:.4}"
        ),
    )
}

fn criterion_determinism() -> Verdict {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let out = dir.path().to_str().unwrap();
        let code = t2fnn::cli::run(["t2fnn", "identify", "--seed", "7", "--out-dir", out]);
        if code != 0 {
            return Err(format!("identify exited with {code}"));
        }
    }
    let files = csv_files(dirs[0].path());
    if !["trace.csv", "epochs.csv", "summary.csv"]
        .iter()
        .all(|f| files.iter().any(|g| g == f))
    {
        return Err(format!("missing outputs, found {files:?}"));
    }
    let mut differing = Vec::new();
    for name in &files {
        let a = fs::read(dirs[0].path().join(name)).unwrap();
        let b = fs::read(dirs[1].path().join(name)).map_err(|e| format!("{name}: {e}"))?;
        if a != b {
            differing.push(name.clone());
        }
    }
    verdict(
        differing.is_empty(),
        format!(
            "{} CSV files compared, differing: {differing:?}",
            files.len()
        ),
    )
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    names
}
