//! Sliding-mode online adaptation of every network parameter.
//!
//! The identification error `e = y_N - y` is the sliding surface. Each law is a
//! continuous-time rate driven by a smoothed sign of `e`:
//!
//! ```text
//! c'   = x' + (x - c) a1 s
//! sl'  = -(sl + sl^3 / (x - c)^2) a1 s          (same form for su)
//! a_r' = -x g_r alpha s / D,   b_r' = -g_r alpha s / D,   D = sum_r g_r^2
//! q'   = -alpha s / sum_r f_r (wl~_r - wu~_r)
//! alpha' = gamma (I + 2) |e| - nu gamma alpha
//! ```
//!
//! with `s = e / (|e| + delta_s)`, `g_r = q wl~_r + (1 - q) wu~_r` and the
//! antecedent rate `a1 = rho_ant * alpha`. One call to [`SmcLearner::step`]
//! evaluates all rates from a single frozen snapshot and advances them by one
//! explicit Euler step of length `dt`.
//!
//! With `A_ik = (x_i - c_ik) / sigma_ik`, the antecedent laws make
//! `sum_i A_ik A_ik' = I a1 s` for every rule, on both the lower and the upper
//! level. [`k_residual`] measures how far a set of rates is from that identity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{infer_into, InferenceCache, NetworkState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmcParams {
    /// Adaptation speed of the learning rate.
    pub gamma: f64,
    /// Leakage of the learning rate.
    pub nu: f64,
    /// Width of the sign smoothing.
    pub delta_s: f64,
    /// Antecedent rate as a fraction of `alpha`.
    pub rho_ant: f64,
    /// Floor applied to small denominators.
    pub denom_guard: f64,
    /// Euler step in seconds.
    pub dt: f64,
    pub sigma_floor: f64,
    /// Upper bound applied to widths after each step.
    pub sigma_ceiling: f64,
    pub alpha_init: f64,
}

impl Default for SmcParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            nu: 0.002,
            delta_s: 0.05,
            rho_ant: 0.1,
            denom_guard: 0.001,
            dt: 0.001,
            sigma_floor: 1e-3,
            sigma_ceiling: 10.0,
            alpha_init: 0.0,
        }
    }
}

impl SmcParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("smc.gamma", self.gamma),
            ("smc.nu", self.nu),
            ("smc.delta_s", self.delta_s),
            ("smc.rho_ant", self.rho_ant),
            ("smc.denom_guard", self.denom_guard),
            ("smc.dt", self.dt),
            ("smc.sigma_floor", self.sigma_floor),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(key, format!("{v} must be positive")));
            }
        }
        if !(self.sigma_ceiling > self.sigma_floor) {
            return Err(Error::validation(
                "smc.sigma_ceiling",
                "must exceed smc.sigma_floor",
            ));
        }
        if self.rho_ant > 1.0 {
            return Err(Error::validation("smc.rho_ant", "must not exceed 1"));
        }
        if !(self.alpha_init >= 0.0 && self.alpha_init.is_finite()) {
            return Err(Error::validation("smc.alpha_init", "must be nonnegative"));
        }
        Ok(())
    }
}

/// Bounds on the signals entering the stability argument.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityBounds {
    /// Bound on `|x_i'|`.
    pub b_xdot: f64,
    /// Lower bound of `x_i^2`.
    pub b_x2: f64,
    /// Bound on `|y'|`.
    pub b_ydot: f64,
    /// Bound on `|a_ri|`.
    pub b_a: f64,
    pub alpha_star: f64,
}

impl StabilityBounds {
    pub fn new(
        b_xdot: f64,
        b_x2: f64,
        b_ydot: f64,
        b_a: f64,
        alpha_star: f64,
        inputs: usize,
    ) -> Result<Self> {
        let bounds = Self {
            b_xdot,
            b_x2,
            b_ydot,
            b_a,
            alpha_star,
        };
        for (key, v) in [
            ("b_xdot", b_xdot),
            ("b_x2", b_x2),
            ("b_ydot", b_ydot),
            ("b_a", b_a),
            ("alpha_star", alpha_star),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(key, format!("{v} must be positive")));
            }
        }
        let min = bounds.min_alpha_star(inputs);
        if alpha_star < min {
            return Err(Error::validation(
                "alpha_star",
                format!("{alpha_star} is below the required {min}"),
            ));
        }
        Ok(bounds)
    }

    /// Smallest admissible `alpha_star` for these signal bounds.
    pub fn min_alpha_star(&self, inputs: usize) -> f64 {
        let i = inputs as f64;
        2.0 * (i * self.b_a * self.b_xdot + self.b_ydot) / (2.0 + i * self.b_x2)
    }
}

/// Terminal band `|e| <= alpha* nu / (2 (2 + I B_x2))` that the error settles in.
pub fn error_band(bounds: &StabilityBounds, nu: f64, inputs: usize) -> f64 {
    bounds.alpha_star * nu / (2.0 * (2.0 + inputs as f64 * bounds.b_x2))
}

/// Smoothed signum `e / (|e| + delta_s)`.
#[inline]
pub fn smooth_sign(e: f64, delta_s: f64) -> f64 {
    e / (e.abs() + delta_s)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepDiagnostics {
    /// Identification error before the update.
    pub e: f64,
    /// Network output before the update.
    pub y_n: f64,
    /// Smoothed sign of `e`.
    pub s: f64,
    /// `max_r |K_r - I a1 s|` over both firing levels, from the applied rates.
    pub k_r_residual: f64,
    pub q_saturated: bool,
    pub denom_guard_hits: u32,
    pub sigma_projections: u32,
    pub degenerate_firing: bool,
}

/// Continuous-time rates of every adapted quantity.
///
/// Membership rates are flat in input-major order; `a` is rule-major.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Rates {
    pub center: Vec<f64>,
    pub sigma_lower: Vec<f64>,
    pub sigma_upper: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub q: f64,
    pub alpha: f64,
    /// How many denominators were raised to the guard value.
    pub guard_hits: u32,
}

impl Rates {
    fn resize(&mut self, net: &NetworkState) {
        let m = net.mf_count();
        let n = net.rule_count();
        self.center.resize(m, 0.0);
        self.sigma_lower.resize(m, 0.0);
        self.sigma_upper.resize(m, 0.0);
        self.a.resize(n * net.input_count(), 0.0);
        self.b.resize(n, 0.0);
    }
}

/// Evaluates every adaptation law at the snapshot `(net, cache, e)`.
///
/// `cache` must come from inferring `net` at `x`.
pub fn compute_rates(
    net: &NetworkState,
    cache: &InferenceCache,
    x: &[f64],
    x_dot: &[f64],
    e: f64,
    params: &SmcParams,
    out: &mut Rates,
) {
    out.resize(net);
    out.guard_hits = 0;
    let s = smooth_sign(e, params.delta_s);
    let alpha = net.alpha;
    let alpha_ant = params.rho_ant * alpha;
    let guard = params.denom_guard;

    let mut j = 0;
    for (i, sets) in net.mf_grid.iter().enumerate() {
        for mf in sets {
            let d = x[i] - mf.center;
            let mut d2 = d * d;
            if d2 < guard {
                d2 = guard;
                out.guard_hits += 1;
            }
            out.center[j] = x_dot[i] + d * alpha_ant * s;
            let sl = mf.sigma_lower;
            let su = mf.sigma_upper;
            out.sigma_lower[j] = -(sl + sl * sl * sl / d2) * alpha_ant * s;
            out.sigma_upper[j] = -(su + su * su * su / d2) * alpha_ant * s;
            j += 1;
        }
    }

    let n = net.rule_count();
    let inputs = net.input_count();
    let mut denom: f64 = (0..n).map(|r| cache.blended(net.q, r).powi(2)).sum();
    if denom < guard {
        denom = guard;
        out.guard_hits += 1;
    }
    for r in 0..n {
        let step = -cache.blended(net.q, r) * alpha * s / denom;
        for (a, xi) in out.a[r * inputs..(r + 1) * inputs].iter_mut().zip(x) {
            *a = xi * step;
        }
        out.b[r] = step;
    }

    let mut slope = cache.q_slope();
    if slope.abs() < guard {
        slope = if slope < 0.0 { -guard } else { guard };
        out.guard_hits += 1;
    }
    out.q = -alpha * s / slope;

    out.alpha = params.gamma * (inputs as f64 + 2.0) * e.abs() - params.nu * params.gamma * alpha;
}

/// `max_r |K_r - I a1 s|` on both levels, where `K_r = sum_i A_ik A_ik'` is
/// propagated from the antecedent rates in `rates`.
pub fn k_residual(
    net: &NetworkState,
    cache: &InferenceCache,
    x: &[f64],
    x_dot: &[f64],
    rates: &Rates,
    alpha_ant: f64,
    s: f64,
) -> f64 {
    let m = net.mf_count();
    let mut prod_lower = Vec::with_capacity(m);
    let mut prod_upper = Vec::with_capacity(m);
    let mut j = 0;
    for (i, sets) in net.mf_grid.iter().enumerate() {
        for mf in sets {
            let d = x[i] - mf.center;
            let d_dot = x_dot[i] - rates.center[j];
            for (sigma, sigma_dot, out) in [
                (mf.sigma_lower, rates.sigma_lower[j], &mut prod_lower),
                (mf.sigma_upper, rates.sigma_upper[j], &mut prod_upper),
            ] {
                let a = d / sigma;
                let a_dot = (d_dot * sigma - d * sigma_dot) / (sigma * sigma);
                out.push(a * a_dot);
            }
            j += 1;
        }
    }
    let target = net.input_count() as f64 * alpha_ant * s;
    let mut worst: f64 = 0.0;
    for r in 0..net.rule_count() {
        let mfs = cache.rule_mfs(r);
        let k_lo: f64 = mfs.iter().map(|&j| prod_lower[j]).sum();
        let k_up: f64 = mfs.iter().map(|&j| prod_upper[j]).sum();
        worst = worst.max((k_lo - target).abs()).max((k_up - target).abs());
    }
    worst
}

/// Stateful driver owning the scratch buffers of the sliding-mode updates.
#[derive(Clone, Debug)]
pub struct SmcLearner {
    pub params: SmcParams,
    cache: InferenceCache,
    rates: Rates,
    steps: u64,
}

impl SmcLearner {
    pub fn new(params: SmcParams) -> Self {
        Self {
            params,
            cache: InferenceCache::default(),
            rates: Rates::default(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Inference cache of the most recent step (pre-update snapshot).
    pub fn last_cache(&self) -> &InferenceCache {
        &self.cache
    }

    /// Advances `net` by one Euler step toward the target `y`.
    ///
    /// On [`Error::NonFiniteUpdate`] the contents of `net` are unspecified.
    pub fn step(
        &mut self,
        net: &mut NetworkState,
        x: &[f64],
        x_dot: &[f64],
        y: f64,
    ) -> Result<StepDiagnostics> {
        if x_dot.len() != x.len() {
            return Err(Error::Shape {
                what: "input derivatives",
                expected: x.len(),
                got: x_dot.len(),
            });
        }
        infer_into(net, x, &mut self.cache)?;
        let p = &self.params;
        let e = self.cache.y_n - y;
        let s = smooth_sign(e, p.delta_s);
        let alpha_ant = p.rho_ant * net.alpha;
        compute_rates(net, &self.cache, x, x_dot, e, p, &mut self.rates);
        let k_r_residual = k_residual(net, &self.cache, x, x_dot, &self.rates, alpha_ant, s);

        let mut diag = StepDiagnostics {
            e,
            y_n: self.cache.y_n,
            s,
            k_r_residual,
            denom_guard_hits: self.rates.guard_hits,
            degenerate_firing: self.cache.is_degenerate(),
            ..Default::default()
        };

        let dt = p.dt;
        let rates = &self.rates;
        for (j, mf) in net.mf_grid.iter_mut().flatten().enumerate() {
            mf.center += dt * rates.center[j];
            mf.sigma_lower += dt * rates.sigma_lower[j];
            mf.sigma_upper += dt * rates.sigma_upper[j];
            diag.sigma_projections += project_sigmas(
                &mut mf.sigma_lower,
                &mut mf.sigma_upper,
                p.sigma_floor,
                p.sigma_ceiling,
            );
        }
        let inputs = net.input_count();
        for (r, c) in net.consequents.iter_mut().enumerate() {
            for (i, a) in c.a.iter_mut().enumerate() {
                *a += dt * rates.a[r * inputs + i];
            }
            c.b += dt * rates.b[r];
        }
        let (q, saturated) = clamp_unit(net.q + dt * rates.q);
        net.q = q;
        diag.q_saturated = saturated;
        net.alpha = (net.alpha + dt * rates.alpha).max(0.0);
        net.alpha_ant = p.rho_ant * net.alpha;

        self.steps += 1;
        if let Some(parameter) = net.first_non_finite() {
            return Err(Error::NonFiniteUpdate {
                parameter,
                step: self.steps,
            });
        }
        Ok(diag)
    }
}

/// Pure single-step transition: returns the updated copy of `net`.
pub fn smc_step(
    net: &NetworkState,
    x: &[f64],
    x_dot: &[f64],
    y: f64,
    params: &SmcParams,
) -> Result<(NetworkState, StepDiagnostics)> {
    let mut next = net.clone();
    let diag = SmcLearner::new(params.clone()).step(&mut next, x, x_dot, y)?;
    Ok((next, diag))
}

/// Clips both widths to `[floor, ceiling]` and restores `lower <= upper`.
/// Returns how many corrections were made.
pub(crate) fn project_sigmas(lower: &mut f64, upper: &mut f64, floor: f64, ceiling: f64) -> u32 {
    let mut hits = 0;
    // NaN falls through untouched and is caught by the finiteness check
    for sigma in [&mut *lower, &mut *upper] {
        if *sigma < floor {
            *sigma = floor;
            hits += 1;
        } else if *sigma > ceiling {
            *sigma = ceiling;
            hits += 1;
        }
    }
    if *lower > *upper {
        std::mem::swap(lower, upper);
        hits += 1;
    }
    hits
}

pub(crate) fn clamp_unit(q: f64) -> (f64, bool) {
    if q < 0.0 {
        (0.0, true)
    } else if q > 1.0 {
        (1.0, true)
    } else {
        (q, false)
    }
}
