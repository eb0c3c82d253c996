//! Online gradient-descent baseline over the same network.
//!
//! Minimizes the per-sample loss `E = e^2 / 2` with exact analytic partial
//! derivatives. The updated widths and `q` go through the same projection as
//! the sliding-mode learner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{infer_into, InferenceCache, NetworkState};
use crate::smc::{clamp_unit, project_sigmas, StepDiagnostics};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GdParams {
    /// Step size for consequents and `q`.
    pub eta: f64,
    /// Step size for centers and widths.
    pub eta_ant: f64,
    /// Lower bound applied to widths after each step.
    pub sigma_floor: f64,
    /// Upper bound applied to widths after each step.
    pub sigma_ceiling: f64,
}

impl Default for GdParams {
    fn default() -> Self {
        Self {
            eta: 0.05,
            eta_ant: 0.005,
            sigma_floor: 1e-3,
            sigma_ceiling: 10.0,
        }
    }
}

impl GdParams {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("gd.eta", self.eta),
            ("gd.eta_ant", self.eta_ant),
            ("gd.sigma_floor", self.sigma_floor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(key, format!("{v} must be positive")));
            }
        }
        if !(self.sigma_ceiling > self.sigma_floor) {
            return Err(Error::validation(
                "gd.sigma_ceiling",
                "must exceed gd.sigma_floor",
            ));
        }
        Ok(())
    }
}

/// Partial derivatives of `E` with the same layout as the network parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    pub center: Vec<f64>,
    pub sigma_lower: Vec<f64>,
    pub sigma_upper: Vec<f64>,
    /// Rule-major, `a[r * I + i]`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub q: f64,
}

impl Gradients {
    /// Flattened in the order of [`NetworkState::params_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 * self.center.len() + self.a.len() + self.b.len() + 1);
        v.extend_from_slice(&self.center);
        v.extend_from_slice(&self.sigma_lower);
        v.extend_from_slice(&self.sigma_upper);
        v.extend_from_slice(&self.a);
        v.extend_from_slice(&self.b);
        v.push(self.q);
        v
    }
}

/// Exact gradient of `(y_N - y)^2 / 2` at the snapshot described by `cache`.
pub fn gd_gradients(net: &NetworkState, cache: &InferenceCache, x: &[f64], y: f64) -> Gradients {
    let mut g = Gradients::default();
    gradients_into(net, cache, x, y, &mut g);
    g
}

fn gradients_into(
    net: &NetworkState,
    cache: &InferenceCache,
    x: &[f64],
    y: f64,
    g: &mut Gradients,
) {
    let e = cache.y_n - y;
    let q = net.q;
    let n = net.rule_count();
    let m = net.mf_count();
    let inputs = net.input_count();

    g.a.resize(n * inputs, 0.0);
    g.b.resize(n, 0.0);
    for r in 0..n {
        let gr = e * cache.blended(q, r);
        g.b[r] = gr;
        for (a, xi) in g.a[r * inputs..(r + 1) * inputs].iter_mut().zip(x) {
            *a = gr * xi;
        }
    }
    g.q = e * cache.q_slope();

    // d(sum_r f_r w~_r)/d(log w_r) = (f_r - y_level) w~_r; uniform fallback
    // weights do not depend on the antecedents.
    let y_lo: f64 = cache
        .f
        .iter()
        .zip(&cache.wt_lower)
        .map(|(f, w)| f * w)
        .sum();
    let y_up: f64 = cache
        .f
        .iter()
        .zip(&cache.wt_upper)
        .map(|(f, w)| f * w)
        .sum();
    let mut acc_lo = vec![0.0; m];
    let mut acc_up = vec![0.0; m];
    for r in 0..n {
        let lo = if cache.degenerate_lower {
            0.0
        } else {
            (cache.f[r] - y_lo) * cache.wt_lower[r]
        };
        let up = if cache.degenerate_upper {
            0.0
        } else {
            (cache.f[r] - y_up) * cache.wt_upper[r]
        };
        for &j in cache.rule_mfs(r) {
            acc_lo[j] += lo;
            acc_up[j] += up;
        }
    }

    g.center.resize(m, 0.0);
    g.sigma_lower.resize(m, 0.0);
    g.sigma_upper.resize(m, 0.0);
    let mut j = 0;
    for (i, sets) in net.mf_grid.iter().enumerate() {
        for mf in sets {
            let d = x[i] - mf.center;
            let sl2 = mf.sigma_lower * mf.sigma_lower;
            let su2 = mf.sigma_upper * mf.sigma_upper;
            let lo = e * q * acc_lo[j];
            let up = e * (1.0 - q) * acc_up[j];
            g.center[j] = lo * d / sl2 + up * d / su2;
            g.sigma_lower[j] = lo * d * d / (sl2 * mf.sigma_lower);
            g.sigma_upper[j] = up * d * d / (su2 * mf.sigma_upper);
            j += 1;
        }
    }
}

/// Stateful online gradient-descent driver.
#[derive(Clone, Debug)]
pub struct GdLearner {
    pub params: GdParams,
    cache: InferenceCache,
    grads: Gradients,
    steps: u64,
}

impl GdLearner {
    pub fn new(params: GdParams) -> Self {
        Self {
            params,
            cache: InferenceCache::default(),
            grads: Gradients::default(),
            steps: 0,
        }
    }

    pub fn step(&mut self, net: &mut NetworkState, x: &[f64], y: f64) -> Result<StepDiagnostics> {
        infer_into(net, x, &mut self.cache)?;
        gradients_into(net, &self.cache, x, y, &mut self.grads);
        let mut diag = StepDiagnostics {
            e: self.cache.y_n - y,
            y_n: self.cache.y_n,
            degenerate_firing: self.cache.is_degenerate(),
            ..Default::default()
        };
        apply(net, &self.grads, &self.params, &mut diag);
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

fn apply(net: &mut NetworkState, g: &Gradients, p: &GdParams, diag: &mut StepDiagnostics) {
    for (j, mf) in net.mf_grid.iter_mut().flatten().enumerate() {
        mf.center -= p.eta_ant * g.center[j];
        mf.sigma_lower -= p.eta_ant * g.sigma_lower[j];
        mf.sigma_upper -= p.eta_ant * g.sigma_upper[j];
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
            *a -= p.eta * g.a[r * inputs + i];
        }
        c.b -= p.eta * g.b[r];
    }
    let (q, saturated) = clamp_unit(net.q - p.eta * g.q);
    net.q = q;
    diag.q_saturated = saturated;
}

/// Pure single-step transition.
pub fn gd_step(net: &NetworkState, x: &[f64], y: f64, params: &GdParams) -> Result<NetworkState> {
    let mut next = net.clone();
    GdLearner::new(params.clone()).step(&mut next, x, y)?;
    Ok(next)
}
