//! Data model and forward pass of the interval type-2 A2-C0 TSK network.
//!
//! Antecedents are interval type-2 Gaussian sets, consequents are crisp affine
//! functions of the inputs. The rule base is the full Cartesian grid over the
//! per-input fuzzy sets, enumerated row-major: the set index of the last input
//! varies fastest. For inputs with `K_1, ..., K_I` sets, rule
//! `r = ((k_1 * K_2 + k_2) * K_3 + k_3) ...`.
//!
//! The output mixes the lower and upper normalized firing levels with the
//! sharing weight `q`:
//!
//! ```text
//! y_N = q * sum_r f_r * wl~_r + (1 - q) * sum_r f_r * wu~_r
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mf::Type2GaussianMF;

/// Strength sums below this are treated as "no rule fired".
pub const DEGENERATE_FIRING_THRESHOLD: f64 = 1e-300;

/// Affine rule consequent `f_r = a . x + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleConsequent {
    pub a: Vec<f64>,
    pub b: f64,
}

impl RuleConsequent {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + self.b
    }
}

/// Complete mutable parameter set of the network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    /// `mf_grid[i][k]` is the k-th fuzzy set on input i.
    pub mf_grid: Vec<Vec<Type2GaussianMF>>,
    pub consequents: Vec<RuleConsequent>,
    /// Sharing weight between the lower and upper firing levels, in `[0, 1]`.
    pub q: f64,
    /// Adaptive learning rate of the consequent and `q` laws.
    pub alpha: f64,
    /// Learning rate of the antecedent laws.
    pub alpha_ant: f64,
}

impl NetworkState {
    pub fn new(
        mf_grid: Vec<Vec<Type2GaussianMF>>,
        consequents: Vec<RuleConsequent>,
        q: f64,
        alpha: f64,
        alpha_ant: f64,
    ) -> Result<Self> {
        let net = Self {
            mf_grid,
            consequents,
            q,
            alpha,
            alpha_ant,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mf_grid.is_empty() {
            return Err(Error::validation(
                "mf_grid",
                "network needs at least one input",
            ));
        }
        for (i, sets) in self.mf_grid.iter().enumerate() {
            if sets.is_empty() {
                return Err(Error::validation(
                    "mf_grid",
                    format!("input {i} has no fuzzy sets"),
                ));
            }
            for mf in sets {
                mf.validate()?;
            }
        }
        let n = self.rule_count();
        if self.consequents.len() != n {
            return Err(Error::Shape {
                what: "rule consequents",
                expected: n,
                got: self.consequents.len(),
            });
        }
        let inputs = self.input_count();
        for c in &self.consequents {
            if c.a.len() != inputs {
                return Err(Error::Shape {
                    what: "consequent coefficients",
                    expected: inputs,
                    got: c.a.len(),
                });
            }
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::validation(
                "q",
                format!("{} is outside [0, 1]", self.q),
            ));
        }
        if !(self.alpha >= 0.0) || !(self.alpha_ant >= 0.0) {
            return Err(Error::validation(
                "alpha",
                "learning rates must be nonnegative",
            ));
        }
        Ok(())
    }

    pub fn input_count(&self) -> usize {
        self.mf_grid.len()
    }

    pub fn sets_per_input(&self) -> Vec<usize> {
        self.mf_grid.iter().map(Vec::len).collect()
    }

    pub fn mf_count(&self) -> usize {
        self.mf_grid.iter().map(Vec::len).sum()
    }

    pub fn rule_count(&self) -> usize {
        self.mf_grid.iter().map(Vec::len).product()
    }

    /// Set index per input used by rule `r`.
    pub fn rule_mf_indices(&self, r: usize) -> Vec<usize> {
        let mut idx = vec![0; self.input_count()];
        let mut rem = r;
        for (i, sets) in self.mf_grid.iter().enumerate().rev() {
            idx[i] = rem % sets.len();
            rem /= sets.len();
        }
        idx
    }

    /// Number of scalar parameters exposed by [`NetworkState::params_flat`].
    pub fn param_count(&self) -> usize {
        3 * self.mf_count() + self.rule_count() * (self.input_count() + 1) + 1
    }

    /// Trainable parameters in a fixed order: all centers, all lower widths,
    /// all upper widths (each input-major), then `a` rule-major, then `b`, then `q`.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend(self.mf_grid.iter().flatten().map(|m| m.center));
        p.extend(self.mf_grid.iter().flatten().map(|m| m.sigma_lower));
        p.extend(self.mf_grid.iter().flatten().map(|m| m.sigma_upper));
        for c in &self.consequents {
            p.extend_from_slice(&c.a);
        }
        p.extend(self.consequents.iter().map(|c| c.b));
        p.push(self.q);
        p
    }

    /// Inverse of [`NetworkState::params_flat`]. Performs no validation.
    pub fn set_params_flat(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::Shape {
                what: "flat parameters",
                expected: self.param_count(),
                got: p.len(),
            });
        }
        let m = self.mf_count();
        for (j, mf) in self.mf_grid.iter_mut().flatten().enumerate() {
            mf.center = p[j];
            mf.sigma_lower = p[m + j];
            mf.sigma_upper = p[2 * m + j];
        }
        let mut off = 3 * m;
        for c in &mut self.consequents {
            let len = c.a.len();
            c.a.copy_from_slice(&p[off..off + len]);
            off += len;
        }
        for c in &mut self.consequents {
            c.b = p[off];
            off += 1;
        }
        self.q = p[off];
        Ok(())
    }

    /// Name of the first parameter class holding a non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        for mf in self.mf_grid.iter().flatten() {
            if !mf.center.is_finite() {
                return Some("center");
            }
            if !mf.sigma_lower.is_finite() {
                return Some("sigma_lower");
            }
            if !mf.sigma_upper.is_finite() {
                return Some("sigma_upper");
            }
        }
        for c in &self.consequents {
            if c.a.iter().any(|a| !a.is_finite()) {
                return Some("a");
            }
            if !c.b.is_finite() {
                return Some("b");
            }
        }
        if !self.q.is_finite() {
            return Some("q");
        }
        if !self.alpha.is_finite() {
            return Some("alpha");
        }
        if !self.alpha_ant.is_finite() {
            return Some("alpha_ant");
        }
        None
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_count() {
            return Err(Error::Shape {
                what: "inputs",
                expected: self.input_count(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Per-sample intermediates of the forward pass, shared by both learners.
///
/// Membership degrees are stored flat in input-major order, the same order as
/// `mf_grid.iter().flatten()`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InferenceCache {
    pub mu_lower: Vec<f64>,
    pub mu_upper: Vec<f64>,
    pub w_lower: Vec<f64>,
    pub w_upper: Vec<f64>,
    pub wt_lower: Vec<f64>,
    pub wt_upper: Vec<f64>,
    pub f: Vec<f64>,
    pub y_n: f64,
    /// Set when the lower (resp. upper) strengths all vanished and uniform
    /// weights were substituted.
    pub degenerate_lower: bool,
    pub degenerate_upper: bool,
    /// `rules[r * I + i]` is the flat membership index rule `r` uses on input `i`.
    rules: Vec<usize>,
    inputs: usize,
}

impl InferenceCache {
    /// Allocates buffers sized for `net`.
    pub fn for_network(net: &NetworkState) -> Self {
        let n = net.rule_count();
        let m = net.mf_count();
        let inputs = net.input_count();
        let mut offsets = Vec::with_capacity(inputs);
        let mut acc = 0;
        for sets in &net.mf_grid {
            offsets.push(acc);
            acc += sets.len();
        }
        let mut rules = Vec::with_capacity(n * inputs);
        for r in 0..n {
            for (i, k) in net.rule_mf_indices(r).into_iter().enumerate() {
                rules.push(offsets[i] + k);
            }
        }
        Self {
            mu_lower: vec![0.0; m],
            mu_upper: vec![0.0; m],
            w_lower: vec![0.0; n],
            w_upper: vec![0.0; n],
            wt_lower: vec![0.0; n],
            wt_upper: vec![0.0; n],
            f: vec![0.0; n],
            y_n: 0.0,
            degenerate_lower: false,
            degenerate_upper: false,
            rules,
            inputs,
        }
    }

    /// Flat membership indices used by rule `r`, one per input.
    #[inline]
    pub fn rule_mfs(&self, r: usize) -> &[usize] {
        &self.rules[r * self.inputs..(r + 1) * self.inputs]
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate_lower || self.degenerate_upper
    }

    /// Combined normalized strength `q * wl~_r + (1 - q) * wu~_r`.
    #[inline]
    pub fn blended(&self, q: f64, r: usize) -> f64 {
        q * self.wt_lower[r] + (1.0 - q) * self.wt_upper[r]
    }

    /// `sum_r f_r (wl~_r - wu~_r)`, the slope of `y_N` with respect to `q`.
    pub fn q_slope(&self) -> f64 {
        self.f
            .iter()
            .zip(self.wt_lower.iter().zip(&self.wt_upper))
            .map(|(f, (l, u))| f * (l - u))
            .sum()
    }

    fn matches(&self, net: &NetworkState) -> bool {
        self.inputs == net.input_count()
            && self.mu_lower.len() == net.mf_count()
            && self.f.len() == net.rule_count()
    }
}

/// Lower and upper firing strengths of every rule under the product t-norm.
pub fn firing_strengths(net: &NetworkState, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let cache = infer(net, x)?;
    Ok((cache.w_lower, cache.w_upper))
}

/// Scales nonnegative strengths to sum to one.
///
/// Returns [`Error::DegenerateFiring`] when the total is below
/// [`DEGENERATE_FIRING_THRESHOLD`].
pub fn normalize(w: &[f64]) -> Result<Vec<f64>> {
    let mut out = w.to_vec();
    normalize_in_place(&mut out)?;
    Ok(out)
}

fn normalize_in_place(w: &mut [f64]) -> Result<()> {
    let total: f64 = w.iter().sum();
    if !(total >= DEGENERATE_FIRING_THRESHOLD) {
        return Err(Error::DegenerateFiring {
            threshold: DEGENERATE_FIRING_THRESHOLD,
        });
    }
    for v in w.iter_mut() {
        *v /= total;
    }
    Ok(())
}

fn normalize_or_uniform(src: &[f64], dst: &mut [f64]) -> bool {
    dst.copy_from_slice(src);
    if normalize_in_place(dst).is_err() {
        let uniform = 1.0 / dst.len() as f64;
        dst.fill(uniform);
        true
    } else {
        false
    }
}

/// Consequent outputs `f_r = sum_i a_ri x_i + b_r`.
pub fn rule_outputs(net: &NetworkState, x: &[f64]) -> Result<Vec<f64>> {
    net.check_input(x)?;
    Ok(net.consequents.iter().map(|c| c.eval(x)).collect())
}

/// Full forward pass.
pub fn infer(net: &NetworkState, x: &[f64]) -> Result<InferenceCache> {
    let mut cache = InferenceCache::for_network(net);
    infer_into(net, x, &mut cache)?;
    Ok(cache)
}

/// Forward pass reusing the buffers of `cache`, which is resized if it was
/// built for a differently shaped network.
pub fn infer_into(net: &NetworkState, x: &[f64], cache: &mut InferenceCache) -> Result<()> {
    net.check_input(x)?;
    if !cache.matches(net) {
        *cache = InferenceCache::for_network(net);
    }

    for (j, (mf, xi)) in net
        .mf_grid
        .iter()
        .zip(x)
        .flat_map(|(sets, xi)| sets.iter().map(move |mf| (mf, xi)))
        .enumerate()
    {
        let (lo, up) = mf.eval(*xi);
        cache.mu_lower[j] = lo;
        cache.mu_upper[j] = up;
    }

    let n = cache.f.len();
    for r in 0..n {
        let mut lo = 1.0;
        let mut up = 1.0;
        for &j in &cache.rules[r * cache.inputs..(r + 1) * cache.inputs] {
            lo *= cache.mu_lower[j];
            up *= cache.mu_upper[j];
        }
        cache.w_lower[r] = lo;
        cache.w_upper[r] = up;
        cache.f[r] = net.consequents[r].eval(x);
    }

    cache.degenerate_lower = normalize_or_uniform(&cache.w_lower, &mut cache.wt_lower);
    cache.degenerate_upper = normalize_or_uniform(&cache.w_upper, &mut cache.wt_upper);

    let (mut y_lo, mut y_up) = (0.0, 0.0);
    for r in 0..n {
        y_lo += cache.f[r] * cache.wt_lower[r];
        y_up += cache.f[r] * cache.wt_upper[r];
    }
    cache.y_n = net.q * y_lo + (1.0 - net.q) * y_up;
    Ok(())
}
