//! Experiment configuration and its plain-text document format.
//!
//! A config document is a flat list of `key = value` lines with dotted keys
//! (TOML syntax). Absent keys take their defaults, unknown keys are rejected.
//!
//! ```text
//! plant = "ex1"          # ex1 | ex2
//! learner = "smc"        # smc | gd | frozen
//! epochs = 30
//! runs = 10
//! seed = 0
//! smc.gamma = 1.0
//! gd.eta = 0.05
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gd::GdParams;
use crate::network::NetworkState;
use crate::plants::DEFAULT_PERIOD;
use crate::smc::SmcParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantKind {
    /// Non-BIBO plant driven by a decaying sinusoid.
    Ex1,
    /// Time-varying second-order plant.
    Ex2,
}

impl PlantKind {
    pub fn name(self) -> &'static str {
        match self {
            PlantKind::Ex1 => "ex1",
            PlantKind::Ex2 => "ex2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Smc,
    Gd,
    /// No adaptation; the network keeps its initial parameters.
    Frozen,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Smc => "smc",
            LearnerKind::Gd => "gd",
            LearnerKind::Frozen => "frozen",
        }
    }
}

/// Ranges for the random initial network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    /// Uniform center jitter as a fraction of the input range.
    pub center_jitter: f64,
    /// Upper width drawn from `[min, max] * range / K`.
    pub sigma_scale_min: f64,
    pub sigma_scale_max: f64,
    /// Lower width as a fraction of the upper width.
    pub sigma_ratio_min: f64,
    pub sigma_ratio_max: f64,
    /// `a_ri` drawn from `[-a_range, a_range]`.
    pub a_range: f64,
    pub b_range: f64,
    pub q: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            center_jitter: 0.1,
            sigma_scale_min: 0.5,
            sigma_scale_max: 1.5,
            sigma_ratio_min: 0.5,
            sigma_ratio_max: 1.0,
            a_range: 0.1,
            b_range: 0.1,
            q: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeVaryingConfig {
    /// Coefficient period `T` in samples; also the default horizon.
    pub period: usize,
    /// Period of the sinusoidal excitation in samples.
    pub input_period: usize,
}

impl Default for TimeVaryingConfig {
    fn default() -> Self {
        Self {
            period: DEFAULT_PERIOD,
            input_period: 25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantKind,
    pub learner: LearnerKind,
    pub epochs: usize,
    /// Horizon per epoch; the plant default when absent (10 s for ex1, `T` for ex2).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples_per_epoch: Option<usize>,
    pub runs: usize,
    pub seed: u64,
    /// Share of the ex2 horizon used for training; the rest is the test segment.
    pub train_fraction: f64,
    /// Plant sampling period in seconds.
    pub sample_time: f64,
    /// Standard deviation of additive measurement noise on the plant output.
    pub noise_std: f64,
    pub mfs_per_input: usize,
    /// Drop failed runs from the aggregates instead of failing the experiment.
    pub exclude_failed_runs: bool,
    pub init: InitConfig,
    pub smc: SmcParams,
    pub gd: GdParams,
    pub timevarying: TimeVaryingConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            plant: PlantKind::Ex1,
            learner: LearnerKind::Smc,
            epochs: 30,
            samples_per_epoch: None,
            runs: 10,
            seed: 0,
            train_fraction: 0.8,
            sample_time: 1e-3,
            noise_std: 0.0,
            mfs_per_input: 3,
            exclude_failed_runs: false,
            init: InitConfig::default(),
            smc: SmcParams::default(),
            gd: GdParams::default(),
            timevarying: TimeVaryingConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Horizon per epoch after applying plant defaults.
    pub fn horizon(&self) -> usize {
        self.samples_per_epoch.unwrap_or(match self.plant {
            PlantKind::Ex1 => (10.0 / self.sample_time).round() as usize,
            PlantKind::Ex2 => self.timevarying.period,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("epochs", self.epochs),
            ("runs", self.runs),
            ("mfs_per_input", self.mfs_per_input),
            ("timevarying.period", self.timevarying.period),
            ("timevarying.input_period", self.timevarying.input_period),
        ] {
            if v == 0 {
                return Err(Error::validation(key, "must be positive"));
            }
        }
        if self.samples_per_epoch == Some(0) {
            return Err(Error::validation("samples_per_epoch", "must be positive"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::validation("train_fraction", "must lie in (0, 1)"));
        }
        if self.plant == PlantKind::Ex2 {
            let train = (self.train_fraction * self.horizon() as f64).floor() as usize;
            if train == 0 || train >= self.horizon() {
                return Err(Error::validation(
                    "train_fraction",
                    "leaves an empty train or test segment",
                ));
            }
        }
        if !(self.sample_time > 0.0 && self.sample_time.is_finite()) {
            return Err(Error::validation("sample_time", "must be positive"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::validation("noise_std", "must be nonnegative"));
        }
        let init = &self.init;
        if !(init.center_jitter >= 0.0) {
            return Err(Error::validation(
                "init.center_jitter",
                "must be nonnegative",
            ));
        }
        if !(init.sigma_scale_min > 0.0 && init.sigma_scale_min <= init.sigma_scale_max) {
            return Err(Error::validation(
                "init.sigma_scale_min",
                "need 0 < sigma_scale_min <= sigma_scale_max",
            ));
        }
        if !(init.sigma_ratio_min > 0.0
            && init.sigma_ratio_min <= init.sigma_ratio_max
            && init.sigma_ratio_max <= 1.0)
        {
            return Err(Error::validation(
                "init.sigma_ratio_min",
                "need 0 < sigma_ratio_min <= sigma_ratio_max <= 1 so that lower <= upper",
            ));
        }
        if !(init.a_range >= 0.0 && init.b_range >= 0.0) {
            return Err(Error::validation(
                "init.a_range",
                "ranges must be nonnegative",
            ));
        }
        if !(0.0..=1.0).contains(&init.q) {
            return Err(Error::validation("init.q", "must lie in [0, 1]"));
        }
        self.smc.validate()?;
        self.gd.validate()?;
        Ok(())
    }
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::Parse {
            line,
            message: e.message().to_string(),
        }
    })?;
    config.validate()?;
    Ok(config)
}

/// Renders `config` as a flat dotted-key document accepted by [`parse_config`].
pub fn serialize_config(config: &ExperimentConfig) -> String {
    let value = toml::Value::try_from(config).expect("config is representable as TOML");
    let mut lines = Vec::new();
    flatten("", &value, &mut lines);
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<String>) {
    match value {
        toml::Value::Table(table) => {
            // scalars first so that top-level keys read before the sections
            let (tables, scalars): (Vec<_>, Vec<_>) = table.iter().partition(|(_, v)| v.is_table());
            for (key, v) in scalars.into_iter().chain(tables) {
                let full = if prefix.is_empty() {
                    key.clone()
                } else {
                    format!("{prefix}.{key}")
                };
                flatten(&full, v, out);
            }
        }
        toml::Value::Float(f) => out.push(format!("{prefix} = {}", float_literal(*f))),
        other => out.push(format!("{prefix} = {other}")),
    }
}

fn float_literal(f: f64) -> String {
    // Debug output round-trips and always carries a '.' or exponent
    let s = format!("{f:?}");
    if s.contains(['.', 'e', 'E']) || !f.is_finite() {
        s
    } else {
        format!("{s}.0")
    }
}

/// Serializes a network checkpoint in the same document format.
pub fn network_to_string(net: &NetworkState) -> String {
    toml::to_string(net).expect("network is representable as TOML")
}

pub fn network_from_str(text: &str) -> Result<NetworkState> {
    let net: NetworkState = toml::from_str(text).map_err(|e| Error::Parse {
        line: e
            .span()
            .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0),
        message: e.message().to_string(),
    })?;
    net.validate()?;
    Ok(net)
}
