//! Experiment configuration: a JSON document validated at load.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sepmp_core::control::{Bounds, ControlPolicy, ControlProblem, MCConfig, RunningReward, DEFAULT_INNER_PATHS};
use sepmp_core::logutility::LogUtilityConfig;
use sepmp_core::path_engine::{GeneralCoefficients, LogLinear, Scheme, StateCoefficients, TimeFn};
use sepmp_core::process::{Drift, IntensityModel, MarkKernel, MarkKind, MarkMode, DEFAULT_MAX_EVENTS};

use crate::error::CliError;

/// A function of time: a number, or `{"intercept": a, "slope": b}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FnSpec {
    Constant(f64),
    Linear { intercept: f64, slope: f64 },
}

impl FnSpec {
    pub fn to_time_fn(self) -> TimeFn {
        match self {
            FnSpec::Constant(c) => TimeFn::Constant(c),
            FnSpec::Linear { intercept, slope } => TimeFn::Linear { intercept, slope },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    MeanReverting { delta: f64 },
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub lambda0: f64,
    pub drift: DriftSpec,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    #[default]
    Predictable,
    Atjump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Constant {
        value: f64,
        #[serde(default)]
        mode: ModeSpec,
    },
    ShiftedExponential {
        base_rate: f64,
        rate_exponent: f64,
        shift: f64,
        #[serde(default)]
        mode: ModeSpec,
    },
}

/// State coefficients. `affine` takes `(constant, x, π)` weights for each
/// of `b`, `σ` and `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    LogLinear { alpha: FnSpec, vol: FnSpec, kappa: FnSpec },
    Affine { b: [f64; 3], sigma: [f64; 3], gamma: [f64; 3] },
}

/// `affine`: `h = c + c_x x + c_π π` and `g = d + d_x x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RewardSpec {
    LogUtility { theta: f64 },
    Affine { running: [f64; 3], terminal: [f64; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogUtilitySpec {
    pub alpha: FnSpec,
    pub vol: FnSpec,
    pub kappa: FnSpec,
    pub theta: f64,
    pub x0: f64,
    pub pi_min: f64,
    pub pi_max: f64,
}

impl Default for LogUtilitySpec {
    fn default() -> Self {
        Self {
            alpha: FnSpec::Constant(0.1),
            vol: FnSpec::Constant(0.3),
            kappa: FnSpec::Constant(0.2),
            theta: 1.0,
            x0: 1.0,
            pi_min: 0.01,
            pi_max: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub horizon: f64,
    pub base_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeSpec {
    Euler,
    LogExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSpec {
    pub paths: usize,
    pub inner_paths: usize,
    pub master_seed: u64,
    /// Defaults to `log_exact` for log-linear states and `euler` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeSpec>,
    pub max_events: usize,
}

/// Missing sections and fields take their default values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub kernel: KernelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<RewardSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logutility: Option<LogUtilitySpec>,
    /// Open-loop control for `simulate`; defaults to the optimal log-utility control.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<FnSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    pub grid: GridSpec,
    pub mc: McSpec,
    #[serde(default = "default_export_paths")]
    pub export_paths: usize,
    #[serde(default = "default_y_step")]
    pub y_step: f64,
    pub output_dir: PathBuf,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { horizon: 1.0, base_steps: 100 }
    }
}

impl Default for McSpec {
    fn default() -> Self {
        Self {
            paths: 10_000,
            inner_paths: DEFAULT_INNER_PATHS,
            master_seed: 42,
            scheme: None,
            max_events: DEFAULT_MAX_EVENTS,
        }
    }
}

fn default_export_paths() -> usize {
    10
}

fn default_y_step() -> f64 {
    sepmp_core::control::DEFAULT_Y_STEP
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec { lambda0: 1.0, drift: DriftSpec::MeanReverting { delta: 0.5 }, beta: 1.0 },
            kernel: KernelSpec::Constant { value: 0.5, mode: ModeSpec::Predictable },
            state: None,
            reward: None,
            logutility: Some(LogUtilitySpec::default()),
            control: None,
            x0: None,
            grid: GridSpec::default(),
            mc: McSpec::default(),
            export_paths: default_export_paths(),
            y_step: default_y_step(),
            output_dir: PathBuf::from("sepmp-out"),
        }
    }
}

fn field(name: &str, reason: impl Into<String>) -> CliError {
    CliError::Config { field: name.to_string(), reason: reason.into() }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        Self::from_json(&text)
    }

    /// A config that defines its own `state`, `reward` or `control` gets no
    /// default `logutility` section.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        let mut cfg: Self = serde_json::from_value(raw.clone()).map_err(|e| CliError::Parse(e.to_string()))?;
        let has = |key: &str| raw.get(key).is_some();
        if !has("logutility") && (has("state") || has("reward") || has("control")) {
            cfg.logutility = None;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(compact.as_bytes()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let model = self.model()?;
        self.kernel()?.validate(&model).map_err(CliError::from)?;
        let g = self.grid;
        if !(g.horizon > 0.0 && g.horizon.is_finite()) {
            return Err(field("grid.horizon", format!("must be positive, got {}", g.horizon)));
        }
        if g.base_steps == 0 {
            return Err(field("grid.base_steps", "must be positive"));
        }
        if self.mc.max_events == 0 {
            return Err(field("mc.max_events", "must be positive"));
        }
        if !(self.y_step > 0.0 && self.y_step.is_finite()) {
            return Err(field("y_step", format!("must be positive, got {}", self.y_step)));
        }
        if self.state.is_none() && self.logutility.is_none() {
            return Err(field("state", "either `state` or `logutility` must be given"));
        }
        if let Some(lu) = &self.logutility {
            self.logutility_from(lu).validate().map_err(|e| prefixed("logutility", e))?;
        }
        if let Some(StateSpec::LogLinear { .. }) = self.state {
            if self.x0.or(self.logutility.map(|l| l.x0)).is_some_and(|x| x <= 0.0) {
                return Err(field("x0", "log-linear states need a positive initial value"));
            }
        }
        if self.scheme() == Scheme::LogExact && !matches!(self.state_coefficients(), StateCoefficients::LogLinear(_)) {
            return Err(field("mc.scheme", "log_exact needs a log-linear state"));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<IntensityModel, CliError> {
        let drift = match self.model.drift {
            DriftSpec::MeanReverting { delta } => Drift::MeanReverting { delta },
            DriftSpec::Zero => Drift::Zero,
        };
        IntensityModel::new(self.model.lambda0, drift, self.model.beta).map_err(|e| prefixed("model", e))
    }

    pub fn kernel(&self) -> Result<MarkKernel, CliError> {
        let (kind, mode) = match self.kernel {
            KernelSpec::Constant { value, mode } => (MarkKind::Constant { value }, mode),
            KernelSpec::ShiftedExponential { base_rate, rate_exponent, shift, mode } => {
                (MarkKind::ShiftedExponential { base_rate, rate_exponent, shift }, mode)
            }
        };
        Ok(MarkKernel { kind, mode: mark_mode(mode) })
    }

    pub fn set_mode(&mut self, mode: ModeSpec) {
        match &mut self.kernel {
            KernelSpec::Constant { mode: m, .. } | KernelSpec::ShiftedExponential { mode: m, .. } => *m = mode,
        }
    }

    fn logutility_from(&self, lu: &LogUtilitySpec) -> LogUtilityConfig {
        LogUtilityConfig {
            alpha: lu.alpha.to_time_fn(),
            vol: lu.vol.to_time_fn(),
            kappa: lu.kappa.to_time_fn(),
            theta: lu.theta,
            x0: lu.x0,
            horizon: self.grid.horizon,
            bounds: Bounds { lo: lu.pi_min, hi: lu.pi_max },
        }
    }

    pub fn logutility(&self) -> Result<LogUtilityConfig, CliError> {
        let lu =
            self.logutility.as_ref().ok_or_else(|| field("logutility", "this command needs a `logutility` section"))?;
        Ok(self.logutility_from(lu))
    }

    pub fn state_coefficients(&self) -> StateCoefficients {
        match (self.state, &self.logutility) {
            (Some(StateSpec::LogLinear { alpha, vol, kappa }), _) => StateCoefficients::LogLinear(LogLinear {
                alpha: alpha.to_time_fn(),
                vol: vol.to_time_fn(),
                kappa: kappa.to_time_fn(),
            }),
            (Some(StateSpec::Affine { b, sigma, gamma }), _) => StateCoefficients::General(GeneralCoefficients::new(
                move |_, x, p| b[0] + b[1] * x + b[2] * p,
                move |_, x, p| sigma[0] + sigma[1] * x + sigma[2] * p,
                move |_, x, p| gamma[0] + gamma[1] * x + gamma[2] * p,
            )),
            (None, Some(lu)) => StateCoefficients::LogLinear(LogLinear {
                alpha: lu.alpha.to_time_fn(),
                vol: lu.vol.to_time_fn(),
                kappa: lu.kappa.to_time_fn(),
            }),
            (None, None) => unreachable!("validated"),
        }
    }

    pub fn reward(&self) -> RunningReward {
        match (self.reward, &self.logutility) {
            (Some(RewardSpec::LogUtility { theta }), _) => RunningReward::LogUtility { theta },
            (Some(RewardSpec::Affine { running: r, terminal: g }), _) => RunningReward::custom(
                move |_, x, p| r[0] + r[1] * x + r[2] * p,
                move |x| g[0] + g[1] * x,
                move |_| g[1],
            ),
            (None, Some(lu)) => RunningReward::LogUtility { theta: lu.theta },
            (None, None) => RunningReward::custom(|_, _, _| 0.0, |_| 0.0, |_| 0.0),
        }
    }

    pub fn initial_state(&self) -> f64 {
        self.x0.or(self.logutility.map(|l| l.x0)).unwrap_or(1.0)
    }

    pub fn problem(&self) -> Result<ControlProblem, CliError> {
        Ok(ControlProblem {
            model: self.model()?,
            kernel: self.kernel()?,
            coeffs: self.state_coefficients(),
            reward: self.reward(),
            x0: self.initial_state(),
        })
    }

    pub fn scheme(&self) -> Scheme {
        match self.mc.scheme {
            Some(SchemeSpec::Euler) => Scheme::Euler,
            Some(SchemeSpec::LogExact) => Scheme::LogExact,
            None => match self.state_coefficients() {
                StateCoefficients::LogLinear(_) => Scheme::LogExact,
                StateCoefficients::General(_) => Scheme::Euler,
            },
        }
    }

    pub fn mc(&self) -> MCConfig {
        MCConfig {
            paths: self.mc.paths,
            master_seed: self.mc.master_seed,
            horizon: self.grid.horizon,
            base_steps: self.grid.base_steps,
            scheme: self.scheme(),
            max_events: self.mc.max_events,
        }
    }

    /// The open-loop control used by `simulate`.
    pub fn control(&self) -> Result<ControlPolicy, CliError> {
        let bounds = match &self.logutility {
            Some(lu) => Bounds { lo: lu.pi_min, hi: lu.pi_max },
            None => Bounds::unbounded(),
        };
        match (self.control, &self.logutility) {
            (Some(f), _) => Ok(ControlPolicy::deterministic(bounds, f.to_time_fn())),
            (None, Some(_)) => Ok(self.logutility()?.optimal_policy()),
            (None, None) => Ok(ControlPolicy::constant(bounds, 0.0)),
        }
    }
}

fn mark_mode(m: ModeSpec) -> MarkMode {
    match m {
        ModeSpec::Predictable => MarkMode::Predictable,
        ModeSpec::Atjump => MarkMode::AtJump,
    }
}

fn prefixed(section: &str, e: sepmp_core::Error) -> CliError {
    match e {
        sepmp_core::Error::InvalidParameter { field: f, reason } => field(&format!("{section}.{f}"), reason),
        other => CliError::from(other),
    }
}
