//! Run configuration: a flat `key = value` file overlaid by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use tes_core::sde_engine::{ClippedLinear, LinearModel, SdeModel, TrigModel, TruncationFamily};
use tes_core::Params;

use crate::error::{CliError, CliResult};

/// The built-in models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelName {
    /// Saturated mean-reverting linear model, one dimension.
    Linear,
    /// Trigonometric drift and diffusion, two dimensions.
    Trig,
    /// Unbounded linear model solved through truncations.
    LocalizedLinear,
}

impl ModelName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelName::Linear => "linear",
            ModelName::Trig => "trig",
            ModelName::LocalizedLinear => "localized-linear",
        }
    }

    pub fn noise_dim(&self) -> usize {
        match self {
            ModelName::Trig => 2,
            _ => 1,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.noise_dim()
    }

    /// The bounded model to run; for the localized model, its truncation at
    /// `bound` (the family's smallest bound when `None`).
    pub fn bounded(&self, bound: Option<f64>) -> CliResult<Box<dyn SdeModel + Send + Sync>> {
        Ok(match self {
            ModelName::Linear => Box::new(ClippedLinear::default()),
            ModelName::Trig => Box::new(TrigModel::default()),
            ModelName::LocalizedLinear => {
                let family = LinearModel::default();
                let b = bound.unwrap_or_else(|| family.smallest_bound());
                Box::new(family.truncate(b)?.0)
            }
        })
    }
}

impl FromStr for ModelName {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "linear" => Ok(ModelName::Linear),
            "trig" | "trig-bounded" => Ok(ModelName::Trig),
            "localized-linear" => Ok(ModelName::LocalizedLinear),
            other => Err(CliError::Config(format!(
                "unknown model '{other}' (expected linear, trig or localized-linear)"
            ))),
        }
    }
}

/// Everything a run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelName,
    pub epsilon: f64,
    pub seed: u64,
    pub reps: usize,
    pub out: PathBuf,
    pub params: Params,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelName::Trig,
            epsilon: 0.05,
            seed: 1,
            reps: 1000,
            out: PathBuf::from("tes-out"),
            params: Params::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("cannot parse '{value}' for '{key}'")))
}

impl RunConfig {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let p = &mut self.params;
        match key {
            "model" => self.model = value.parse()?,
            "eps" | "epsilon" => self.epsilon = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "reps" => self.reps = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "alpha" => p.alpha = parse(key, value)?,
            "beta" => p.beta = parse(key, value)?,
            "alpha_prime" => p.alpha_prime = parse(key, value)?,
            "gamma" => p.gamma = parse(key, value)?,
            "eps0" => p.eps0 = parse(key, value)?,
            "rho" => p.rho = parse(key, value)?,
            "level_cap" => p.level_cap = parse(key, value)?,
            "scan_cap" => p.scan_cap = parse(key, value)?,
            "max_attempts" => p.max_attempts = parse(key, value)?,
            other => return Err(CliError::Config(format!("unknown setting '{other}'"))),
        }
        Ok(())
    }

    /// Overlay settings from a config file. Blank lines and `#` comments are
    /// skipped.
    pub fn load_file(&mut self, path: &Path) -> CliResult<()> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        self.params.validate()?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(CliError::Config(format!("eps must be positive, got {}", self.epsilon)));
        }
        if self.reps == 0 {
            return Err(CliError::Config("reps must be at least one".into()));
        }
        Ok(())
    }
}
