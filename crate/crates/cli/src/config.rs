//! Flat `key = value` configuration files.
//!
//! ```text
//! # comment
//! equation = nch
//! kernel.type = gaussian
//! kernel.sigma = 0.05
//! ```
//!
//! Keys may contain dots; every key may appear once. Unknown keys are
//! rejected so that typos do not silently fall back to defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nlpf_core::harness::{InitialData, ModelSpec};
use nlpf_core::stepper::{Damping, InitialGuess};
use nlpf_core::{Backend, Equation, GridSpec, KernelSpec, SolverConfig};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: key `{key}` already set on line {first}")]
    Duplicate {
        key: String,
        line: usize,
        first: usize,
    },
    #[error("missing required key `{key}`")]
    Missing { key: String },
    #[error("line {line}: invalid value `{value}` for key `{key}`: {reason}")]
    Invalid {
        key: String,
        line: usize,
        value: String,
        reason: String,
    },
    #[error("line {line}: unknown key `{key}`")]
    Unknown { key: String, line: usize },
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
    used: bool,
}

/// Parsed key-value pairs with bookkeeping of which keys were consumed.
#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, Entry>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.trim().to_string(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.trim().to_string(),
                });
            }
            if let Some(prev) = entries.get(key) {
                return Err(ConfigError::Duplicate {
                    key: key.to_string(),
                    line,
                    first: prev.line,
                });
            }
            entries.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line,
                    used: false,
                },
            );
        }
        Ok(Self { entries })
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Parses `key` if present.
    pub fn get<T>(&mut self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let Some(entry) = self.entries.get_mut(key) else {
            return Ok(None);
        };
        entry.used = true;
        entry
            .value
            .parse::<T>()
            .map(Some)
            .map_err(|e| ConfigError::Invalid {
                key: key.to_string(),
                line: entry.line,
                value: entry.value.clone(),
                reason: e.to_string(),
            })
    }

    pub fn require<T>(&mut self, key: &str) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| ConfigError::Missing {
            key: key.to_string(),
        })
    }

    pub fn get_or<T>(&mut self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn require_list<T>(&mut self, key: &str) -> Result<Vec<T>, ConfigError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let raw: String = self.require(key)?;
        let line = self.entries[key].line;
        raw.split(',')
            .map(|item| {
                item.trim().parse::<T>().map_err(|e| ConfigError::Invalid {
                    key: key.to_string(),
                    line,
                    value: raw.clone(),
                    reason: format!("`{}`: {e}", item.trim()),
                })
            })
            .collect()
    }

    /// Error for a present key whose value fails a semantic check.
    pub fn invalid(&self, key: &str, reason: impl Into<String>) -> ConfigError {
        let (line, value) = self
            .entries
            .get(key)
            .map_or((0, String::new()), |e| (e.line, e.value.clone()));
        ConfigError::Invalid {
            key: key.to_string(),
            line,
            value,
            reason: reason.into(),
        }
    }

    /// Fails on the first key nobody asked for.
    pub fn finish(self) -> Result<(), ConfigError> {
        match self
            .entries
            .into_iter()
            .filter(|(_, e)| !e.used)
            .min_by_key(|(_, e)| e.line)
        {
            Some((key, e)) => Err(ConfigError::Unknown { key, line: e.line }),
            None => Ok(()),
        }
    }
}

/// Where the initial field comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Builtin(InitialData),
    File(PathBuf),
}

/// Domain, kernel, and physical parameters shared by all commands.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub equation: Equation,
    pub x0: f64,
    pub y0: f64,
    pub l1: f64,
    pub l2: f64,
    pub kernel: KernelSpec,
    pub kernel_images: usize,
    pub gamma_c: f64,
    pub gamma_e: f64,
    pub mobility: f64,
    pub initial: InitialSpec,
    pub backend: Backend,
    pub solver: SolverConfig,
}

fn parse_kernel(kv: &mut KeyValues) -> Result<KernelSpec, ConfigError> {
    let kind: String = kv.require("kernel.type")?;
    match kind.as_str() {
        "gaussian" => Ok(KernelSpec::Gaussian {
            alpha: kv.require("kernel.alpha")?,
            sigma: kv.require("kernel.sigma")?,
        }),
        "dog" => Ok(KernelSpec::DifferenceOfGaussians {
            alpha: kv.require("kernel.alpha")?,
            sigma1: kv.require("kernel.sigma1")?,
            beta: kv.require("kernel.beta")?,
            sigma2: kv.require("kernel.sigma2")?,
        }),
        _ => Err(kv.invalid("kernel.type", "expected `gaussian` or `dog`")),
    }
}

fn parse_initial(kv: &mut KeyValues, base: &Path) -> Result<InitialSpec, ConfigError> {
    let kind: String = kv.require("initial.type")?;
    Ok(match kind.as_str() {
        "sinusoid" => InitialSpec::Builtin(InitialData::Sinusoid),
        "random" => InitialSpec::Builtin(InitialData::Random {
            mean: kv.get_or("initial.mean", 0.0)?,
            amplitude: kv.require("initial.amplitude")?,
            seed: kv.require("initial.seed")?,
        }),
        "constant" => InitialSpec::Builtin(InitialData::Constant(kv.require("initial.value")?)),
        "file" => InitialSpec::File(base.join(kv.require::<String>("initial.path")?)),
        _ => {
            return Err(kv.invalid(
                "initial.type",
                "expected `sinusoid`, `random`, `constant`, or `file`",
            ))
        }
    })
}

fn parse_solver(kv: &mut KeyValues) -> Result<SolverConfig, ConfigError> {
    let d = SolverConfig::default();
    let initial_guess = match kv.get::<String>("solver.initial_guess")?.as_deref() {
        None => d.initial_guess,
        Some("current") => InitialGuess::Current,
        Some("extrapolated") => InitialGuess::Extrapolated,
        Some("linear") => InitialGuess::Linear,
        Some(_) => {
            return Err(kv.invalid(
                "solver.initial_guess",
                "expected `current`, `extrapolated`, or `linear`",
            ))
        }
    };
    let cfg = SolverConfig {
        newton_tol: kv.get_or("solver.newton_tol", d.newton_tol)?,
        newton_max_iter: kv.get_or("solver.newton_max_iter", d.newton_max_iter)?,
        krylov_tol: kv.get_or("solver.krylov_tol", d.krylov_tol)?,
        krylov_max_iter: kv.get_or("solver.krylov_max_iter", d.krylov_max_iter)?,
        krylov_restart: kv.get_or("solver.krylov_restart", d.krylov_restart)?,
        damping: kv.get_or::<Damping>("solver.damping", d.damping)?,
        initial_guess,
    };
    cfg.validate()
        .map_err(|e| kv.invalid("solver.newton_tol", e.to_string()))?;
    Ok(cfg)
}

impl ModelConfig {
    fn parse(kv: &mut KeyValues, base: &Path) -> Result<Self, ConfigError> {
        Ok(Self {
            equation: kv.require("equation")?,
            x0: kv.require("domain.x0")?,
            y0: kv.require("domain.y0")?,
            l1: kv.require("domain.l1")?,
            l2: kv.require("domain.l2")?,
            kernel: parse_kernel(kv)?,
            kernel_images: kv.get_or("kernel.images", 0)?,
            gamma_c: kv.require("gamma_c")?,
            gamma_e: kv.require("gamma_e")?,
            mobility: kv.get_or("mobility", 1.0)?,
            initial: parse_initial(kv, base)?,
            backend: kv.get_or("backend", Backend::Auto)?,
            solver: parse_solver(kv)?,
        })
    }

    /// Square-domain model for refinement studies.
    pub fn model_spec(&self) -> anyhow::Result<ModelSpec> {
        anyhow::ensure!(
            self.x0 == self.y0 && self.l1 == self.l2,
            "refinement studies need a square domain with x0 = y0 and l1 = l2 (got x0 = {}, y0 = {}, l1 = {}, l2 = {})",
            self.x0,
            self.y0,
            self.l1,
            self.l2
        );
        let InitialSpec::Builtin(initial) = self.initial else {
            anyhow::bail!("refinement studies need built-in initial data, not a snapshot file");
        };
        Ok(ModelSpec {
            equation: self.equation,
            mobility: self.mobility,
            gamma_c: self.gamma_c,
            gamma_e: self.gamma_e,
            kernel: self.kernel,
            origin: self.x0,
            length: self.l1,
            initial,
        })
    }
}

/// Configuration of a single run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub m: usize,
    pub n: usize,
    pub step_size: f64,
    pub t_final: f64,
    pub energy_csv: Option<PathBuf>,
    /// Write a snapshot every this many steps; zero disables snapshots.
    pub snapshot_every: usize,
    pub snapshot_dir: PathBuf,
    /// Slack on the invariant checks, in multiples of the step tolerance.
    pub invariant_slack: f64,
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut kv = KeyValues::parse(text)?;
        let model = ModelConfig::parse(&mut kv, base)?;
        let m: usize = kv.require("grid.m")?;
        let cfg = Self {
            model,
            m,
            n: kv.get_or("grid.n", m)?,
            step_size: kv.require("s")?,
            t_final: kv.require("T")?,
            energy_csv: kv.get::<String>("output.energy_csv")?.map(PathBuf::from),
            snapshot_every: kv.get_or("output.snapshot_every", 0)?,
            snapshot_dir: PathBuf::from(kv.get_or("output.snapshot_dir", "snapshots".to_string())?),
            invariant_slack: kv.get_or("check.slack", 10.0)?,
        };
        kv.finish()?;
        Ok(cfg)
    }

    pub fn grid(&self) -> nlpf_core::Result<GridSpec> {
        GridSpec::new(
            self.model.x0,
            self.model.y0,
            self.model.l1,
            self.model.l2,
            self.m,
            self.n,
        )
    }
}

/// Configuration of a refinement study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub model: ModelConfig,
    pub levels: Vec<usize>,
    pub refinement_constant: f64,
    pub t_final: f64,
    pub csv: Option<PathBuf>,
    pub text: Option<PathBuf>,
    pub invariant_slack: f64,
}

impl StudyConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut kv = KeyValues::parse(text)?;
        let model = ModelConfig::parse(&mut kv, base)?;
        let cfg = Self {
            model,
            levels: kv.require_list("study.levels")?,
            refinement_constant: kv.require("study.refinement_constant")?,
            t_final: kv.require("T")?,
            csv: kv.get::<String>("output.csv")?.map(PathBuf::from),
            text: kv.get::<String>("output.text")?.map(PathBuf::from),
            invariant_slack: kv.get_or("check.slack", 10.0)?,
        };
        kv.finish()?;
        Ok(cfg)
    }
}
