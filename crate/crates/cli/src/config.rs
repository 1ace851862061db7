//! Run configuration: a TOML file with dotted keys, overridden by flags.
//!
//! ```toml
//! seed = 7
//! problem.dim = 1
//! problem.builtin = "pure_power"
//! problem.params.p = 8
//! grid.radius = 30
//! grid.nodes = 4001
//! solve.mass = 1
//! output.dir = "out"
//! ```
//!
//! Every key has a default except `solve.mass`, which `solve` requires.
//! Overrides are applied to the parsed document before it is checked, so a
//! flag and the equivalent `--set key=value` behave identically.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use normsol::nonlinearity::Sampling;
use normsol::optimizer::{Armijo, Init, Metric, SolveOptions};
use normsol::sweep::SweepOptions;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; all cores when absent.
    pub threads: Option<usize>,
    pub problem: Problem,
    pub grid: GridConfig,
    pub solve: SolveConfig,
    pub sweep: SweepConfig,
    pub check: Sampling,
    pub oracle: OracleConfig,
    pub output: OutputConfig,
}

/// Either `builtin` or both `f` and `F` must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Problem {
    pub dim: usize,
    pub builtin: Option<String>,
    /// Expression for `f(t)`.
    pub f: Option<String>,
    /// Expression for the primitive `F(t)`.
    #[serde(rename = "F")]
    pub primitive: Option<String>,
    /// Builtin parameters, also visible by name inside expressions.
    pub params: BTreeMap<String, f64>,
    /// Hypotheses a user expression claims; defaults to f0-f4.
    pub claims: Option<Vec<String>>,
}

impl Default for Problem {
    fn default() -> Self {
        Problem {
            dim: 1,
            builtin: None,
            f: None,
            primitive: None,
            params: BTreeMap::new(),
            claims: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub radius: f64,
    pub nodes: usize,
    pub stretch: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            radius: 30.0,
            nodes: 2001,
            stretch: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub mass: Option<f64>,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub restarts: usize,
    pub noise: f64,
    pub metric: Metric,
    pub symmetrize: bool,
    pub armijo_backtrack: f64,
    pub armijo_decrease: f64,
    /// Start from an `r,u` profile CSV instead of a Gaussian.
    pub restart: Option<PathBuf>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        let d = SolveOptions::default();
        SolveConfig {
            mass: None,
            max_iters: d.max_iters,
            grad_tol: d.grad_tol,
            restarts: d.restarts,
            noise: d.noise,
            metric: d.metric,
            symmetrize: d.symmetrize,
            armijo_backtrack: d.armijo.backtrack,
            armijo_decrease: d.armijo.decrease,
            restart: None,
        }
    }
}

/// Masses are either listed or log-spaced between `min` and `max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub masses: Option<Vec<f64>>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub count: usize,
    pub ascending: bool,
    pub cold_check: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let d = SweepOptions::default();
        SweepConfig {
            masses: None,
            min: None,
            max: None,
            count: 7,
            ascending: d.ascending,
            cold_check: d.cold_check,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// `soliton`, `bubble` or `gn`.
    pub case: String,
    pub p: Option<f64>,
    pub mass: Option<f64>,
    pub mu: Option<f64>,
    pub eps: Option<f64>,
    pub resolution: u32,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            case: "soliton".into(),
            p: None,
            mass: None,
            mu: None,
            eps: None,
            resolution: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into() }
    }
}

impl RunConfig {
    /// Reads `path` (if any), applies `overrides` in order and deserializes.
    pub fn load(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<RunConfig> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                text.parse::<Table>()
                    .with_context(|| format!("parsing config {}", p.display()))?
            }
            None => Table::new(),
        };
        for (key, value) in overrides {
            set_dotted(&mut doc, key, value.clone())?;
        }
        let cfg: RunConfig = Value::Table(doc)
            .try_into()
            .map_err(|e| anyhow!("invalid configuration: {e}"))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join("config.toml"), self.to_toml())
            .with_context(|| format!("writing config into {}", dir.display()))
    }

    pub fn solve_options(&self) -> Result<SolveOptions> {
        let s = &self.solve;
        let Some(mass) = s.mass else {
            bail!("no mass given (use --mass or solve.mass)");
        };
        Ok(SolveOptions {
            mass,
            max_iters: s.max_iters,
            grad_tol: s.grad_tol,
            armijo: Armijo {
                backtrack: s.armijo_backtrack,
                decrease: s.armijo_decrease,
            },
            init: match &s.restart {
                Some(path) => Init::Restart { path: path.clone() },
                None => Init::Gaussian,
            },
            seed: self.seed,
            restarts: s.restarts,
            noise: s.noise,
            symmetrize: s.symmetrize,
            metric: s.metric,
        })
    }

    pub fn sweep_masses(&self) -> Result<Vec<f64>> {
        let s = &self.sweep;
        match (&s.masses, s.min, s.max) {
            (Some(list), None, None) => Ok(list.clone()),
            (None, Some(lo), Some(hi)) => normsol::sweep::log_spaced(lo, hi, s.count)
                .map_err(|e| anyhow!("sweep masses: {e}")),
            (None, None, None) => bail!("no sweep masses given (sweep.masses or sweep.min/max)"),
            _ => bail!("give either sweep.masses or sweep.min and sweep.max"),
        }
    }
}

/// Parses `key=value`; the value is read as a TOML value when possible and as
/// a bare string otherwise.
pub fn parse_assignment(text: &str) -> Result<(String, Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| anyhow!("expected key=value, got `{text}`"))?;
    let key = key.trim();
    if key.is_empty() {
        bail!("empty key in `{text}`");
    }
    Ok((key.to_string(), parse_value(raw.trim())))
}

pub fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_dotted(doc: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut table = doc;
    for part in path {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("`{part}` in `{key}` is not a table"))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}
