//! Run configuration files.
//!
//! A config is TOML (dotted keys such as `ic.kind = "step"` or tables) or
//! JSON. Both are normalised to a JSON value first so that sweeps can patch a
//! dotted path before the typed parse, and so that the `config` object echoed
//! in `summary.json` can be fed straight back in.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use fisher_stefan::{InitialCondition, MeshSpec, ProblemConfig, RunOptions, Scaling, StepperParams};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Default blow-up threshold on `|ds/dt|` in rescaled units.
pub const DEFAULT_SCALED_THRESHOLD: f64 = 1e4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kappa: f64,
    /// Growth rate of the rescaled problem. Implied by `s0` when that is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Initial front position in original units. When present, times,
    /// lengths and speeds in this file and in every output are unscaled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    pub ic: InitialCondition,
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blowup_speed_threshold: Option<f64>,
    #[serde(default)]
    pub mesh: MeshSpec,
    #[serde(default)]
    pub stepper: StepperParams,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub sample_every: usize,
    /// Times at which to write a full profile.
    pub snapshot_times: Vec<f64>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            sample_every: 10,
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Dotted path of the numeric field to vary, e.g. `kappa` or `ic.alpha`.
    pub parameter: String,
    pub values: Vec<f64>,
}

/// Everything the solver needs, converted to rescaled units.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub problem: ProblemConfig,
    pub stepper: StepperParams,
    pub mesh: MeshSpec,
    pub options: RunOptions,
    pub scaling: Option<Scaling>,
}

impl Resolved {
    /// Factors taking rescaled lengths and times to reporting units.
    pub fn units(&self) -> (f64, f64) {
        self.scaling
            .map(|s| (s.length(), s.time()))
            .unwrap_or((1.0, 1.0))
    }
}

impl RunConfig {
    pub fn resolve(&self) -> Result<Resolved> {
        let scaling = match self.s0 {
            Some(s0) => Some(Scaling::new(s0)?),
            None => None,
        };
        let lambda = match (self.lambda, scaling) {
            (Some(l), Some(sc)) if l != sc.lambda() => bail!(
                "invalid `lambda`: {l} conflicts with s0 = {} (which implies lambda = {})",
                sc.s0,
                sc.lambda()
            ),
            (_, Some(sc)) => sc.lambda(),
            (Some(l), None) => l,
            (None, None) => bail!("missing `lambda`: give either lambda or s0"),
        };
        let (time, speed) = scaling.map(|s| (s.time(), s.speed())).unwrap_or((1.0, 1.0));
        let threshold = match self.blowup_speed_threshold {
            Some(v) => v / speed,
            None => DEFAULT_SCALED_THRESHOLD,
        };

        let problem = ProblemConfig {
            kappa: self.kappa,
            lambda,
            ic: self.ic.clone(),
            t_end: self.t_end / time,
            blowup_speed_threshold: threshold,
        };
        let mut stepper = self.stepper;
        stepper.dt /= time;

        problem.validate()?;
        stepper.validate()?;
        self.mesh.validate()?;
        if self.output.sample_every == 0 {
            bail!("invalid `output.sample_every`: must be >= 1");
        }
        if let Some(t) = self
            .output
            .snapshot_times
            .iter()
            .find(|t| !(**t >= 0.0 && **t <= self.t_end))
        {
            bail!("invalid `output.snapshot_times`: {t} lies outside [0, t_end]");
        }
        let options = RunOptions {
            sample_every: self.output.sample_every,
            snapshot_times: self.output.snapshot_times.iter().map(|t| t / time).collect(),
        };
        Ok(Resolved {
            problem,
            stepper,
            mesh: self.mesh,
            options,
            scaling,
        })
    }
}

/// Reads a config file into a JSON value, choosing the parser by extension
/// (`.json` is JSON, anything else TOML).
pub fn read_value(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let value = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)
            .with_context(|| format!("cannot parse {} as JSON", path.display()))?
    } else {
        let table: toml::Table = toml::from_str(&text)
            .with_context(|| format!("cannot parse {} as TOML", path.display()))?;
        serde_json::to_value(table)?
    };
    let Value::Object(mut map) = value else {
        bail!("{}: top level must be a table", path.display());
    };
    // A summary.json carries the run config under `config`.
    if !map.contains_key("kappa") {
        if let Some(Value::Object(inner)) = map.remove("config") {
            map = inner;
        }
    }
    Ok(Value::Object(map))
}

pub fn parse(value: Value) -> Result<RunConfig> {
    serde_json::from_value(value).map_err(|e| anyhow!("invalid config: {e}"))
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let mut value = read_value(path)?;
    if let Value::Object(map) = &mut value {
        if map.contains_key("sweep") {
            bail!("{} is a sweep config; use `fstefan sweep`", path.display());
        }
    }
    parse(value).with_context(|| format!("in {}", path.display()))
}

/// Splits a sweep file into its base config value and the sweep table.
pub fn load_sweep(path: &Path) -> Result<(Value, SweepSpec)> {
    let mut value = read_value(path)?;
    let Value::Object(map) = &mut value else {
        unreachable!("read_value returns an object");
    };
    let sweep = map
        .remove("sweep")
        .ok_or_else(|| anyhow!("{}: missing `sweep` table", path.display()))?;
    let sweep: SweepSpec =
        serde_json::from_value(sweep).map_err(|e| anyhow!("invalid `sweep` table: {e}"))?;
    if sweep.values.is_empty() {
        bail!("invalid `sweep.values`: list is empty");
    }
    if sweep.parameter.is_empty() || sweep.parameter.split('.').any(str::is_empty) {
        bail!("invalid `sweep.parameter`: {:?} is not a dotted path", sweep.parameter);
    }
    Ok((value, sweep))
}

/// Sets a dotted path in a JSON object, creating intermediate tables.
pub fn set_path(value: &mut Value, path: &str, new: f64) -> Result<()> {
    let mut node = value;
    let mut keys = path.split('.').peekable();
    while let Some(key) = keys.next() {
        let map = match node {
            Value::Object(m) => m,
            _ => bail!("sweep parameter `{path}`: `{key}` is not inside a table"),
        };
        if keys.peek().is_none() {
            map.insert(key.to_string(), Value::from(new));
            return Ok(());
        }
        node = map
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}
