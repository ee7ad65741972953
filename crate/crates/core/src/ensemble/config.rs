//! Run configuration.
//!
//! A configuration is assembled from layers, later ones winning key by key:
//! built-in defaults, an optional preset, a TOML file, then `key=value`
//! overrides with dotted keys (`model.phi=3.14159`, `run.n_trajectories=500`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use super::presets::Preset;
use crate::correlations::CorrelationSettings;
use crate::dynamics::ObservableSet;
use crate::model::{FeedbackMode, ModelParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub n_trajectories: usize,
    pub t_end: f64,
    pub master_seed: u64,
    /// Worker threads; 0 uses all available cores.
    pub threads: usize,
    /// Largest tolerated fraction of trajectories that fail every attempt.
    pub abort_tolerance: f64,
    /// Attempts per trajectory, each on a fresh stream.
    pub max_attempts: u32,
    pub observables: ObservableSet,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            n_trajectories: 1000,
            t_end: 20.0,
            master_seed: 1,
            threads: 0,
            abort_tolerance: 1e-3,
            max_attempts: 3,
            observables: ObservableSet::all(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WtdSettings {
    /// Histogram bin width; five steps when absent.
    pub bin_width: Option<f64>,
}

/// One ensemble per value of a model parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// A `model` key: `phi`, `tau`, `Omega`, `delta`, `gamma0`,
    /// `gamma_prime`, `gamma_L`, `gamma_R` or `n_bins`.
    pub parameter: String,
    pub values: Vec<f64>,
    /// When sweeping `tau`, rescale `n_bins` to keep the time step.
    #[serde(default = "default_true")]
    pub keep_dt: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    pub dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSettings {
    fn default() -> Self {
        OutputSettings {
            dir: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
        }
    }
}

impl OutputSettings {
    pub fn csv(&self) -> bool {
        self.formats.contains(&OutputFormat::Csv)
    }

    pub fn json(&self) -> bool {
        self.formats.contains(&OutputFormat::Json)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub run: RunSettings,
    #[serde(default)]
    pub correlation: CorrelationSettings,
    #[serde(default)]
    pub wtd: WtdSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output: OutputSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelParams::symmetric(1.0, 0.1, 10),
            run: RunSettings::default(),
            correlation: CorrelationSettings::default(),
            wtd: WtdSettings::default(),
            sweep: None,
            output: OutputSettings::default(),
        }
    }
}

fn finite_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name} = {v} must be finite and > 0"
        )))
    }
}

impl RunConfig {
    /// Model parameters as simulated. Without feedback the loop is reduced to
    /// its two coupled bins at the configured time step.
    pub fn engine_params(&self) -> ModelParams {
        match self.model.feedback {
            FeedbackMode::Loop => self.model.clone(),
            FeedbackMode::None => {
                let mut p = self.model.clone();
                p.tau = 2.0 * self.model.dt();
                p.n_bins = 2;
                p
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.run.n_trajectories == 0 {
            return Err(Error::Config("run.n_trajectories must be >= 1".into()));
        }
        finite_positive("run.t_end", self.run.t_end)?;
        if !(0.0..1.0).contains(&self.run.abort_tolerance) {
            return Err(Error::Config(format!(
                "run.abort_tolerance = {} must be in [0, 1)",
                self.run.abort_tolerance
            )));
        }
        if self.run.max_attempts == 0 {
            return Err(Error::Config("run.max_attempts must be >= 1".into()));
        }
        let c = &self.correlation;
        if let Some(t) = c.t_ss {
            finite_positive("correlation.t_ss", t)?;
        }
        finite_positive("correlation.t2_max", c.t2_max)?;
        finite_positive("correlation.detuning_max", c.detuning_max)?;
        finite_positive("correlation.pilot_t_end", c.pilot_t_end)?;
        finite_positive("correlation.steady_rel_tol", c.steady_rel_tol)?;
        finite_positive("correlation.steady_window", c.steady_window)?;
        if c.n_detunings < 2 {
            return Err(Error::Config("correlation.n_detunings must be >= 2".into()));
        }
        if c.pilot_trajectories == 0 {
            return Err(Error::Config(
                "correlation.pilot_trajectories must be >= 1".into(),
            ));
        }
        if let Some(w) = self.wtd.bin_width {
            finite_positive("wtd.bin_width", w)?;
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::Config("sweep.values is empty".into()));
            }
            if let Some(v) = sweep.values.iter().find(|v| !v.is_finite()) {
                return Err(Error::Config(format!("sweep value {v} is not finite")));
            }
            for &v in &sweep.values {
                sweep_point(&self.model, &sweep.parameter, v, sweep.keep_dt)?
                    .validate()
                    .map_err(|e| Error::Config(format!("sweep {} = {v}: {e}", sweep.parameter)))?;
            }
        }
        if self.output.formats.is_empty() {
            return Err(Error::Config("output.formats is empty".into()));
        }
        Ok(())
    }
}

/// `base` with one parameter replaced.
pub fn sweep_point(
    base: &ModelParams,
    parameter: &str,
    value: f64,
    keep_dt: bool,
) -> Result<ModelParams> {
    let mut p = base.clone();
    match parameter {
        "phi" => p.set_phi(value),
        "tau" if keep_dt => p = p.with_tau_at_step(value, base.dt()),
        "tau" => p.tau = value,
        "Omega" => p.omega = value,
        "delta" => p.delta = value,
        "gamma0" => p.gamma0 = value,
        "gamma_prime" => p.gamma_prime = value,
        "gamma_L" => p.gamma_l = value,
        "gamma_R" => p.gamma_r = value,
        "n_bins" => {
            if value < 2.0 || value.fract() != 0.0 {
                return Err(Error::Config(format!(
                    "n_bins = {value} must be an integer >= 2"
                )));
            }
            p.n_bins = value as usize;
        }
        other => return Err(Error::Config(format!("unknown sweep parameter `{other}`"))),
    }
    Ok(p)
}

/// Recursively overlays `top` onto `base`.
fn merge(base: &mut Table, top: Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

/// Parses `key=value` with a dotted key. Values that are not valid TOML are
/// taken as strings.
pub fn parse_override(assignment: &str) -> Result<Table> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let (key, value) = (key.trim(), value.trim());
    if key.is_empty() {
        return Err(Error::Config(format!(
            "override `{assignment}` has an empty key"
        )));
    }
    toml::from_str::<Table>(&format!("{key} = {value}"))
        .or_else(|_| {
            toml::from_str::<Table>(&format!("{key} = {}", Value::String(value.to_string())))
        })
        .map_err(|e| Error::Config(format!("override `{assignment}`: {e}")))
}

/// Layers of a configuration, lowest precedence first.
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    layers: Vec<Table>,
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn preset(self, preset: Preset) -> Result<Self> {
        self.preset_scaled(preset, super::presets::DEFAULT_SCALE)
    }

    /// Preset with `scale` times the published trajectory count.
    pub fn preset_scaled(mut self, preset: Preset, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Config(format!("preset scale {scale} must be > 0")));
        }
        self.layers.push(to_table(&preset.scaled(scale))?);
        Ok(self)
    }

    pub fn toml_str(mut self, text: &str) -> Result<Self> {
        let table = toml::from_str::<Table>(text).map_err(|e| Error::Config(e.to_string()))?;
        self.layers.push(table);
        Ok(self)
    }

    pub fn file(self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        self.toml_str(&text)
    }

    pub fn set(mut self, assignment: &str) -> Result<Self> {
        self.layers.push(parse_override(assignment)?);
        Ok(self)
    }

    /// Merges the layers over the defaults and validates the result.
    pub fn build(self) -> Result<RunConfig> {
        let mut table = to_table(&RunConfig::default())?;
        for layer in self.layers {
            merge(&mut table, layer);
        }
        let config: RunConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}

fn to_table(config: &RunConfig) -> Result<Table> {
    Table::try_from(config).map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = ConfigBuilder::new().build().unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn layers_override_in_order() {
        let c = ConfigBuilder::new()
            .toml_str("model.Omega = 1.0\nrun.n_trajectories = 10\n[correlation]\nt2_max = 3.0\n")
            .unwrap()
            .set("run.n_trajectories=20")
            .unwrap()
            .set("model.phi = 7.0")
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(c.model.omega, 1.0);
        assert_eq!(c.run.n_trajectories, 20);
        assert_eq!(c.correlation.t2_max, 3.0);
        assert!((c.model.phi() - (7.0 - std::f64::consts::TAU)).abs() < 1e-12);
        // untouched keys keep their defaults
        assert_eq!(c.model.n_bins, 10);
    }

    #[test]
    fn string_overrides_need_no_quotes() {
        let c = ConfigBuilder::new()
            .set("output.dir=results/a")
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(c.output.dir, PathBuf::from("results/a"));
        let c = ConfigBuilder::new()
            .set("model.feedback=none")
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(c.model.feedback, FeedbackMode::None);
        assert_eq!(c.engine_params().n_bins, 2);
        assert!((c.engine_params().dt() - c.model.dt()).abs() < 1e-15);
    }

    #[test]
    fn rejections() {
        let bad = |s: &str| {
            ConfigBuilder::new()
                .toml_str(s)
                .unwrap()
                .build()
                .unwrap_err()
        };
        assert!(matches!(bad("run.n_trajectories = 0"), Error::Config(_)));
        assert!(matches!(
            bad("sweep.parameter = 'phi'\nsweep.values = []"),
            Error::Config(_)
        ));
        assert!(matches!(
            bad("sweep.parameter = 'chi'\nsweep.values = [1.0]"),
            Error::Config(_)
        ));
        // dt * gamma = 0.5
        assert!(matches!(
            bad("model.tau = 1.0\nmodel.n_bins = 2"),
            Error::Config(_)
        ));
        assert!(matches!(bad("run.bogus = 1"), Error::Config(_)));
        assert!(matches!(bad("model.tua = 1.0"), Error::Config(_)));
        assert!(matches!(bad("run.observables.flx = true"), Error::Config(_)));
    }

    #[test]
    fn tau_sweep_keeps_step() {
        let base = ModelParams::symmetric(1.0, 0.1, 10);
        let p = sweep_point(&base, "tau", 2.5, true).unwrap();
        assert_eq!(p.n_bins, 250);
        let p = sweep_point(&base, "tau", 0.5, false).unwrap();
        assert_eq!(p.n_bins, 10);
    }
}
