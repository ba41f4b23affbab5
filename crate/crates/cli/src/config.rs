//! Experiment configuration: a flat TOML file naming the scenario, the SNR
//! sweep, the Monte-Carlo budget and optional solver overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ergocap::channel::PathAngularSpec;
use ergocap::optimizer::OptimizerOptions;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Transmit antenna count.
    pub t: usize,
    /// Receive antenna count.
    pub r: usize,
    /// One entry per propagation path.
    pub paths: Vec<PathConfig>,
    /// SNR sweep in dB; `SNR = 1/σ²`, so 0 dB means unit noise power.
    pub snr_db: Vec<f64>,
    /// Monte-Carlo channel realizations per EMI estimate.
    pub trials: u64,
    /// Base seed; every Monte-Carlo stream derives from it.
    pub seed: u64,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    /// Default output file; `--output` overrides, stdout if absent.
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    /// Units for reported EMI values.
    #[serde(default)]
    pub report_base: ReportBase,
    /// Antenna spacing in carrier wavelengths.
    #[serde(default = "default_spacing")]
    pub spacing_wavelengths: f64,
    /// Informational only: geometry is fixed by `spacing_wavelengths`.
    #[serde(default)]
    pub carrier_frequency_ghz: Option<f64>,
}

fn default_spacing() -> f64 {
    ergocap::channel::DEFAULT_SPACING_WAVELENGTHS
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathConfig {
    pub mean_departure_angle: f64,
    pub departure_spread: f64,
    pub mean_arrival_angle: f64,
    pub arrival_spread: f64,
    #[serde(default = "default_power")]
    pub relative_power: f64,
}

fn default_power() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReportBase {
    Nats,
    #[default]
    Bits,
}

/// Optimizer and canonical-solver overrides; defaults match
/// [`OptimizerOptions::default`].
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    pub tol_delta: f64,
    pub tol_q: f64,
    pub max_outer: usize,
    pub canonical_tol: f64,
    pub canonical_max_iter: usize,
    pub stall_window: usize,
    pub max_restarts: usize,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        let base = OptimizerOptions::default();
        Self {
            tol_delta: base.tol_delta,
            tol_q: base.tol_q,
            max_outer: base.max_outer,
            canonical_tol: base.canonical_tol,
            canonical_max_iter: base.canonical_max_iter,
            stall_window: base.stall_window,
            max_restarts: base.max_restarts,
        }
    }
}

impl ToleranceConfig {
    pub fn optimizer_options(&self, seed: u64) -> OptimizerOptions {
        OptimizerOptions {
            tol_delta: self.tol_delta,
            tol_q: self.tol_q,
            max_outer: self.max_outer,
            canonical_tol: self.canonical_tol,
            canonical_max_iter: self.canonical_max_iter,
            stall_window: self.stall_window,
            max_restarts: self.max_restarts,
            seed,
            ..OptimizerOptions::default()
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: Self = toml::from_str(&text)
            .with_context(|| format!("cannot parse config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.t == 0 || self.r == 0 {
            bail!("antenna counts must be at least 1");
        }
        if self.paths.is_empty() {
            bail!("at least one path is required");
        }
        if self.snr_db.is_empty() {
            bail!("snr_db must name at least one sweep point");
        }
        if self.snr_db.iter().any(|x| !x.is_finite()) {
            bail!("snr_db entries must be finite");
        }
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if !(self.spacing_wavelengths.is_finite() && self.spacing_wavelengths > 0.0) {
            bail!("spacing_wavelengths must be positive");
        }
        let tol = &self.tolerances;
        if !(tol.tol_delta > 0.0 && tol.tol_q > 0.0 && tol.canonical_tol > 0.0) {
            bail!("tolerances must be positive");
        }
        if tol.max_outer == 0 || tol.canonical_max_iter == 0 {
            bail!("iteration limits must be at least 1");
        }
        for (i, path) in self.paths.iter().enumerate() {
            path.to_spec()
                .with_context(|| format!("paths[{i}] is invalid"))?;
        }
        Ok(())
    }

    pub fn path_specs(&self) -> anyhow::Result<Vec<PathAngularSpec>> {
        self.paths.iter().map(PathConfig::to_spec).collect()
    }
}

impl PathConfig {
    pub fn to_spec(&self) -> anyhow::Result<PathAngularSpec> {
        Ok(PathAngularSpec::new(
            self.mean_departure_angle,
            self.departure_spread,
            self.mean_arrival_angle,
            self.arrival_spread,
            self.relative_power,
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
t = 4
r = 4
snr_db = [0.0, 10.0]
trials = 100
seed = 7

[[paths]]
mean_departure_angle = 1.0
departure_spread = 0.05
mean_arrival_angle = 2.0
arrival_spread = 0.05
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let config: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        config.validate().unwrap();
        assert_eq!(config.report_base, ReportBase::Bits);
        assert_eq!(config.spacing_wavelengths, 0.5);
        assert_eq!(config.tolerances.max_outer, 200);
        assert_eq!(config.paths[0].relative_power, 1.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = format!("{MINIMAL}\nunexpected_key = 1\n");
        assert!(toml::from_str::<ExperimentConfig>(&bad).is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut config: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        config.snr_db.clear();
        assert!(config.validate().is_err());

        let mut config: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        config.trials = 0;
        assert!(config.validate().is_err());

        let mut config: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        config.paths[0].relative_power = -1.0;
        assert!(config.validate().is_err());
    }
}
