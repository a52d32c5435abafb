use std::path::{Path, PathBuf};

use graphdep::models::{ModelConfig, ModelSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{read_text, resolve};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Law {
    /// Marchenko–Pastur with ratio `p/n`.
    #[default]
    Mp,
    /// Fixed-point law of `mu`, by default the spectrum of `Sigma_p`.
    FixedPoint,
}

/// One experiment. Relative paths are taken relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub n: usize,
    /// Expected `p/n`; checked, never used in place of it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default)]
    pub law: Law,
    /// Atoms CSV for the fixed-point law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Overrides the model seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_reps() -> usize {
    10_000
}

fn default_grid_points() -> usize {
    2000
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            CliError::input(format!("config line {}: {e}", e.line()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let mut cfg = Self::from_json(&read_text(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.mu = cfg.mu.map(|p| resolve(base, &p));
        cfg.output_dir = cfg.output_dir.map(|p| resolve(base, &p));
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        if self.n == 0 {
            return Err(CliError::input("`n` must be positive"));
        }
        if self.reps < 100 {
            return Err(CliError::input(format!("`reps` must be at least 100, got {}", self.reps)));
        }
        if self.grid_points < 2 {
            return Err(CliError::input("`grid_points` must be at least 2"));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0) {
                return Err(CliError::input(format!("`eta` must be positive, got {eta}")));
            }
        }
        if self.mu.is_some() && self.law != Law::FixedPoint {
            return Err(CliError::input("`mu` only applies to the fixed-point law"));
        }
        let model = self.model()?;
        self.check_ratio(model.p(), self.n)
    }

    /// `|p/n - rho| <= 0.5/n` when `rho` is given.
    pub fn check_ratio(&self, p: usize, n: usize) -> CliResult<()> {
        if let Some(rho) = self.rho {
            let ratio = p as f64 / n as f64;
            if (ratio - rho).abs() > 0.5 / n as f64 {
                return Err(CliError::input(format!(
                    "rho = {rho} does not match p/n = {p}/{n} = {ratio}"
                )));
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(self.model.seed)
    }

    pub fn model(&self) -> CliResult<ModelSpec> {
        Ok(self.model.build()?.with_seed(self.seed()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"model":{"kind":"m-dependent","p":40,"m":0,"innovation":"gaussian","seed":1},"n":80"#;

    fn parse(extra: &str) -> CliResult<ExperimentConfig> {
        ExperimentConfig::from_json(&format!("{BASE}{extra}}}"))
    }

    #[test]
    fn defaults_and_overrides() {
        let cfg = parse("").unwrap();
        assert_eq!(cfg.law, Law::Mp);
        assert_eq!(cfg.reps, 10_000);
        assert_eq!(cfg.seed(), 1);
        let cfg = parse(r#","seed":9,"law":"fixed-point","rho":0.5"#).unwrap();
        assert_eq!(cfg.model().unwrap().seed(), 9);
        assert_eq!(cfg.law, Law::FixedPoint);
    }

    #[test]
    fn validation() {
        assert!(parse(r#","rho":0.4"#).is_err());
        assert!(parse(r#","rho":0.505"#).is_ok());
        assert!(parse(r#","reps":99"#).is_err());
        assert!(parse(r#","bogus":1"#).is_err());
        assert!(parse(r#","mu":"a.csv""#).is_err());
        assert!(parse(r#","eta":0"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"model":{"kind":"m-dependent","p":4,"m":9,"innovation":"gaussian","seed":1},"n":8}"#).is_err());
    }
}
