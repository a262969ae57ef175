//! Scenario files: one audit per TOML document.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use surveydp_core::population::load_population;
use surveydp_core::{
    MechanismSpec64, Population64, Query64, Record64, SamplingDesign64, Universe64,
};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    /// Label for report rows; defaults to the file stem.
    pub scenario: Option<String>,
    /// CSV population, relative to the config file.
    pub population: Option<PathBuf>,
    pub design: SamplingDesign64,
    pub mechanism: MechanismConfig,
    pub audit: AuditConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismConfig {
    pub query: Query64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Mc,
    Scan,
    Stratified,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub mode: Mode,
    /// Record added to the population (exact and mc).
    pub added: Option<Record64>,
    /// Candidate values for added records (stratified).
    pub values: Option<Vec<f64>>,
    pub universe: Option<UniverseConfig>,
    pub max_size: Option<usize>,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    pub seed: Option<u64>,
    /// Treat allocations larger than a stratum as an error instead of
    /// truncating them.
    #[serde(default)]
    pub strict_feasibility: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniverseConfig {
    pub values: Vec<f64>,
    pub strata: u32,
    pub clusters: u32,
}

fn default_samples() -> usize {
    1_000_000
}

fn default_confidence() -> f64 {
    0.95
}

/// A parsed config with its population loaded.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub config: DesignConfig,
    pub population: Option<Population64>,
    pub mechanism: MechanismSpec64,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let config: DesignConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let name = config.scenario.clone().unwrap_or_else(|| {
            path.file_stem()
                .map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
        });
        if let Query64::ClampedSum { lo, hi } = config.mechanism.query {
            Query64::clamped_sum(lo, hi)
                .map_err(|e| CliError::Config(format!("{}: mechanism: {e}", path.display())))?;
        }
        let mechanism = MechanismSpec64::new(config.mechanism.query, config.mechanism.epsilon)
            .map_err(|e| CliError::Config(format!("{}: mechanism: {e}", path.display())))?;
        let population = match &config.population {
            Some(file) => {
                let file = path.parent().unwrap_or(Path::new(".")).join(file);
                let csv = fs::read_to_string(&file).map_err(|e| {
                    CliError::Config(format!("cannot read population {}: {e}", file.display()))
                })?;
                Some(
                    load_population(&csv)
                        .map_err(|e| CliError::Config(format!("{}: {e}", file.display())))?,
                )
            }
            None => None,
        };
        Ok(Self {
            name,
            config,
            population,
            mechanism,
        })
    }

    pub fn population(&self) -> Result<&Population64, CliError> {
        self.population.as_ref().ok_or_else(|| {
            CliError::Config(format!(
                "{}: `population` is required for this mode",
                self.name
            ))
        })
    }

    pub fn added(&self) -> Result<Record64, CliError> {
        self.config.audit.added.ok_or_else(|| {
            CliError::Config(format!(
                "{}: `audit.added` is required for this mode",
                self.name
            ))
        })
    }

    pub fn universe(&self) -> Result<(Universe64, usize), CliError> {
        let audit = &self.config.audit;
        match (&audit.universe, audit.max_size) {
            (Some(u), Some(max)) => {
                Ok((Universe64::new(u.values.clone(), u.strata, u.clusters), max))
            }
            _ => Err(CliError::Config(format!(
                "{}: scan mode needs `audit.universe` and `audit.max_size`",
                self.name
            ))),
        }
    }

    pub fn design(&self) -> &SamplingDesign64 {
        &self.config.design
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_cluster_scenario() {
        let text = r#"
            population = "p.csv"
            [design]
            design = "cluster"
            choose = 1
            within = { kind = "census" }
            [mechanism]
            query = { kind = "count" }
            epsilon = 1.0
            [audit]
            mode = "exact"
            added = { stratum = 1, cluster = 1, value = 0.0 }
        "#;
        let config: DesignConfig = toml::from_str(text).unwrap();
        assert_eq!(config.audit.mode, Mode::Exact);
        assert_eq!(config.audit.n_samples, 1_000_000);
        assert!(matches!(
            config.design,
            SamplingDesign64::Cluster { choose: 1, .. }
        ));
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = r#"
            [design]
            design = "poisson"
            rates = [0.5]
            [mechanism]
            query = { kind = "count" }
            epsilon = 1.0
            [audit]
            mode = "exact"
            typo = 1
        "#;
        assert!(toml::from_str::<DesignConfig>(text).is_err());
    }
}
