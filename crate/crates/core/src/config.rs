//! JSON run configuration shared by the command-line tool and examples.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationOptions;
use crate::error::{Error, Result};
use crate::gaussian::CorrelationMatrix;
use crate::harness::{Scenario, DEFAULT_REPLICATIONS};
use crate::marginals::MarginalSpec;

/// Either a full symmetric matrix or the strictly lower triangle listed
/// column by column: `(2,1), (3,1), ..., (J,1), (3,2), ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorrelationInput {
    Full(Vec<Vec<f64>>),
    Lower { lower: Vec<f64> },
}

impl CorrelationInput {
    pub fn to_matrix(&self, dim: usize) -> Result<CorrelationMatrix> {
        let m = match self {
            CorrelationInput::Full(rows) => CorrelationMatrix::from_rows(rows)?,
            // column-major lower triangle equals row-major upper triangle
            CorrelationInput::Lower { lower } => CorrelationMatrix::from_upper_triangle(dim, lower)?,
        };
        if m.dim() != dim {
            return Err(Error::Dimension(format!(
                "{dim} margins but a {d}x{d} correlation matrix",
                d = m.dim()
            )));
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub plan: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub trajectories: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub margins: Vec<MarginalSpec>,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    /// Defaults to the identity.
    #[serde(default)]
    pub correlation: Option<CorrelationInput>,
    #[serde(default)]
    pub calibration: CalibrationOptions,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Rows per generated dataset.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub replications: Option<usize>,
    #[serde(default)]
    pub output: OutputPaths,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn dim(&self) -> usize {
        self.margins.len()
    }

    pub fn sigma(&self) -> Result<CorrelationMatrix> {
        match &self.correlation {
            Some(c) => c.to_matrix(self.dim()),
            None => Ok(CorrelationMatrix::identity(self.dim())),
        }
    }

    pub fn labels(&self) -> Result<Vec<String>> {
        match &self.labels {
            Some(l) if l.len() != self.dim() => Err(Error::Dimension(format!(
                "{} labels for {} margins",
                l.len(),
                self.dim()
            ))),
            Some(l) => Ok(l.clone()),
            None => Ok(crate::engine::default_labels(self.dim())),
        }
    }

    /// Calibration options with the run seed applied.
    pub fn calibration_options(&self) -> CalibrationOptions {
        CalibrationOptions {
            seed: self.seed.unwrap_or(self.calibration.seed),
            ..self.calibration
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Ok(Scenario {
            name: self.name.clone().unwrap_or_else(|| "custom".into()),
            specs: self.margins.clone(),
            sigma_star: self.sigma()?,
            n: self.n.unwrap_or(2000),
            replications: self.replications.unwrap_or(DEFAULT_REPLICATIONS),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_triangle_order() {
        let cfg = RunConfig::from_json(
            r#"{"margins": [{"family":"nb","r":3,"p":0.3},{"family":"nb","r":3,"p":0.3},{"family":"nb","r":3,"p":0.3}],
                "correlation": {"lower": [0.1, 0.2, 0.3]}}"#,
        )
        .unwrap();
        let m = cfg.sigma().unwrap();
        assert_eq!(m.get(1, 0), 0.1);
        assert_eq!(m.get(2, 0), 0.2);
        assert_eq!(m.get(2, 1), 0.3);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json(r#"{"margins": [], "colour": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"margins": [{"family":"gp","theta":1,"lambda":0,"x":2}]}"#).is_err());
    }

    #[test]
    fn identity_default() {
        let cfg = RunConfig::from_json(r#"{"margins": [{"family":"binomial","n":5,"p":0.5}]}"#).unwrap();
        assert_eq!(cfg.sigma().unwrap(), CorrelationMatrix::identity(1));
    }
}
