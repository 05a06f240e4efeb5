//! The run file: a model config plus optional sections describing what
//! to price and what to check.

use serde::{Deserialize, Serialize};
use spreadsurf_core::{Error, ModelConfig, Result, TrancheSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum InstrumentSpec {
    /// A (T, η)-bond; priced by the discounted-indicator martingale test
    /// against the t = 0 curve.
    Bond { maturity: f64, eta: f64 },
    /// A single-tranche CDO; premium leg cross-checked against the bond
    /// representation.
    Stcdo {
        x1: f64,
        x2: f64,
        dates: Vec<f64>,
        kappa: f64,
    },
}

impl InstrumentSpec {
    pub fn label(&self) -> String {
        match self {
            InstrumentSpec::Bond { maturity, eta } => format!("bond(T={maturity}, eta={eta})"),
            InstrumentSpec::Stcdo { x1, x2, .. } => format!("stcdo({x1}, {x2}]"),
        }
    }

    pub fn tranche(&self) -> Option<TrancheSpec> {
        match self {
            InstrumentSpec::Stcdo { x1, x2, dates, kappa } => Some(TrancheSpec {
                x1: *x1,
                x2: *x2,
                dates: dates.clone(),
                kappa: *kappa,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftCheckSpec {
    #[serde(default)]
    pub loss_level: f64,
    #[serde(default)]
    pub maturities: Vec<f64>,
    #[serde(default)]
    pub etas: Vec<f64>,
}

impl Default for DriftCheckSpec {
    fn default() -> Self {
        Self { loss_level: 0.0, maturities: vec![], etas: vec![] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotonicitySpec {
    pub maturity: f64,
    pub eta_pairs: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidateSpec {
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    /// Also simulate and check empirical positivity (and monotonicity
    /// when configured).
    #[serde(default)]
    pub empirical: bool,
    #[serde(default)]
    pub monotonicity: Option<MonotonicitySpec>,
}

fn default_samples() -> usize {
    200
}

impl Default for ValidateSpec {
    fn default() -> Self {
        Self { n_samples: default_samples(), empirical: false, monotonicity: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunFile {
    #[serde(flatten)]
    pub model: ModelConfig,
    #[serde(default)]
    pub instruments: Vec<InstrumentSpec>,
    #[serde(default)]
    pub drift_check: Option<DriftCheckSpec>,
    #[serde(default)]
    pub validate: Option<ValidateSpec>,
}

impl RunFile {
    pub fn load(path: &std::path::Path) -> Result<(RunFile, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let run: RunFile = serde_json::from_str(&text).map_err(|e| {
            let msg = e.to_string();
            if msg.contains("unknown variant") {
                Error::Config(format!(
                    "{}: {msg}; known registry families are {}",
                    path.display(),
                    spreadsurf_core::CoeffFamily::known_names().join(", ")
                ))
            } else {
                Error::Config(format!("{}: {msg}", path.display()))
            }
        })?;
        run.model.validate()?;
        Ok((run, text))
    }
}
