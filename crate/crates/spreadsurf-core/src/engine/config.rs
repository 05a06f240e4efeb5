use serde::{Deserialize, Serialize};

use crate::coefficients::{FactorVolatility, LossJumpSpec, MarketJumpSpec};
use crate::error::{Error, Result};
use crate::function_space::{HbSurface, SurfaceGrid};

/// Which drift condition drives the SPDE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModelMode {
    /// Credit surfaces: loss process live, no-arbitrage drift with the
    /// loss-indicator bracket.
    #[default]
    Credit,
    /// Survival surfaces: no loss process, drift with the [e^{−Iδ} − 1]
    /// bracket.
    Mortality,
}

/// Drift selection; `Zero` deliberately violates the no-arbitrage
/// condition and exists as the negative control for martingale tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DriftMode {
    #[default]
    NoArbitrage,
    Zero,
}

/// A (maturity, quality) pair whose bond price is recorded at every
/// snapshot time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BondProbe {
    pub maturity: f64,
    pub eta: f64,
}

/// Parametric initial surfaces, plus escape hatches for explicit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum InitialSurfaceSpec {
    /// r₀ ≡ level.
    Flat { level: f64 },
    /// r₀(ξ,η) = base_level + base_bump·e^{−base_decay·ξ}
    ///          + spread_level·(1−η)^spread_power·e^{−spread_decay·ξ}.
    ///
    /// The short end is then base + spread·(1−η)^p, decreasing in η, so
    /// the implied loss intensity is non-negative from the start.
    Separable {
        base_level: f64,
        #[serde(default)]
        base_bump: f64,
        #[serde(default)]
        base_decay: f64,
        #[serde(default)]
        spread_level: f64,
        #[serde(default)]
        spread_decay: f64,
        #[serde(default = "one")]
        spread_power: i32,
    },
    /// Explicit nodal values, row per ξ node.
    Values { values: Vec<Vec<f64>> },
    /// Surface CSV produced by this library.
    Csv { path: String },
}

fn one() -> i32 {
    1
}

impl InitialSurfaceSpec {
    pub fn build(&self, grid: SurfaceGrid) -> Result<HbSurface> {
        match self {
            InitialSurfaceSpec::Flat { level } => HbSurface::constant(grid, *level),
            InitialSurfaceSpec::Separable {
                base_level,
                base_bump,
                base_decay,
                spread_level,
                spread_decay,
                spread_power,
            } => HbSurface::from_fn(grid, |xi, eta| {
                base_level
                    + base_bump * (-base_decay * xi).exp()
                    + spread_level * (1.0 - eta).powi(*spread_power) * (-spread_decay * xi).exp()
            }),
            InitialSurfaceSpec::Values { values } => {
                let flat: Vec<f64> = values.iter().flatten().copied().collect();
                if values.len() != grid.xi_points()
                    || values.iter().any(|r| r.len() != grid.eta_points())
                {
                    return Err(Error::Config(format!(
                        "initial_surface.values must be {} rows of {} columns",
                        grid.xi_points(),
                        grid.eta_points()
                    )));
                }
                HbSurface::from_values(grid, flat)
            }
            InitialSurfaceSpec::Csv { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("initial_surface.path: cannot read {path}: {e}"))
                })?;
                HbSurface::from_csv(grid, &text)
            }
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        if let InitialSurfaceSpec::Separable { spread_power, .. } = self {
            if *spread_power < 1 {
                return Err(Error::Config(format!(
                    "{path}.spread_power: must be >= 1, got {spread_power}"
                )));
            }
        }
        Ok(())
    }
}

/// Everything a simulation run needs: the model, its numerics, and what
/// to record along the way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub grid: SurfaceGrid,
    #[serde(default)]
    pub volatility: FactorVolatility,
    #[serde(default)]
    pub market_jumps: MarketJumpSpec,
    #[serde(default)]
    pub loss_jumps: LossJumpSpec,
    pub initial_surface: InitialSurfaceSpec,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub rate_bound: f64,
    #[serde(default)]
    pub mode: ModelMode,
    #[serde(default)]
    pub drift: DriftMode,
    #[serde(default)]
    pub output_times: Vec<f64>,
    #[serde(default)]
    pub probes: Vec<BondProbe>,
    #[serde(default)]
    pub store_surfaces: bool,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        SurfaceGrid::new(
            self.grid.xi_max,
            self.grid.n_xi,
            self.grid.n_eta,
            self.grid.beta,
            self.grid.beta_prime,
        )
        .map_err(|e| Error::Config(format!("grid: {e}")))?;
        self.volatility.validate("volatility")?;
        self.market_jumps.validate("market_jumps")?;
        self.loss_jumps.validate("loss_jumps")?;
        self.initial_surface.validate("initial_surface")?;
        if self.n_paths < 1 {
            return Err(Error::Config("n_paths: must be >= 1".into()));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Config(format!(
                "horizon: must be > 0, got {}",
                self.horizon
            )));
        }
        self.grid
            .lattice_steps(self.horizon)
            .map_err(|e| Error::Config(format!("horizon: {e}")))?;
        if !(self.rate_bound >= 0.0) || !self.rate_bound.is_finite() {
            return Err(Error::Config(format!(
                "rate_bound: must be finite and >= 0, got {}",
                self.rate_bound
            )));
        }
        let mut prev = f64::NEG_INFINITY;
        for (i, t) in self.output_times.iter().enumerate() {
            self.grid
                .lattice_steps(*t)
                .map_err(|e| Error::Config(format!("output_times[{i}]: {e}")))?;
            if *t > self.horizon + 1e-12 {
                return Err(Error::Config(format!(
                    "output_times[{i}]: {t} exceeds the horizon {}",
                    self.horizon
                )));
            }
            if *t <= prev {
                return Err(Error::Config(
                    "output_times: must be strictly increasing".into(),
                ));
            }
            prev = *t;
        }
        for (i, p) in self.probes.iter().enumerate() {
            self.grid
                .lattice_steps(p.maturity)
                .map_err(|e| Error::Config(format!("probes[{i}].maturity: {e}")))?;
            self.grid
                .eta_index(p.eta)
                .map_err(|e| Error::Config(format!("probes[{i}].eta: {e}")))?;
        }
        Ok(())
    }

    /// Materializes the initial surface on the config's grid.
    pub fn initial(&self) -> Result<HbSurface> {
        self.initial_surface.build(self.grid)
    }

    /// Parses and validates a JSON config, reporting unknown registry
    /// family names with the list of known ones.
    pub fn from_json(text: &str) -> Result<ModelConfig> {
        let cfg: ModelConfig = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            if msg.contains("unknown variant") {
                Error::Config(format!(
                    "{msg}; known registry families are {}",
                    crate::coefficients::CoeffFamily::known_names().join(", ")
                ))
            } else {
                Error::Config(msg)
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Number of engine steps (Δt is locked to the ξ step).
    pub fn n_steps(&self) -> usize {
        self.grid
            .lattice_steps(self.horizon)
            .expect("validated horizon")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_json() -> serde_json::Value {
        serde_json::json!({
            "grid": {"xi_max": 2.0, "n_xi": 104, "n_eta": 20, "beta": 0.5, "beta_prime": 1.0},
            "volatility": {"factors": [{"weight": 1.0, "family": {"type": "constant", "level": 0.02}}]},
            "initial_surface": {"type": "separable", "base_level": 0.02, "spread_level": 0.2},
            "horizon": 1.0,
            "n_paths": 10,
            "seed": 42,
            "rate_bound": 1.0,
            "output_times": [0.5, 1.0]
        })
    }

    #[test]
    fn parses_and_validates_a_minimal_config() {
        let cfg = ModelConfig::from_json(&base_json().to_string()).unwrap();
        assert_eq!(cfg.n_steps(), 52);
        assert_eq!(cfg.mode, ModelMode::Credit);
        assert_eq!(cfg.drift, DriftMode::NoArbitrage);
        let h = cfg.initial().unwrap();
        assert!((h.at(0, 0) - 0.22).abs() < 1e-12);
        assert!((h.at(0, cfg.grid.n_eta) - 0.02).abs() < 1e-12);
    }

    #[test]
    fn unknown_family_is_reported_with_suggestions() {
        let mut v = base_json();
        v["volatility"]["factors"][0]["family"]["type"] = "constnt".into();
        let err = ModelConfig::from_json(&v.to_string()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown variant"), "{msg}");
        assert!(msg.contains("proportional-capped"), "{msg}");
    }

    #[test]
    fn off_lattice_output_time_is_rejected_with_location() {
        let mut v = base_json();
        v["output_times"] = serde_json::json!([0.51]);
        let err = ModelConfig::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("output_times[0]"), "{err}");
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = ModelConfig::from_json(&base_json().to_string()).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back = ModelConfig::from_json(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
