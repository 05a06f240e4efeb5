use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_space::{hb_norm, HbSurface, SurfaceGrid};

/// Declared-bound margin for the proportional-capped family.
///
/// A coefficient that vanishes with the state cannot carry a uniform
/// norm bound over all of the state space (its derivative terms grow
/// with the state), so the declared constant is calibrated to the
/// audit's sampling law rather than a true supremum.
const PROP_CAP_NORM_MARGIN: f64 = 4.0;

/// Built-in coefficient families.
///
/// Every σ, γ and δ in a model is drawn from this registry, so each
/// family can declare its assumption constants and the audits stay
/// decidable. `h` is the prevailing surface, `x` the jump mark (ignored
/// by factor volatilities and by the mark-independent families).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum CoeffFamily {
    /// Constant surface `level`.
    Constant { level: f64 },
    /// `scale · e^{-rate·ξ}`, constant in η.
    ExponentialDecay { scale: f64, rate: f64 },
    /// `scale · min(h(ξ,η), cap)` — vanishes wherever h vanishes.
    ProportionalCapped { scale: f64, cap: f64 },
    /// `scale · x · e^{-rate·ξ}` — jump size proportional to the mark.
    MarkScaled { scale: f64, rate: f64 },
}

impl CoeffFamily {
    pub fn eval(&self, h: &HbSurface, mark: f64) -> Result<HbSurface> {
        let g = *h.grid();
        let out = match self {
            CoeffFamily::Constant { level } => HbSurface::constant(g, *level)?,
            CoeffFamily::ExponentialDecay { scale, rate } => {
                HbSurface::from_fn(g, |xi, _| scale * (-rate * xi).exp())?
            }
            CoeffFamily::ProportionalCapped { scale, cap } => h.clip_max(*cap).scale(*scale),
            CoeffFamily::MarkScaled { scale, rate } => {
                HbSurface::from_fn(g, |xi, _| scale * mark * (-rate * xi).exp())?
            }
        };
        Ok(out)
    }

    /// Whether the family reads the prevailing surface.
    pub fn state_dependent(&self) -> bool {
        matches!(self, CoeffFamily::ProportionalCapped { .. })
    }

    /// Whether the family reads the jump mark.
    pub fn mark_dependent(&self) -> bool {
        matches!(self, CoeffFamily::MarkScaled { .. })
    }

    /// Declared β′-norm bound for a single evaluation at mark `x`.
    ///
    /// Exact for the state-independent families (the norm of the one
    /// surface they ever produce); a sampling-law bound for the
    /// proportional-capped family.
    pub fn declared_bound(&self, grid: &SurfaceGrid, mark: f64) -> f64 {
        match self {
            CoeffFamily::ProportionalCapped { scale, cap } => {
                scale.abs() * (1.0 + cap.abs()) * PROP_CAP_NORM_MARGIN
            }
            _ => {
                let s = self
                    .eval(&HbSurface::zeros(*grid), mark)
                    .expect("state-independent family evaluation");
                hb_norm(&s, grid.beta_prime).expect("positive exponent").total
            }
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let check = |v: f64, name: &str| -> Result<()> {
            if !v.is_finite() {
                return Err(Error::Config(format!("{path}.{name}: must be finite, got {v}")));
            }
            Ok(())
        };
        match self {
            CoeffFamily::Constant { level } => check(*level, "level"),
            CoeffFamily::ExponentialDecay { scale, rate } | CoeffFamily::MarkScaled { scale, rate } => {
                check(*scale, "scale")?;
                check(*rate, "rate")?;
                if *rate < 0.0 {
                    return Err(Error::Config(format!("{path}.rate: must be >= 0, got {rate}")));
                }
                Ok(())
            }
            CoeffFamily::ProportionalCapped { scale, cap } => {
                check(*scale, "scale")?;
                check(*cap, "cap")?;
                if *cap <= 0.0 {
                    return Err(Error::Config(format!("{path}.cap: must be > 0, got {cap}")));
                }
                Ok(())
            }
        }
    }

    /// Known family names, for config error messages.
    pub fn known_names() -> &'static [&'static str] {
        &["constant", "exponential-decay", "proportional-capped", "mark-scaled"]
    }
}

/// One truncated Q-Wiener factor: eigenvalue weight λ_j and the factor
/// map. The factor surface σʲ(h) returned by [`FactorVolatility::sigma`]
/// already absorbs √λ_j, so the engine drives it with plain N(0, dt)
/// increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolatilityFactor {
    pub weight: f64,
    pub family: CoeffFamily,
    /// Modeler-declared norm bound for this factor at β′ (the c^j of the
    /// standing assumptions). Derived from the family when absent;
    /// audited against sampled sups either way.
    #[serde(default)]
    pub declared_bound: Option<f64>,
}

/// The truncated volatility operator: finitely many weighted factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FactorVolatility {
    pub factors: Vec<VolatilityFactor>,
}

impl FactorVolatility {
    pub fn none() -> Self {
        Self { factors: Vec::new() }
    }

    pub fn single(weight: f64, family: CoeffFamily) -> Self {
        Self { factors: vec![VolatilityFactor { weight, family, declared_bound: None }] }
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    /// σʲ(h) = √λ_j · family_j(h).
    pub fn sigma(&self, h: &HbSurface, j: usize) -> Result<HbSurface> {
        let f = &self.factors[j];
        Ok(f.family.eval(h, 0.0)?.scale(f.weight.sqrt()))
    }

    /// Declared (c^j) constants at β′; Σ (c^j)² is finite by construction.
    pub fn declared_constants(&self, grid: &SurfaceGrid) -> Vec<f64> {
        self.factors
            .iter()
            .map(|f| {
                f.declared_bound
                    .unwrap_or_else(|| f.weight.sqrt() * f.family.declared_bound(grid, 0.0))
            })
            .collect()
    }

    pub fn state_dependent(&self) -> bool {
        self.factors.iter().any(|f| f.family.state_dependent())
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        for (j, f) in self.factors.iter().enumerate() {
            if !(f.weight > 0.0) || !f.weight.is_finite() {
                return Err(Error::Config(format!(
                    "{path}.factors[{j}].weight: must be > 0, got {}",
                    f.weight
                )));
            }
            f.family.validate(&format!("{path}.factors[{j}].family"))?;
            if f.family.mark_dependent() {
                return Err(Error::Config(format!(
                    "{path}.factors[{j}].family: mark-scaled is only valid for jump coefficients"
                )));
            }
        }
        Ok(())
    }
}

/// One atom of the discrete market jump measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkPoint {
    pub mark: f64,
    pub weight: f64,
}

/// Discrete homogeneous jump measure on the market mark space together
/// with the jump coefficient γ. Total mass Σ w_x is the Poisson event
/// rate; marks are drawn with probability w_x / Σ w.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MarketJumpSpec {
    pub marks: Vec<MarkPoint>,
    #[serde(default)]
    pub family: Option<CoeffFamily>,
    /// Modeler-declared bound M at β′ over all marks; derived from the
    /// family when absent.
    #[serde(default)]
    pub declared_bound: Option<f64>,
}

impl MarketJumpSpec {
    pub fn none() -> Self {
        Self { marks: Vec::new(), family: None, declared_bound: None }
    }

    pub fn new(marks: Vec<MarkPoint>, family: CoeffFamily) -> Self {
        Self { marks, family: Some(family), declared_bound: None }
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    /// F̃(G) = Σ w_x.
    pub fn total_mass(&self) -> f64 {
        self.marks.iter().map(|m| m.weight).sum()
    }

    pub fn gamma(&self, h: &HbSurface, mark: f64) -> Result<HbSurface> {
        match &self.family {
            Some(f) => f.eval(h, mark),
            None => Ok(HbSurface::zeros(*h.grid())),
        }
    }

    /// Declared bound M over all marks at β′.
    pub fn declared_bound(&self, grid: &SurfaceGrid) -> f64 {
        if let Some(b) = self.declared_bound {
            return b;
        }
        match &self.family {
            None => 0.0,
            Some(f) => self
                .marks
                .iter()
                .map(|m| f.declared_bound(grid, m.mark))
                .fold(0.0, f64::max),
        }
    }

    pub fn state_dependent(&self) -> bool {
        self.family.as_ref().is_some_and(|f| f.state_dependent())
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        for (i, m) in self.marks.iter().enumerate() {
            if !(m.weight > 0.0) || !m.weight.is_finite() {
                return Err(Error::Config(format!(
                    "{path}.marks[{i}].weight: must be > 0, got {}",
                    m.weight
                )));
            }
            if !m.mark.is_finite() {
                return Err(Error::Config(format!("{path}.marks[{i}].mark: must be finite")));
            }
        }
        if !self.marks.is_empty() && self.family.is_none() {
            return Err(Error::Config(format!(
                "{path}.family: required when marks are present"
            )));
        }
        if let Some(f) = &self.family {
            f.validate(&format!("{path}.family"))?;
        }
        Ok(())
    }
}

/// Loss-jump coefficient δ(h, x) for loss sizes x ∈ [0, 1]. When absent,
/// loss events still occur (driven by the spread curve's short end) but
/// do not feed back into the surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct LossJumpSpec {
    #[serde(default)]
    pub family: Option<CoeffFamily>,
    /// Modeler-declared bound M at β′ over loss sizes; derived from the
    /// family when absent.
    #[serde(default)]
    pub declared_bound: Option<f64>,
}

impl LossJumpSpec {
    pub fn none() -> Self {
        Self { family: None, declared_bound: None }
    }

    pub fn new(family: CoeffFamily) -> Self {
        Self { family: Some(family), declared_bound: None }
    }

    pub fn is_empty(&self) -> bool {
        self.family.is_none()
    }

    pub fn delta(&self, h: &HbSurface, mark: f64) -> Result<HbSurface> {
        match &self.family {
            Some(f) => f.eval(h, mark),
            None => Ok(HbSurface::zeros(*h.grid())),
        }
    }

    /// Declared bound M at β′ over loss sizes in [0, 1].
    pub fn declared_bound(&self, grid: &SurfaceGrid) -> f64 {
        if let Some(b) = self.declared_bound {
            return b;
        }
        match &self.family {
            None => 0.0,
            // Mark-scaled loss jumps take sizes in [0, 1]; x = 1 is the extreme.
            Some(f) => f.declared_bound(grid, 1.0),
        }
    }

    pub fn state_dependent(&self) -> bool {
        self.family.as_ref().is_some_and(|f| f.state_dependent())
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if let Some(f) = &self.family {
            f.validate(&format!("{path}.family"))?;
        }
        Ok(())
    }
}

/// Loss level L_t and its left limit L_{t-}; non-decreasing in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossState {
    pub level: f64,
    pub level_pre: f64,
}

impl LossState {
    pub fn initial() -> Self {
        Self { level: 0.0, level_pre: 0.0 }
    }

    /// State between jumps: both legs at `level`.
    pub fn at_level(level: f64) -> Result<Self> {
        let s = Self { level, level_pre: level };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.level_pre && self.level_pre <= self.level && self.level <= 1.0) {
            return Err(Error::Model(format!(
                "loss state must satisfy 0 <= pre <= level <= 1, got pre={}, level={}",
                self.level_pre, self.level
            )));
        }
        Ok(())
    }
}
