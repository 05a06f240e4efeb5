use crate::error::{Error, Result};
use crate::function_space::grid::SurfaceGrid;

/// Values above this make exp() overflow f64; reject rather than produce inf.
pub(crate) const EXP_OVERFLOW_LIMIT: f64 = 700.0;

/// A sampled surface h(ξ, η) on a [`SurfaceGrid`].
///
/// Values are stored row-major with ξ as the outer index:
/// `values[i * (n_eta + 1) + k] = h(ξ_i, η_k)`. All constructors reject
/// non-finite values; operations are pure and return new surfaces, so a
/// surface never changes after it is built and can be shared freely
/// across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct HbSurface {
    grid: SurfaceGrid,
    values: Vec<f64>,
}

impl HbSurface {
    /// Builds a surface by evaluating `f(ξ, η)` at every grid node.
    pub fn from_fn(grid: SurfaceGrid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.xi_points() {
            let xi = grid.xi(i);
            for k in 0..grid.eta_points() {
                values.push(f(xi, grid.eta(k)));
            }
        }
        Self::from_values(grid, values)
    }

    pub fn from_values(grid: SurfaceGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Data(format!(
                "surface has {} values but the grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            let (i, k) = (bad / grid.eta_points(), bad % grid.eta_points());
            return Err(Error::Data(format!(
                "non-finite surface value at (xi={}, eta={})",
                grid.xi(i),
                grid.eta(k)
            )));
        }
        Ok(Self { grid, values })
    }

    /// Constant surface h ≡ c.
    pub fn constant(grid: SurfaceGrid, c: f64) -> Result<Self> {
        Self::from_values(grid, vec![c; grid.len()])
    }

    pub fn zeros(grid: SurfaceGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    #[inline]
    pub fn grid(&self) -> &SurfaceGrid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn from_values_unchecked(grid: SurfaceGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    #[inline]
    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, k)]
    }

    /// The short-end curve η ↦ h(0, η) as a slice of nodal values.
    #[inline]
    pub fn short_end(&self) -> &[f64] {
        &self.values[..self.grid.eta_points()]
    }

    /// h(0, η) for arbitrary η, linear between nodes, flat h(0, 1) beyond.
    pub fn short_end_at(&self, eta: f64) -> f64 {
        let row = self.short_end();
        if eta >= 1.0 {
            return row[row.len() - 1];
        }
        if eta <= 0.0 {
            return row[0];
        }
        let pos = eta * self.grid.n_eta as f64;
        let k = (pos.floor() as usize).min(self.grid.n_eta - 1);
        let w = pos - k as f64;
        row[k] * (1.0 - w) + row[k + 1] * w
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn check_same_grid(&self, other: &HbSurface) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::Usage("surfaces live on different grids".into()));
        }
        Ok(())
    }

    /// Cumulative integral (Ih)(ξ, η) = ∫₀^ξ h(ζ, η) dζ, trapezoid per η slice.
    pub fn integral_op(&self) -> HbSurface {
        let ep = self.grid.eta_points();
        let half_dx = 0.5 * self.grid.dx();
        let mut out = vec![0.0; self.values.len()];
        for i in 1..self.grid.xi_points() {
            let (prev, cur) = (&self.values[(i - 1) * ep..i * ep], &self.values[i * ep..(i + 1) * ep]);
            for k in 0..ep {
                out[i * ep + k] = out[(i - 1) * ep + k] + half_dx * (prev[k] + cur[k]);
            }
        }
        HbSurface { grid: self.grid, values: out }
    }

    /// Shift semigroup (S_t h)(ξ, η) = h(ξ + t, η) for lattice times t.
    ///
    /// Values past Ξ are filled by flat extrapolation of the last ξ row,
    /// so the semigroup law S_s S_t = S_{s+t} holds exactly.
    pub fn shift(&self, t: f64) -> Result<HbSurface> {
        let steps = self.grid.lattice_steps(t)?;
        Ok(self.shift_steps(steps))
    }

    /// `shift` by an integer number of lattice steps.
    pub fn shift_steps(&self, steps: usize) -> HbSurface {
        let ep = self.grid.eta_points();
        let n_xi = self.grid.n_xi;
        let mut out = vec![0.0; self.values.len()];
        for i in 0..=n_xi {
            let src = (i + steps).min(n_xi);
            out[i * ep..(i + 1) * ep].copy_from_slice(&self.values[src * ep..(src + 1) * ep]);
        }
        HbSurface { grid: self.grid, values: out }
    }

    /// Pointwise exponential. Rejects inputs that would overflow.
    pub fn exp_surface(&self) -> Result<HbSurface> {
        if let Some(v) = self.values.iter().find(|v| **v > EXP_OVERFLOW_LIMIT) {
            return Err(Error::Range(format!(
                "exp of surface value {v} would overflow"
            )));
        }
        let values = self.values.iter().map(|v| v.exp()).collect();
        Ok(HbSurface { grid: self.grid, values })
    }

    /// Pointwise product.
    pub fn multiply(&self, other: &HbSurface) -> Result<HbSurface> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Ok(HbSurface { grid: self.grid, values })
    }

    pub fn scale(&self, a: f64) -> HbSurface {
        HbSurface {
            grid: self.grid,
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn add(&self, other: &HbSurface) -> Result<HbSurface> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(HbSurface { grid: self.grid, values })
    }

    pub fn sub(&self, other: &HbSurface) -> Result<HbSurface> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(HbSurface { grid: self.grid, values })
    }

    /// self + a·other, in place on a copy.
    pub fn axpy(&self, a: f64, other: &HbSurface) -> Result<HbSurface> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(s, o)| s + a * o)
            .collect();
        Ok(HbSurface { grid: self.grid, values })
    }

    /// Pointwise min(h, cap), the clipped surface the proportional
    /// volatility family is built from.
    pub fn clip_max(&self, cap: f64) -> HbSurface {
        HbSurface {
            grid: self.grid,
            values: self.values.iter().map(|v| v.min(cap)).collect(),
        }
    }

    /// ∂_ξ h by central differences, one-sided at the ξ boundaries.
    pub fn d_xi(&self) -> HbSurface {
        let ep = self.grid.eta_points();
        let n = self.grid.n_xi;
        let dx = self.grid.dx();
        let mut out = vec![0.0; self.values.len()];
        for k in 0..ep {
            out[k] = (self.values[ep + k] - self.values[k]) / dx;
            for i in 1..n {
                out[i * ep + k] =
                    (self.values[(i + 1) * ep + k] - self.values[(i - 1) * ep + k]) / (2.0 * dx);
            }
            out[n * ep + k] = (self.values[n * ep + k] - self.values[(n - 1) * ep + k]) / dx;
        }
        HbSurface { grid: self.grid, values: out }
    }

    /// ∂_η h by central differences, one-sided at the η boundaries.
    pub fn d_eta(&self) -> HbSurface {
        let ep = self.grid.eta_points();
        let de = self.grid.d_eta();
        let mut out = vec![0.0; self.values.len()];
        for i in 0..self.grid.xi_points() {
            let row = &self.values[i * ep..(i + 1) * ep];
            let orow = &mut out[i * ep..(i + 1) * ep];
            stencil_1d(row, de, orow);
        }
        HbSurface { grid: self.grid, values: out }
    }

    /// Mixed derivative, canonically ∂_η (∂_ξ h). The two composition
    /// orders agree up to rounding because the 1-D stencils commute as
    /// linear maps; fixing one order makes the value well defined.
    pub fn d_xi_eta(&self) -> HbSurface {
        self.d_xi().d_eta()
    }
}

/// Hybrid first-derivative stencil on nodal values: central in the
/// interior, first-order one-sided at both ends. Paired with trapezoid
/// weights this telescopes exactly: Σ w_k d_k = v_n − v_0.
pub(crate) fn stencil_1d(v: &[f64], h: f64, out: &mut [f64]) {
    let n = v.len() - 1;
    out[0] = (v[1] - v[0]) / h;
    for k in 1..n {
        out[k] = (v[k + 1] - v[k - 1]) / (2.0 * h);
    }
    out[n] = (v[n] - v[n - 1]) / h;
}
