//! Empirical per-grid constants. The continuum theory guarantees the
//! existence of the embedding, multiplication, integral-operator and
//! exp-growth constants but gives no numbers; they are estimated once
//! per grid by a calibration sweep over the standard sampling law and
//! cached, and tests then assert against the stored values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_space::{format_float, hb_norm, SurfaceGrid};
use crate::mpp::{RngStream, StreamLabel};
use crate::sampler::SurfaceSampler;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConstants {
    pub grid: SurfaceGrid,
    /// Sup-norm embedding: max |h| ≤ c1 · ‖h‖_β over the sampling law.
    pub c1: f64,
    /// Exp growth envelope: ‖exp(h)‖_β ≤ c2 (1 + ‖h‖_β) exp(c3 ‖h‖_β).
    pub c2: f64,
    pub c3: f64,
    /// Multiplication: ‖h·g‖_β ≤ m_norm · ‖h‖_β ‖g‖_β.
    pub m_norm: f64,
    /// Integral operator β′ → β: ‖Ih‖_β ≤ i_norm · ‖h‖_{β′}.
    pub i_norm: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Runs the calibration sweep.
pub fn estimate_constants(grid: SurfaceGrid, n_samples: usize, seed: u64) -> Result<GridConstants> {
    if n_samples < 16 {
        return Err(Error::Usage("calibration needs at least 16 samples".into()));
    }
    let sampler = SurfaceSampler::new(grid);
    let mut rng = RngStream::new(seed, 0, StreamLabel::Wiener).rng();

    let mut c1 = 0.0f64;
    let mut m_norm = 0.0f64;
    let mut i_norm = 0.0f64;
    let mut growth: Vec<(f64, f64)> = Vec::with_capacity(n_samples);

    for s in 0..n_samples {
        let amplitude = [0.25, 0.5, 1.0, 2.0][s % 4];
        let h = sampler.smooth(&mut rng, amplitude);
        let g2 = sampler.smooth(&mut rng, amplitude);
        let nh = hb_norm(&h, grid.beta)?.total;
        let ng = hb_norm(&g2, grid.beta)?.total;
        if nh > 1e-12 {
            c1 = c1.max(h.max_abs() / nh);
            let nh_prime = hb_norm(&h, grid.beta_prime)?.total;
            i_norm = i_norm.max(hb_norm(&h.integral_op(), grid.beta)?.total / nh_prime);
        }
        if nh > 1e-12 && ng > 1e-12 {
            let prod = h.multiply(&g2)?;
            m_norm = m_norm.max(hb_norm(&prod, grid.beta)?.total / (nh * ng));
        }
        // exp growth sweep over a range of norms
        let target = 0.1 + 2.9 * (s as f64 / n_samples as f64);
        if nh > 1e-12 {
            let scaled = h.scale(target / nh);
            let ns = hb_norm(&scaled, grid.beta)?.total;
            let ne = hb_norm(&scaled.exp_surface()?, grid.beta)?.total;
            growth.push((ns, ne / (1.0 + ns)));
        }
    }

    // Least-squares slope of ln y against ‖h‖ gives c3; c2 is the
    // envelope over the sweep with a margin for fresh samples.
    let n = growth.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in &growth {
        let ly = y.ln();
        sx += x;
        sy += ly;
        sxx += x * x;
        sxy += x * ly;
    }
    let c3 = ((n * sxy - sx * sy) / (n * sxx - sx * sx)).max(0.0);
    let mut c2 = 0.0f64;
    for (x, y) in &growth {
        c2 = c2.max(y / (c3 * x).exp());
    }
    Ok(GridConstants {
        grid,
        c1: 1.1 * c1,
        c2: 1.25 * c2,
        c3,
        m_norm: 1.1 * m_norm,
        i_norm: 1.1 * i_norm,
        n_samples,
        seed,
    })
}

/// Stable short identifier of a grid, for cache file names.
pub fn grid_fingerprint(grid: &SurfaceGrid) -> String {
    let canon = format!(
        "xi_max={};n_xi={};n_eta={};beta={};beta_prime={}",
        format_float(grid.xi_max),
        grid.n_xi,
        grid.n_eta,
        format_float(grid.beta),
        format_float(grid.beta_prime)
    );
    format!("{:016x}", fnv1a64(canon.as_bytes()))
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn cache_path(dir: &Path, grid: &SurfaceGrid) -> PathBuf {
    dir.join(format!("constants-{}.json", grid_fingerprint(grid)))
}

pub fn load_cached(dir: &Path, grid: &SurfaceGrid) -> Option<GridConstants> {
    let text = std::fs::read_to_string(cache_path(dir, grid)).ok()?;
    let c: GridConstants = serde_json::from_str(&text).ok()?;
    (c.grid == *grid).then_some(c)
}

pub fn store_cached(dir: &Path, constants: &GridConstants) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = cache_path(dir, &constants.grid);
    std::fs::write(&path, serde_json::to_string_pretty(constants).map_err(|e| {
        Error::Io(std::io::Error::other(e))
    })?)?;
    Ok(path)
}
