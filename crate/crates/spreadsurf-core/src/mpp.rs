//! Random drivers: truncated Q-Wiener increments, the homogeneous market
//! jump measure, and the loss point process simulated by thinning against
//! a dominating rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::coefficients::{loss_intensity, FactorVolatility, LossState, MarketJumpSpec};
use crate::error::{Error, Result};
use crate::function_space::HbSurface;

/// Slack on the thinning bound check, to forgive float dust only.
const BOUND_SLACK: f64 = 1.0 + 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamLabel {
    Wiener,
    MarketJumps,
    LossJumps,
}

impl StreamLabel {
    fn salt(self) -> u64 {
        match self {
            StreamLabel::Wiener => 0x57ce_9a1e_0b5d_11d3,
            StreamLabel::MarketJumps => 0x9e11_77af_21d4_66c5,
            StreamLabel::LossJumps => 0x1fb3_0c44_dd02_9b71,
        }
    }
}

/// A reproducible, independently keyed random stream.
///
/// Identical (seed, path, label) triples replay the same draw sequence;
/// distinct labels give independent streams, so consuming one stream
/// never perturbs another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub path_index: u64,
    pub label: StreamLabel,
}

impl RngStream {
    pub fn new(seed: u64, path_index: u64, label: StreamLabel) -> Self {
        Self { seed, path_index, label }
    }

    /// Materializes the stream as a ChaCha generator with a key derived
    /// by a splitmix chain over (seed, path, label).
    pub fn rng(&self) -> ChaCha12Rng {
        let mut state = splitmix(self.seed ^ self.label.salt());
        state = splitmix(state ^ splitmix(self.path_index.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        let mut key = [0u8; 32];
        for chunk in key.chunks_mut(8) {
            state = splitmix(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha12Rng::from_seed(key)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpKind {
    Market,
    Loss,
}

/// One jump of either driving measure: a market mark x ∈ G or a loss
/// size in [0, 1 − L_{t-}].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub kind: JumpKind,
    pub mark: f64,
}

/// J independent N(0, dt) draws, one per truncated Wiener factor. The
/// eigenvalue weights √λ_j live inside the factor surfaces, so these are
/// plain Brownian increments. `dt = 0` returns zeros without consuming
/// the stream.
pub fn wiener_increments(vol: &FactorVolatility, dt: f64, rng: &mut ChaCha12Rng) -> Vec<f64> {
    let j = vol.n_factors();
    if dt == 0.0 {
        return vec![0.0; j];
    }
    let sd = dt.sqrt();
    (0..j).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Event times of the homogeneous market jump measure on (0, horizon]:
/// exponential inter-arrivals at the total mass Σ w_x, marks drawn with
/// probability w_x / Σ w.
pub fn market_jump_times(
    mjump: &MarketJumpSpec,
    horizon: f64,
    rng: &mut ChaCha12Rng,
) -> Vec<JumpEvent> {
    let total = mjump.total_mass();
    if total <= 0.0 || mjump.marks.is_empty() {
        return Vec::new();
    }
    let mut events = Vec::new();
    let mut t = 0.0;
    loop {
        t += exp_draw(total, rng);
        if t > horizon {
            return events;
        }
        let mut pick = rng.random::<f64>() * total;
        let mut mark = mjump.marks[mjump.marks.len() - 1].mark;
        for mp in &mjump.marks {
            if pick < mp.weight {
                mark = mp.mark;
                break;
            }
            pick -= mp.weight;
        }
        events.push(JumpEvent { time: t, kind: JumpKind::Market, mark });
    }
}

/// First loss jump on (t0, t0 + horizon] by thinning: propose at
/// `rate_bound`, accept with probability total_rate / rate_bound, draw
/// the size from the prevailing density. The provider supplies the
/// surface and loss state at each proposal time. A proposal that
/// observes total_rate above the bound invalidates the run.
pub fn next_loss_jump(
    mut provider: impl FnMut(f64) -> Result<(HbSurface, LossState)>,
    rate_bound: f64,
    t0: f64,
    horizon: f64,
    rng: &mut ChaCha12Rng,
) -> Result<Option<JumpEvent>> {
    if !(rate_bound > 0.0) {
        return Ok(None);
    }
    let end = t0 + horizon;
    let mut t = t0;
    loop {
        t += exp_draw(rate_bound, rng);
        if t > end {
            return Ok(None);
        }
        let (h, loss) = provider(t)?;
        let intensity = loss_intensity(&h, &loss)?;
        check_bound(intensity.total_rate, rate_bound, t)?;
        if rng.random::<f64>() * rate_bound < intensity.total_rate {
            let size = intensity.sample_size(rng.random::<f64>()).min(1.0 - loss.level);
            if size > 0.0 {
                return Ok(Some(JumpEvent { time: t, kind: JumpKind::Loss, mark: size }));
            }
        }
    }
}

/// All loss jumps in (t0, t1] against a surface frozen at the window's
/// left endpoint. The intensity is refreshed from the same surface after
/// each accepted jump because the loss level moved.
pub(crate) fn loss_events_in_window(
    frozen: &HbSurface,
    loss: &LossState,
    rate_bound: f64,
    t0: f64,
    t1: f64,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<JumpEvent>> {
    let mut events = Vec::new();
    let mut state = *loss;
    let mut intensity = loss_intensity(frozen, &state)?;
    check_bound(intensity.total_rate, rate_bound, t0)?;
    if !(rate_bound > 0.0) {
        // Bound zero and intensity verified zero: nothing can jump.
        return Ok(events);
    }
    let mut t = t0;
    loop {
        t += exp_draw(rate_bound, rng);
        if t > t1 {
            return Ok(events);
        }
        if rng.random::<f64>() * rate_bound < intensity.total_rate {
            let size = intensity.sample_size(rng.random::<f64>()).min(1.0 - state.level);
            if size > 0.0 {
                events.push(JumpEvent { time: t, kind: JumpKind::Loss, mark: size });
                state = LossState { level_pre: state.level, level: state.level + size };
                intensity = loss_intensity(frozen, &state)?;
                check_bound(intensity.total_rate, rate_bound, t)?;
            }
        }
    }
}

fn check_bound(total_rate: f64, rate_bound: f64, t: f64) -> Result<()> {
    if total_rate > rate_bound * BOUND_SLACK {
        return Err(Error::Numerical(format!(
            "thinning bound breached at t={t:.6}: observed loss intensity {total_rate:.6} > rate_bound {rate_bound:.6}; raise rate_bound and rerun"
        )));
    }
    Ok(())
}

#[inline]
fn exp_draw(rate: f64, rng: &mut ChaCha12Rng) -> f64 {
    // Inverse CDF; 1 - u keeps the draw strictly positive.
    -(1.0 - rng.random::<f64>()).ln() / rate
}
