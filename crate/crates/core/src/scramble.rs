//! Edge scrambling.
//!
//! Each sample picks the edge `r ∈ {-1, 0, 1}` independently with
//! probabilities `(p₋₁, p₀, p₁)` that satisfy three moment conditions for the
//! normalized skew `α = τ/Δ`:
//!
//! ```text
//! [ 1        1     1       ] [p₋₁]   [ 1  ]
//! [ 1-α     -α    -(1+α)   ] [p₀ ] = [ 0  ]
//! [ (1-α)²   α²   (1+α)²   ] [p₁ ]   [ g² ]
//! ```
//!
//! The first row normalizes, the second forces `E[r + α] = 0` and the third
//! fixes `E[(r + α)²] = g²`, the same value on every channel. The residual
//! timing error therefore has no channel-periodic component up to second
//! order and turns into a white floor instead of image spurs.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::timing::ChannelTiming;
use crate::{Error, Result};

/// Closed form and the generic solve may disagree by at most this much.
const SELF_CHECK_TOLERANCE: f64 = 1e-10;
/// Rounding slack when testing a probability against `[0, 1]`.
const FEASIBILITY_SLACK: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScrambleProbabilities {
    p_minus1: f64,
    p_zero: f64,
    p_plus1: f64,
    g_squared: f64,
    alpha: f64,
}

impl ScrambleProbabilities {
    pub fn p_minus1(&self) -> f64 {
        self.p_minus1
    }

    pub fn p_zero(&self) -> f64 {
        self.p_zero
    }

    pub fn p_plus1(&self) -> f64 {
        self.p_plus1
    }

    pub fn g_squared(&self) -> f64 {
        self.g_squared
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Exact `E[r]`.
    pub fn mean(&self) -> f64 {
        self.p_plus1 - self.p_minus1
    }

    /// Exact `E[r²]`.
    pub fn second_moment(&self) -> f64 {
        self.p_plus1 + self.p_minus1
    }

    /// Exact `E[(r + α)²]`.
    pub fn conditioned_second_moment(&self) -> f64 {
        let a = self.alpha;
        self.p_minus1 * (a - 1.0).powi(2) + self.p_zero * a * a + self.p_plus1 * (a + 1.0).powi(2)
    }

    /// Maps a uniform draw to an edge using the half-open regions
    /// `[0, p₋₁)`, `[p₋₁, p₋₁+p₀)` and `[p₋₁+p₀, 1)`.
    pub fn select(&self, u: f64) -> i8 {
        if u < self.p_minus1 {
            -1
        } else if u < self.p_minus1 + self.p_zero {
            0
        } else {
            1
        }
    }
}

/// Solves the moment system for one channel.
pub fn solve_probabilities(alpha: f64, g_squared: f64) -> Result<ScrambleProbabilities> {
    if !(alpha.abs() < 1.0) {
        return Err(Error::InvalidTiming(format!(
            "|alpha| = {} must be < 1",
            alpha.abs()
        )));
    }
    let infeasible = || {
        let (g_min, g_max) = feasible_g_range(alpha);
        Error::InfeasibleProbabilities {
            channel: None,
            alpha,
            g_squared,
            g_min,
            g_max,
        }
    };
    if !(g_squared > 0.0 && g_squared.is_finite()) {
        return Err(infeasible());
    }

    let s = g_squared + alpha * alpha;
    let closed = [(s + alpha) / 2.0, 1.0 - s, (s - alpha) / 2.0];

    let a = alpha;
    let matrix = [
        [1.0, 1.0, 1.0],
        [1.0 - a, -a, -(1.0 + a)],
        [(1.0 - a).powi(2), a * a, (1.0 + a).powi(2)],
    ];
    let generic = solve3(matrix, [1.0, 0.0, g_squared])
        .ok_or_else(|| Error::Internal(format!("singular moment system at alpha={alpha}")))?;
    for (c, g) in closed.iter().zip(&generic) {
        if (c - g).abs() > SELF_CHECK_TOLERANCE {
            return Err(Error::Internal(format!(
                "closed-form probabilities {closed:?} disagree with linear solve {generic:?}"
            )));
        }
    }

    if closed
        .iter()
        .any(|&p| !(-FEASIBILITY_SLACK..=1.0 + FEASIBILITY_SLACK).contains(&p))
    {
        return Err(infeasible());
    }
    let [p_minus1, p_zero, p_plus1] = closed.map(|p| p.clamp(0.0, 1.0));
    Ok(ScrambleProbabilities {
        p_minus1,
        p_zero,
        p_plus1,
        g_squared,
        alpha,
    })
}

/// Range of `g²` for which all three probabilities stay inside `[0, 1]`.
pub fn feasible_g_range(alpha: f64) -> (f64, f64) {
    let a2 = alpha * alpha;
    ((alpha.abs() - a2).max(0.0), 1.0 - a2)
}

/// Smallest `g²` feasible for every channel, with 5% headroom.
pub fn default_g_squared(alphas: impl IntoIterator<Item = f64>) -> f64 {
    let worst = alphas
        .into_iter()
        .map(|a| feasible_g_range(a).0)
        .fold(0.0, f64::max);
    (1.05 * worst).max(1e-9)
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            let pivot_row = m[col];
            for (v, p) in m[row].iter_mut().zip(pivot_row).skip(col) {
                *v -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / m[row][row];
    }
    Some(x)
}

/// K-bit uniform dither on a ChaCha substream.
#[derive(Debug, Clone)]
pub struct DitherSource {
    bits: u32,
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl DitherSource {
    pub const DEFAULT_BITS: u32 = 24;

    /// `bits` must lie in `8..=53` so every draw is exact in an `f64`.
    pub fn new(bits: u32, seed: u64, stream_id: u64) -> Result<Self> {
        if !(8..=53).contains(&bits) {
            return Err(Error::Config(format!(
                "dither width must be in 8..=53 bits, got {bits}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Ok(Self {
            bits,
            seed,
            stream_id,
            rng,
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Next raw code in `0..2^K`.
    pub fn next_code(&mut self) -> u64 {
        self.rng.next_u64() >> (64 - self.bits)
    }

    /// Next code mapped to `[0, 1)`.
    pub fn next_unit(&mut self) -> f64 {
        self.next_code() as f64 / (1u64 << self.bits) as f64
    }
}

pub fn draw_edge(probs: &ScrambleProbabilities, dither: &mut DitherSource) -> i8 {
    probs.select(dither.next_unit())
}

/// Streaming scramble conditioner for one channel.
#[derive(Debug, Clone)]
pub struct Scrambler {
    probs: ScrambleProbabilities,
    dither: DitherSource,
}

impl Scrambler {
    pub fn new(channel: &ChannelTiming, g_squared: f64, dither: DitherSource) -> Result<Self> {
        let probs = solve_probabilities(channel.alpha(), g_squared).map_err(|e| match e {
            Error::InfeasibleProbabilities {
                alpha,
                g_squared,
                g_min,
                g_max,
                ..
            } => Error::InfeasibleProbabilities {
                channel: Some(channel.index()),
                alpha,
                g_squared,
                g_min,
                g_max,
            },
            other => other,
        })?;
        Ok(Self { probs, dither })
    }

    pub fn probabilities(&self) -> &ScrambleProbabilities {
        &self.probs
    }

    pub fn next_edge(&mut self) -> i8 {
        draw_edge(&self.probs, &mut self.dither)
    }
}

impl Iterator for Scrambler {
    type Item = i8;

    fn next(&mut self) -> Option<i8> {
        Some(self.next_edge())
    }
}

pub fn generate_scramble_sequence(
    channel: &ChannelTiming,
    g_squared: f64,
    len: usize,
    dither: DitherSource,
) -> Result<Vec<i8>> {
    Ok(Scrambler::new(channel, g_squared, dither)?
        .take(len)
        .collect())
}
