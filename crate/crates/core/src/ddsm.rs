//! Digital delta-sigma modulator used as an edge-selection sequencer.
//!
//! Error-feedback structure with noise transfer function `(1 - z⁻¹)ᴾ`:
//!
//! ```text
//! v[n] = x + d[n]·lsb - Σₖ₌₁..ₚ (-1)ᵏ·C(P,k)·ε[n-k]
//! r[n] = Q(v[n])            nearest of M levels spaced by a, ties upward
//! ε[n] = r[n] - v[n]
//! ```
//!
//! so `r = x + d·lsb + (1 - z⁻¹)ᴾ ε`. Driven with the constant `-τᵢ/Δ`, the
//! output averages to the required edge correction while its fluctuation is
//! pushed away from DC. The quantizer never overloads (and `|ε| ≤ a/2`) as long
//! as `|x| ≤ (M + 1 - 2ᴾ)·a/2`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::timing::{ChannelTiming, EdgeSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdsmSpec {
    /// Loop order `P`.
    pub order: u32,
    /// Output level count `M`.
    pub levels: u32,
    /// Quantizer step `a`.
    pub step: f64,
    /// Input word length `K`; inputs are rounded to `(a/2)·2⁻ᴷ`.
    pub input_bits: u32,
    /// Adds a Bernoulli(1/2) LSB to every input sample.
    pub dither: bool,
}

impl Default for DdsmSpec {
    fn default() -> Self {
        Self {
            order: 2,
            levels: 4,
            step: 2.0,
            input_bits: 16,
            dither: true,
        }
    }
}

impl DdsmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 || self.order > 8 {
            return Err(Error::InvalidModulator(format!(
                "order must be in 1..=8, got {}",
                self.order
            )));
        }
        if self.levels < 2 {
            return Err(Error::InvalidModulator(format!(
                "need at least 2 output levels, got {}",
                self.levels
            )));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidModulator(format!(
                "step must be finite and > 0, got {}",
                self.step
            )));
        }
        if !(1..=48).contains(&self.input_bits) {
            return Err(Error::InvalidModulator(format!(
                "input width must be in 1..=48 bits, got {}",
                self.input_bits
            )));
        }
        if self.headroom() <= 0 {
            return Err(Error::InvalidModulator(format!(
                "M + 1 - 2^P = {} leaves no input range without overload",
                self.headroom()
            )));
        }
        Ok(())
    }

    fn headroom(&self) -> i64 {
        self.levels as i64 + 1 - (1i64 << self.order)
    }

    /// `{-(M-1), -(M-3), …, M-1}·a/2`
    pub fn output_levels(&self) -> Vec<f64> {
        (0..self.levels).map(|j| self.level(j as i64)).collect()
    }

    pub fn edge_set(&self) -> EdgeSet {
        EdgeSet::new(self.output_levels())
    }

    fn level(&self, j: i64) -> f64 {
        (2 * j - (self.levels as i64 - 1)) as f64 * self.step / 2.0
    }

    /// `(M + 1 - 2ᴾ)·a/2`
    pub fn no_overload_bound(&self) -> f64 {
        self.headroom() as f64 * self.step / 2.0
    }

    /// Weight of one input LSB.
    pub fn lsb(&self) -> f64 {
        self.step / 2.0 / (1u64 << self.input_bits) as f64
    }

    /// Input bound with room left for the dither LSB.
    pub fn admissible_bound(&self) -> f64 {
        if self.dither {
            self.no_overload_bound() - self.lsb()
        } else {
            self.no_overload_bound()
        }
    }

    pub fn check_no_overload(&self, input: f64) -> bool {
        input.abs() <= self.no_overload_bound()
    }

    /// Round-to-nearest onto the input grid.
    pub fn quantize_input(&self, input: f64) -> f64 {
        (input / self.lsb()).round() * self.lsb()
    }

    /// Nearest output level; exact midpoints go to the higher level.
    pub fn quantize(&self, v: f64) -> f64 {
        let m = self.levels as i64;
        let j = ((v / (self.step / 2.0) + (m - 1) as f64) / 2.0 + 0.5).floor() as i64;
        self.level(j.clamp(0, m - 1))
    }

    /// Noise power gain of `(1 - z⁻¹)ᴾ` on white input, `C(2P, P)`.
    pub fn shaping_gain(&self) -> f64 {
        binomial(2 * self.order, self.order) as f64
    }

    /// `E[r²] = (a²/12)·C(2P, P) + α²` for a constant input `-α`.
    pub fn predicted_second_moment(&self, alpha: f64) -> Result<f64> {
        self.validate()?;
        if !self.check_no_overload(alpha) {
            return Err(Error::Overload {
                channel: None,
                input: -alpha,
                bound: self.no_overload_bound(),
            });
        }
        Ok(self.step * self.step / 12.0 * self.shaping_gain() + alpha * alpha)
    }

    /// Feedback taps `(-1)ᵏ·C(P,k)` for `k = 1..=P`.
    fn taps(&self) -> Vec<f64> {
        (1..=self.order)
            .map(|k| {
                let c = binomial(self.order, k) as f64;
                if k % 2 == 0 {
                    c
                } else {
                    -c
                }
            })
            .collect()
    }
}

fn binomial(n: u32, k: u32) -> u64 {
    (0..k as u64).fold(1, |acc, i| acc * (n as u64 - i) / (i + 1))
}

pub fn predicted_second_moment(channel: &ChannelTiming, spec: &DdsmSpec) -> Result<f64> {
    spec.predicted_second_moment(channel.alpha())
        .map_err(|e| with_channel(e, channel.index()))
}

/// Past quantization errors, most recent first.
#[derive(Debug, Clone, PartialEq)]
pub struct DdsmState {
    errors: Vec<f64>,
    taps: Vec<f64>,
}

impl DdsmState {
    pub fn new(spec: &DdsmSpec) -> Self {
        Self {
            errors: vec![0.0; spec.order as usize],
            taps: spec.taps(),
        }
    }

    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    pub fn max_abs_error(&self) -> f64 {
        self.errors.iter().fold(0.0, |m, e| m.max(e.abs()))
    }
}

/// One modulator clock. Overload is not detected here; it is ruled out when a
/// channel is configured.
pub fn ddsm_step(state: &mut DdsmState, input: f64, spec: &DdsmSpec, dither_bit: bool) -> f64 {
    let mut v = spec.quantize_input(input);
    if dither_bit {
        v += spec.lsb();
    }
    v -= state
        .taps
        .iter()
        .zip(&state.errors)
        .map(|(c, e)| c * e)
        .sum::<f64>();
    let r = spec.quantize(v);
    state.errors.rotate_right(1);
    state.errors[0] = v - r;
    r
}

/// Bernoulli(1/2) bit source on a ChaCha substream.
#[derive(Debug, Clone)]
pub struct LsbDither {
    rng: ChaCha8Rng,
    word: u64,
    remaining: u32,
}

impl LsbDither {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            rng,
            word: 0,
            remaining: 0,
        }
    }

    pub fn next_bit(&mut self) -> bool {
        if self.remaining == 0 {
            self.word = self.rng.next_u64();
            self.remaining = 64;
        }
        let bit = self.word & 1 == 1;
        self.word >>= 1;
        self.remaining -= 1;
        bit
    }
}

/// A modulator with a fixed input, producing one edge per call.
#[derive(Debug, Clone)]
pub struct Ddsm {
    spec: DdsmSpec,
    state: DdsmState,
    input: f64,
    dither: Option<LsbDither>,
}

impl Ddsm {
    pub fn new(spec: DdsmSpec, input: f64, seed: u64, stream_id: u64) -> Result<Self> {
        spec.validate()?;
        let bound = spec.admissible_bound();
        if !(input.abs() <= bound) {
            return Err(Error::Overload {
                channel: None,
                input,
                bound,
            });
        }
        Ok(Self {
            state: DdsmState::new(&spec),
            dither: spec.dither.then(|| LsbDither::new(seed, stream_id)),
            input,
            spec,
        })
    }

    /// Modulator for one channel, driven with `-α`.
    pub fn for_channel(
        channel: &ChannelTiming,
        spec: DdsmSpec,
        seed: u64,
        stream_id: u64,
    ) -> Result<Self> {
        Self::new(spec, -channel.alpha(), seed, stream_id)
            .map_err(|e| with_channel(e, channel.index()))
    }

    pub fn spec(&self) -> &DdsmSpec {
        &self.spec
    }

    pub fn state(&self) -> &DdsmState {
        &self.state
    }

    pub fn next_level(&mut self) -> f64 {
        let bit = self.dither.as_mut().is_some_and(LsbDither::next_bit);
        ddsm_step(&mut self.state, self.input, &self.spec, bit)
    }
}

impl Iterator for Ddsm {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_level())
    }
}

pub fn generate_shaping_sequence(
    channel: &ChannelTiming,
    spec: &DdsmSpec,
    len: usize,
    seed: u64,
    stream_id: u64,
) -> Result<Vec<f64>> {
    Ok(Ddsm::for_channel(channel, *spec, seed, stream_id)?
        .take(len)
        .collect())
}

fn with_channel(e: Error, index: usize) -> Error {
    match e {
        Error::Overload { input, bound, .. } => Error::Overload {
            channel: Some(index),
            input,
            bound,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(order: u32, levels: u32, dither: bool) -> DdsmSpec {
        DdsmSpec {
            order,
            levels,
            step: 2.0,
            input_bits: 16,
            dither,
        }
    }

    #[test]
    fn alphabet_and_bounds() {
        let s = spec(2, 4, true);
        assert_eq!(s.output_levels(), vec![-3.0, -1.0, 1.0, 3.0]);
        assert_eq!(s.no_overload_bound(), 1.0);
        assert!(s.check_no_overload(0.99));
        assert!(!s.check_no_overload(1.01));
        assert!(spec(1, 2, false).check_no_overload(0.5));
        assert_eq!(spec(1, 2, false).no_overload_bound(), 1.0);
        assert!(spec(2, 3, false).validate().is_err());
        assert_eq!(s.shaping_gain(), 6.0);
        assert_eq!(spec(1, 2, false).shaping_gain(), 2.0);
        assert_eq!(spec(3, 8, false).shaping_gain(), 20.0);
    }

    #[test]
    fn quantizer_ties_go_up() {
        let s = spec(2, 4, false);
        assert_eq!(s.quantize(0.0), 1.0);
        assert_eq!(s.quantize(-2.0), -1.0);
        assert_eq!(s.quantize(2.0), 3.0);
        assert_eq!(s.quantize(-0.01), -1.0);
        assert_eq!(s.quantize(9.0), 3.0);
        assert_eq!(s.quantize(-9.0), -3.0);
    }

    #[test]
    fn zero_input_starts_at_upper_level() {
        let s = spec(2, 4, false);
        let mut state = DdsmState::new(&s);
        assert_eq!(ddsm_step(&mut state, 0.0, &s, false), 1.0);
        let n = 4096;
        let sum: f64 = (0..n - 1)
            .map(|_| ddsm_step(&mut state, 0.0, &s, false))
            .sum::<f64>()
            + 1.0;
        assert!((sum / n as f64).abs() < 1e-2);
    }

    #[test]
    fn representable_input_is_a_fixed_point() {
        let s = spec(2, 4, false);
        let mut state = DdsmState::new(&s);
        for _ in 0..1000 {
            assert_eq!(ddsm_step(&mut state, 1.0, &s, false), 1.0);
        }
        assert_eq!(state.errors(), &[0.0, 0.0]);
    }

    #[test]
    fn input_is_rounded_to_k_bits() {
        let s = spec(2, 4, false);
        assert_eq!(s.lsb(), 1.0 / 65536.0);
        assert_eq!(s.quantize_input(0.3), (0.3f64 * 65536.0).round() / 65536.0);
    }

    #[test]
    fn long_run_mean_tracks_input() {
        let s = spec(2, 4, true);
        let mut m = Ddsm::new(s, -0.3, 5, 0).unwrap();
        let n = 1 << 20;
        let mean = (0..n).map(|_| m.next_level()).sum::<f64>() / n as f64;
        assert!((mean + 0.3).abs() < 1e-2, "mean {mean}");
    }

    #[test]
    fn sequences_are_deterministic_and_checked() {
        let ch = ChannelTiming::new(1, 0.15, 0.5).unwrap();
        let s = DdsmSpec::default();
        let a = generate_shaping_sequence(&ch, &s, 10_000, 9, 1).unwrap();
        let b = generate_shaping_sequence(&ch, &s, 10_000, 9, 1).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| s.output_levels().contains(r)));
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        assert!((mean + 0.3).abs() < 1e-2);

        // Past the bound once the dither LSB is accounted for.
        let tight = ChannelTiming::new(0, 0.999_99, 1.0).unwrap();
        let err = generate_shaping_sequence(&tight, &s, 10, 0, 0).unwrap_err();
        assert!(matches!(
            err,
            Error::Overload {
                channel: Some(0),
                ..
            }
        ));
        let wide = DdsmSpec {
            order: 2,
            levels: 8,
            ..s
        };
        assert!(generate_shaping_sequence(&tight, &wide, 10, 0, 0).is_ok());
    }

    #[test]
    fn second_moment_prediction() {
        let s = DdsmSpec {
            dither: false,
            ..DdsmSpec::default()
        };
        assert!((s.predicted_second_moment(0.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((s.predicted_second_moment(0.3).unwrap() - 2.09).abs() < 1e-15);
        let fine = DdsmSpec {
            step: 1e-6,
            levels: 1 << 22,
            ..s
        };
        assert!((fine.predicted_second_moment(0.3).unwrap() - 0.09).abs() < 1e-12);
        assert!(s.predicted_second_moment(1.2).is_err());
    }

    #[test]
    fn error_registers_stay_bounded() {
        let s = DdsmSpec::default();
        let mut m = Ddsm::new(s, 0.77, 3, 2).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..1 << 20 {
            m.next_level();
            worst = worst.max(m.state().max_abs_error());
        }
        assert!(worst <= s.step / 2.0 + 1e-12, "worst {worst}");
    }

    #[test]
    fn dither_bits_are_balanced() {
        let mut d = LsbDither::new(1, 0);
        let n = 1 << 20;
        let ones = (0..n).filter(|_| d.next_bit()).count() as f64;
        assert!((ones / n as f64 - 0.5).abs() < 5.0 * (0.25 / n as f64).sqrt());
    }
}
