//! Sampling-instant model for an `L`-way interleaved converter.
//!
//! Channel `i` owns global output indices `m ≡ i (mod L)`; its `n`-th sample
//! is nominally taken at `(n·L + i)·Ts`. A static skew `τᵢ` moves every
//! instant, and a conditioner may additionally move it by `r·Δ`.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterleaveClock {
    channels: usize,
    period: f64,
}

impl InterleaveClock {
    pub fn new(channels: usize, period: f64) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidTiming("channel count must be >= 1".into()));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidTiming(format!(
                "sampling period must be finite and > 0, got {period}"
            )));
        }
        Ok(Self { channels, period })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Aggregate sampling period `Ts`.
    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.period
    }

    /// Nominal instant of sample `n` of channel `i`.
    pub fn ideal_instant(&self, channel: usize, n: u64) -> Result<f64> {
        if channel >= self.channels {
            return Err(Error::IndexOutOfRange {
                index: channel,
                channels: self.channels,
            });
        }
        Ok(self.global_index(channel, n) as f64 * self.period)
    }

    fn global_index(&self, channel: usize, n: u64) -> u64 {
        n * self.channels as u64 + channel as u64
    }
}

/// Allowed edge offsets, in units of `Δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSet(Vec<f64>);

impl EdgeSet {
    pub fn new(mut offsets: Vec<f64>) -> Self {
        offsets.sort_by(f64::total_cmp);
        offsets.dedup();
        Self(offsets)
    }

    /// Only the nominal edge.
    pub fn nominal() -> Self {
        Self(vec![0.0])
    }

    /// `{-1, 0, 1}`
    pub fn ternary() -> Self {
        Self(vec![-1.0, 0.0, 1.0])
    }

    pub fn contains(&self, r: f64) -> bool {
        self.0.contains(&r)
    }

    pub fn offsets(&self) -> &[f64] {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, e| m.max(e.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelTiming {
    index: usize,
    tau: f64,
    delta: f64,
    alpha: f64,
}

impl ChannelTiming {
    /// `|τ| < Δ` is enforced; the conditioners cannot reach larger skews.
    pub fn new(index: usize, tau: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidTiming(format!(
                "edge step delta must be finite and > 0, got {delta}"
            )));
        }
        if !tau.is_finite() {
            return Err(Error::InvalidTiming(format!(
                "channel {index}: skew is not finite"
            )));
        }
        let alpha = tau / delta;
        if alpha.abs() >= 1.0 {
            return Err(Error::InvalidTiming(format!(
                "channel {index}: |tau/delta| = {} must be < 1",
                alpha.abs()
            )));
        }
        Ok(Self {
            index,
            tau,
            delta,
            alpha,
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Normalized skew `τ/Δ`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `t_ideal + τ + r·Δ`
    pub fn actual_instant(
        &self,
        clock: &InterleaveClock,
        n: u64,
        r: f64,
        edges: &EdgeSet,
    ) -> Result<f64> {
        if !edges.contains(r) {
            return Err(Error::InvalidEdge(r));
        }
        Ok(self.offset_instant(clock.ideal_instant(self.index, n)?, r))
    }

    /// Skewed and shifted instant around a precomputed ideal instant.
    pub(crate) fn offset_instant(&self, ideal: f64, r: f64) -> f64 {
        ideal + self.timing_error(r)
    }

    /// Total deviation from the ideal instant, `τ + r·Δ`.
    pub fn timing_error(&self, r: f64) -> f64 {
        self.tau + r * self.delta
    }
}

/// Builds per-channel timings from a skew list sharing one `Δ`.
pub fn channel_timings(skews: &[f64], delta: f64) -> Result<Vec<ChannelTiming>> {
    skews
        .iter()
        .enumerate()
        .map(|(i, &tau)| ChannelTiming::new(i, tau, delta))
        .collect()
}
