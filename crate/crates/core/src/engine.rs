//! End-to-end interleaved capture.
//!
//! Every channel runs independently: its conditioner picks an edge per sample,
//! the analytic signal is evaluated at the resulting instant, and the channel's
//! own sub-ADC converts the stream. Outputs are then merged round-robin.

use rayon::prelude::*;

use crate::ddsm::{Ddsm, DdsmSpec};
use crate::scramble::{DitherSource, Scrambler};
use crate::signal::TestSignal;
use crate::subadc::{quantize_stream, SubAdcSpec};
use crate::timing::{ChannelTiming, EdgeSet, InterleaveClock};
use crate::{Error, Result};

/// Substream offset separating delta-sigma dither from scramble dither.
const SHAPE_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Conditioning {
    None,
    Scramble { g_squared: f64, dither_bits: u32 },
    Shape(DdsmSpec),
}

impl Conditioning {
    pub fn edge_set(&self) -> EdgeSet {
        match self {
            Conditioning::None => EdgeSet::nominal(),
            Conditioning::Scramble { .. } => EdgeSet::ternary(),
            Conditioning::Shape(spec) => spec.edge_set(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub clock: InterleaveClock,
    pub channels: Vec<ChannelTiming>,
    pub signal: TestSignal,
    pub subadc: SubAdcSpec,
    pub conditioning: Conditioning,
    pub samples: usize,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        let l = self.clock.channels();
        if self.channels.len() != l {
            return Err(Error::Config(format!(
                "{} channel timings given for a {l}-way clock",
                self.channels.len()
            )));
        }
        if let Some((i, _)) = self
            .channels
            .iter()
            .enumerate()
            .find(|(i, ch)| ch.index() != *i)
        {
            return Err(Error::Config(format!(
                "channel timing {i} carries the wrong index"
            )));
        }
        if self.samples == 0 {
            return Err(Error::Config("capture length must be > 0".into()));
        }
        let bandwidth = self.signal.bandwidth();
        let rate = self.clock.sample_rate();
        if !(rate > 2.0 * bandwidth) {
            return Err(Error::Nyquist {
                bandwidth,
                required: 2.0 * bandwidth,
                sample_rate: rate,
            });
        }
        self.subadc.validate()?;
        if let Conditioning::Shape(spec) = &self.conditioning {
            spec.validate()?;
        }
        Ok(())
    }

    /// Samples owned by channel `i`.
    pub fn channel_len(&self, i: usize) -> usize {
        let l = self.clock.channels();
        (self.samples + l - 1 - i) / l
    }

    fn conditioner(&self, channel: &ChannelTiming) -> Result<Conditioner> {
        let i = channel.index() as u64;
        Ok(match self.conditioning {
            Conditioning::None => Conditioner::Nominal,
            Conditioning::Scramble {
                g_squared,
                dither_bits,
            } => Conditioner::Scramble(Scrambler::new(
                channel,
                g_squared,
                DitherSource::new(dither_bits, self.seed, i)?,
            )?),
            Conditioning::Shape(spec) => Conditioner::Shape(Ddsm::for_channel(
                channel,
                spec,
                self.seed,
                SHAPE_STREAM_BASE | i,
            )?),
        })
    }
}

enum Conditioner {
    Nominal,
    Scramble(Scrambler),
    Shape(Ddsm),
}

impl Conditioner {
    fn next_offset(&mut self) -> f64 {
        match self {
            Conditioner::Nominal => 0.0,
            Conditioner::Scramble(s) => f64::from(s.next_edge()),
            Conditioner::Shape(d) => d.next_level(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelCapture {
    pub timing: ChannelTiming,
    /// Edge offsets `r[n]` actually used, in units of `Δ`.
    pub offsets: Vec<f64>,
    /// Analog values at the conditioned instants.
    pub samples: Vec<f64>,
    /// Sub-ADC output.
    pub codes: Vec<f64>,
    pub saturated: usize,
}

impl ChannelCapture {
    /// `τ + r[n]·Δ` for every sample.
    pub fn timing_errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.offsets.iter().map(|&r| self.timing.timing_error(r))
    }

    /// Empirical `(E[e], E[e²])` of the conditioned timing error.
    pub fn error_moments(&self) -> (f64, f64) {
        let n = self.offsets.len().max(1) as f64;
        let (s1, s2) = self
            .timing_errors()
            .fold((0.0, 0.0), |(a, b), e| (a + e, b + e * e));
        (s1 / n, s2 / n)
    }

    /// Empirical `E[r²]`.
    pub fn offset_second_moment(&self) -> f64 {
        let n = self.offsets.len().max(1) as f64;
        self.offsets.iter().map(|r| r * r).sum::<f64>() / n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterleavedCapture {
    /// Merged output, `y[m] = channels[m % L].codes[m / L]`.
    pub output: Vec<f64>,
    pub channels: Vec<ChannelCapture>,
    pub spec: SimulationSpec,
}

impl InterleavedCapture {
    pub fn saturated(&self) -> usize {
        self.channels.iter().map(|c| c.saturated).sum()
    }

    pub fn satisfies_round_robin(&self) -> bool {
        let l = self.channels.len();
        self.output
            .iter()
            .enumerate()
            .all(|(m, &y)| self.channels[m % l].codes.get(m / l) == Some(&y))
    }

    /// Merged analog samples before quantization.
    pub fn analog(&self) -> Vec<f64> {
        merge(
            self.channels.iter().map(|c| c.samples.as_slice()),
            self.output.len(),
        )
    }
}

fn merge<'a>(streams: impl Iterator<Item = &'a [f64]>, len: usize) -> Vec<f64> {
    let streams: Vec<&[f64]> = streams.collect();
    let l = streams.len();
    (0..len).map(|m| streams[m % l][m / l]).collect()
}

pub fn simulate(spec: &SimulationSpec) -> Result<InterleavedCapture> {
    spec.validate()?;
    let edges = spec.conditioning.edge_set();
    let channels = spec
        .channels
        .par_iter()
        .map(|ch| capture_channel(spec, ch, &edges))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let output = merge(channels.iter().map(|c| c.codes.as_slice()), spec.samples);
    Ok(InterleavedCapture {
        output,
        channels,
        spec: spec.clone(),
    })
}

fn capture_channel(
    spec: &SimulationSpec,
    ch: &ChannelTiming,
    edges: &EdgeSet,
) -> Result<ChannelCapture> {
    let len = spec.channel_len(ch.index());
    let mut conditioner = spec.conditioner(ch)?;
    let mut offsets = Vec::with_capacity(len);
    let mut samples = Vec::with_capacity(len);
    for n in 0..len as u64 {
        let r = conditioner.next_offset();
        let t = ch.actual_instant(&spec.clock, n, r, edges)?;
        offsets.push(r);
        samples.push(spec.signal.eval(t));
    }
    let conversion = quantize_stream(&samples, &spec.subadc);
    Ok(ChannelCapture {
        timing: *ch,
        offsets,
        samples,
        codes: conversion.codes,
        saturated: conversion.saturated,
    })
}

/// Partial Taylor sum of `x(t_ideal + offset)` around `t_ideal`.
pub fn taylor_sample(signal: &TestSignal, t_ideal: f64, offset: f64, order: u32) -> Result<f64> {
    if !(1..=3).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    let mut sum = 0.0;
    let mut scale = 1.0;
    for k in 0..=order {
        if k > 0 {
            scale *= offset / k as f64;
        }
        sum += scale * signal.derivative(t_ideal, k)?;
    }
    Ok(sum)
}

/// Elementwise `capture - reference` of the merged outputs.
pub fn error_sequence(capture: &[f64], reference: &[f64]) -> Result<Vec<f64>> {
    if capture.len() != reference.len() {
        return Err(Error::LengthMismatch(capture.len(), reference.len()));
    }
    Ok(capture.iter().zip(reference).map(|(a, b)| a - b).collect())
}
