//! Per-channel behavioral quantizers.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubAdcKind {
    /// Memoryless mid-tread quantizer.
    IdealUniform,
    /// Second-order single-loop delta-sigma modulator.
    DeltaSigma2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubAdcSpec {
    pub kind: SubAdcKind,
    pub levels: u32,
    pub full_scale: f64,
}

impl Default for SubAdcSpec {
    fn default() -> Self {
        Self {
            kind: SubAdcKind::DeltaSigma2,
            levels: 8,
            full_scale: 1.0,
        }
    }
}

impl SubAdcSpec {
    /// Uniform quantizer fine enough that timing effects dominate.
    pub fn idealized() -> Self {
        Self {
            kind: SubAdcKind::IdealUniform,
            levels: 1 << 16,
            full_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::Config(format!(
                "sub-ADC needs at least 2 levels, got {}",
                self.levels
            )));
        }
        if !(self.full_scale > 0.0 && self.full_scale.is_finite()) {
            return Err(Error::Config(format!(
                "sub-ADC full scale must be finite and > 0, got {}",
                self.full_scale
            )));
        }
        Ok(())
    }

    /// Quantizer step.
    pub fn lsb(&self) -> f64 {
        match self.kind {
            SubAdcKind::IdealUniform => 2.0 * self.full_scale / self.levels as f64,
            SubAdcKind::DeltaSigma2 => 2.0 * self.full_scale / (self.levels - 1) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conversion {
    pub codes: Vec<f64>,
    /// Samples where the quantizer input left its range.
    pub saturated: usize,
}

/// Converts one channel's sample stream, starting from a reset state.
pub fn quantize_stream(samples: &[f64], spec: &SubAdcSpec) -> Conversion {
    match spec.kind {
        SubAdcKind::IdealUniform => uniform(samples, spec),
        SubAdcKind::DeltaSigma2 => delta_sigma2(samples, spec),
    }
}

/// Codes `k·lsb` for `k ∈ [-levels/2, levels - 1 - levels/2]`, zero included.
fn uniform(samples: &[f64], spec: &SubAdcSpec) -> Conversion {
    let lsb = spec.lsb();
    let lo = -((spec.levels / 2) as f64);
    let hi = (spec.levels - 1) as f64 + lo;
    let mut saturated = 0;
    let codes = samples
        .iter()
        .map(|&x| {
            let k = (x / lsb).round();
            if k < lo || k > hi {
                saturated += 1;
            }
            k.clamp(lo, hi) * lsb
        })
        .collect();
    Conversion { codes, saturated }
}

/// CIFB loop with unity integrator gains:
///
/// ```text
/// y[n]    = Q(s₂[n])
/// s₁[n+1] = s₁[n] + x[n] - y[n]
/// s₂[n+1] = s₂[n] + s₁[n+1] - y[n]
/// ```
///
/// giving `Y = z⁻¹·X + (1 - z⁻¹)²·E`. `Q` is a symmetric mid-rise quantizer
/// with `levels` outputs spanning `±full_scale`.
fn delta_sigma2(samples: &[f64], spec: &SubAdcSpec) -> Conversion {
    let lsb = spec.lsb();
    let top = spec.full_scale;
    let m = spec.levels as i64;
    let mut s1 = 0.0_f64;
    let mut s2 = 0.0_f64;
    let mut saturated = 0;
    let codes = samples
        .iter()
        .map(|&x| {
            if s2.abs() > top + lsb / 2.0 {
                saturated += 1;
            }
            let j = ((s2 + top) / lsb).round() as i64;
            let y = j.clamp(0, m - 1) as f64 * lsb - top;
            s1 += x - y;
            s2 += s1 - y;
            y
        })
        .collect();
    Conversion { codes, saturated }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn uniform_zero_and_clip() {
        let spec = SubAdcSpec {
            kind: SubAdcKind::IdealUniform,
            levels: 8,
            full_scale: 1.0,
        };
        let out = quantize_stream(&[0.0, 0.1, 0.2, 2.0, -2.0], &spec);
        assert_eq!(out.codes, vec![0.0, 0.0, 0.25, 0.75, -1.0]);
        assert_eq!(out.saturated, 2);
    }

    #[test]
    fn uniform_error_is_half_lsb() {
        let spec = SubAdcSpec::idealized();
        let xs: Vec<f64> = (0..10_000).map(|k| (k as f64 * 0.37).sin() * 0.9).collect();
        let out = quantize_stream(&xs, &spec);
        assert_eq!(out.saturated, 0);
        for (x, y) in xs.iter().zip(&out.codes) {
            assert!((x - y).abs() <= spec.lsb() / 2.0 + 1e-15);
        }
    }

    #[test]
    fn delta_sigma_tracks_dc() {
        let spec = SubAdcSpec::default();
        let n = 1 << 18;
        let out = quantize_stream(&vec![0.25; n], &spec);
        let mean = out.codes.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.25).abs() < 1e-3, "mean {mean}");
        assert_eq!(out.saturated, 0);
        let levels: Vec<f64> = (0..8).map(|j| j as f64 * 2.0 / 7.0 - 1.0).collect();
        assert!(out
            .codes
            .iter()
            .all(|c| levels.iter().any(|l| (l - c).abs() < 1e-12)));
    }

    #[test]
    fn delta_sigma_is_stable_on_a_sine() {
        let spec = SubAdcSpec::default();
        let xs: Vec<f64> = (0..1 << 16)
            .map(|k| 0.6 * (2.0 * PI * 0.01 * k as f64).sin())
            .collect();
        let out = quantize_stream(&xs, &spec);
        assert_eq!(out.saturated, 0);
    }
}
