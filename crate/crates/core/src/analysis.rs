//! Spectral measurement and closed-form error predictions.
//!
//! Bin powers are one-sided and normalized for coherent gain, so a full-scale
//! relative sinusoid of amplitude `A` on an exact bin reads `A²/2` regardless
//! of the window.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Floor used when converting exact zeros to dB.
const MIN_POWER: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
}

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spur {
    pub bin: usize,
    pub power_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub nfft: usize,
    pub window: Window,
    pub segments: usize,
    /// Equivalent noise bandwidth of the window, in bins.
    pub enbw_bins: f64,
    /// Bin centers in cycles/sample.
    pub freqs: Vec<f64>,
    /// Linear bin powers relative to full scale.
    pub power: Vec<f64>,
    /// Strongest non-DC bin.
    pub carrier_bin: usize,
    /// Windowed mean square of the analyzed data, averaged over segments and
    /// rescaled by the window power. Equals the plain mean square for a single
    /// rectangular segment.
    pub analyzed_mean_square: f64,
    pub spurs: Vec<Spur>,
    pub sfdr_db: Option<f64>,
    pub band: Option<RangeInclusive<usize>>,
    /// Mean per-bin power in the band, carrier and spurs excluded.
    pub noise_power: Option<f64>,
}

impl SpectrumReport {
    pub fn psd_db(&self) -> Vec<f64> {
        self.power.iter().map(|&p| to_db(p)).collect()
    }

    pub fn bin_of(&self, freq: f64) -> usize {
        ((freq * self.nfft as f64).round() as usize).min(self.nfft / 2)
    }

    /// Sum of bin powers divided by the window's noise bandwidth.
    pub fn integrated_power(&self) -> f64 {
        self.power.iter().sum::<f64>() / self.enbw_bins
    }

    /// Fills `spurs`, `sfdr_db`, `band` and `noise_power` for a search band.
    pub fn measure(
        &mut self,
        carrier: usize,
        exclusion: usize,
        band: RangeInclusive<usize>,
    ) -> Result<()> {
        let sfdr = measure_sfdr(self, carrier, exclusion, band.clone())?;
        let spurs = find_spurs(self, carrier, exclusion, band.clone(), 8);
        let spur_bins: Vec<usize> = spurs.iter().map(|s| s.bin).collect();
        self.noise_power = band_noise(self, band.clone(), &[carrier], exclusion, &spur_bins);
        self.spurs = spurs;
        self.sfdr_db = Some(sfdr);
        self.band = Some(band);
        Ok(())
    }
}

pub fn to_db(power: f64) -> f64 {
    10.0 * power.max(MIN_POWER).log10()
}

/// Welch-averaged periodogram with 50% segment overlap.
pub fn psd(y: &[f64], nfft: usize, window: Window) -> Result<SpectrumReport> {
    if nfft < 2 || !nfft.is_power_of_two() {
        return Err(Error::Config(format!(
            "nfft must be a power of two >= 2, got {nfft}"
        )));
    }
    if y.len() < nfft {
        return Err(Error::Config(format!(
            "need at least nfft = {nfft} samples, got {}",
            y.len()
        )));
    }
    let w = window.coefficients(nfft);
    let sum_w: f64 = w.iter().sum();
    let sum_w2: f64 = w.iter().map(|v| v * v).sum();
    let enbw_bins = nfft as f64 * sum_w2 / (sum_w * sum_w);

    let hop = nfft / 2;
    let segments = (y.len() - nfft) / hop + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);
    let half = nfft / 2;
    let mut acc = vec![0.0; half + 1];
    let mut windowed_energy = 0.0;
    let mut buf = vec![Complex::new(0.0, 0.0); nfft];
    for s in 0..segments {
        let seg = &y[s * hop..s * hop + nfft];
        for ((b, &x), &wk) in buf.iter_mut().zip(seg).zip(&w) {
            *b = Complex::new(x * wk, 0.0);
            windowed_energy += (x * wk) * (x * wk);
        }
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            let fold = if k == 0 || k == half { 1.0 } else { 2.0 };
            *a += fold * buf[k].norm_sqr();
        }
    }
    let norm = 1.0 / (segments as f64 * sum_w * sum_w);
    let power: Vec<f64> = acc.iter().map(|a| a * norm).collect();
    let carrier_bin = (1..power.len())
        .max_by(|&a, &b| power[a].total_cmp(&power[b]))
        .unwrap_or(0);
    Ok(SpectrumReport {
        nfft,
        window,
        segments,
        enbw_bins,
        freqs: (0..=half).map(|k| k as f64 / nfft as f64).collect(),
        power,
        carrier_bin,
        analyzed_mean_square: windowed_energy / (segments as f64 * sum_w2),
        spurs: Vec::new(),
        sfdr_db: None,
        band: None,
        noise_power: None,
    })
}

/// Bins within `half_width` cycles/sample of `center`, clipped to the spectrum.
pub fn band_around(report: &SpectrumReport, center: f64, half_width: f64) -> RangeInclusive<usize> {
    let n = report.nfft as f64;
    let lo = ((center - half_width) * n).ceil().max(0.0) as usize;
    let hi = (((center + half_width) * n).floor() as usize).min(report.nfft / 2);
    lo..=hi
}

fn excluded(bin: usize, centers: &[usize], radius: usize) -> bool {
    centers.iter().any(|&c| bin.abs_diff(c) <= radius)
}

/// Carrier power over the largest bin in `band`, in dB. Bins within
/// `exclusion` of the carrier are skipped; the carrier itself may lie outside
/// the band.
pub fn measure_sfdr(
    report: &SpectrumReport,
    carrier: usize,
    exclusion: usize,
    band: RangeInclusive<usize>,
) -> Result<f64> {
    let carrier_power = *report
        .power
        .get(carrier)
        .ok_or_else(|| Error::Config(format!("carrier bin {carrier} outside spectrum")))?;
    let hi = (*band.end()).min(report.power.len().saturating_sub(1));
    let spur = (*band.start()..=hi)
        .filter(|&k| !excluded(k, &[carrier], exclusion))
        .map(|k| report.power[k])
        .max_by(f64::total_cmp)
        .ok_or(Error::EmptyBand)?;
    Ok(to_db(carrier_power) - to_db(spur))
}

/// Strongest local maxima in `band`, carrier excluded.
pub fn find_spurs(
    report: &SpectrumReport,
    carrier: usize,
    exclusion: usize,
    band: RangeInclusive<usize>,
    count: usize,
) -> Vec<Spur> {
    let p = &report.power;
    let hi = (*band.end()).min(p.len().saturating_sub(1));
    let mut peaks: Vec<usize> = (*band.start()..=hi)
        .filter(|&k| !excluded(k, &[carrier], exclusion))
        .filter(|&k| {
            let left = k.checked_sub(1).map_or(0.0, |j| p[j]);
            let right = p.get(k + 1).copied().unwrap_or(0.0);
            p[k] >= left && p[k] >= right
        })
        .collect();
    peaks.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    peaks
        .into_iter()
        .take(count)
        .map(|bin| Spur {
            bin,
            power_db: to_db(p[bin]),
        })
        .collect()
}

/// Mean bin power in `band`, skipping bins within `radius` of any listed
/// center.
pub fn band_noise(
    report: &SpectrumReport,
    band: RangeInclusive<usize>,
    carriers: &[usize],
    radius: usize,
    spurs: &[usize],
) -> Option<f64> {
    let hi = (*band.end()).min(report.power.len().saturating_sub(1));
    let bins: Vec<f64> = (*band.start()..=hi)
        .filter(|&k| !excluded(k, carriers, radius) && !excluded(k, spurs, radius))
        .map(|k| report.power[k])
        .collect();
    (!bins.is_empty()).then(|| bins.iter().sum::<f64>() / bins.len() as f64)
}

/// Expected per-bin power of white noise with the given variance.
pub fn white_noise_bin_power(variance: f64, report: &SpectrumReport) -> f64 {
    2.0 * variance * report.enbw_bins / report.nfft as f64
}

/// Least-squares slope of the PSD in dB per decade over `[f_lo, f_hi]`.
pub fn slope_db_per_decade(report: &SpectrumReport, f_lo: f64, f_hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = report
        .freqs
        .iter()
        .zip(&report.power)
        .filter(|(&f, _)| f > 0.0 && f >= f_lo && f <= f_hi)
        .map(|(&f, &p)| (f.log10(), to_db(p)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Per-channel skew and offset second moment, `(τᵢ, Sᵢ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelResidual {
    pub tau: f64,
    pub second_moment: f64,
}

impl ChannelResidual {
    /// `Sᵢ·Δ² - τᵢ²`, the mean squared timing error left after conditioning.
    pub fn residual(&self, delta: f64) -> f64 {
        self.second_moment * delta * delta - self.tau * self.tau
    }
}

/// `10·log₁₀(4 / (ω₀⁴·Σ(Sᵢ·Δ² - τᵢ²)²))`; `+∞` when the sum vanishes.
pub fn predicted_sfdr(channels: &[ChannelResidual], delta: f64, omega0: f64) -> f64 {
    let sum: f64 = channels.iter().map(|c| c.residual(delta).powi(2)).sum();
    let denom = omega0.powi(4) * sum;
    if denom == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (4.0 / denom).log10()
    }
}

/// Image of a channel-periodic error coefficient pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImageTone {
    /// Harmonic of the channel rate, `0..L`. `k = 0` lands on the carrier.
    pub k: usize,
    /// Sinusoid amplitude of the image in signal units.
    pub amplitude: f64,
}

impl ImageTone {
    /// Image frequency folded into `[0, 1/2]`, for a carrier at `f0` cycles/sample.
    pub fn frequency(&self, f0: f64, channels: usize) -> f64 {
        let f = (f0 + self.k as f64 / channels as f64).rem_euclid(1.0);
        if f > 0.5 {
            1.0 - f
        } else {
            f
        }
    }
}

/// Decomposes `cᵢ·s(t)` sampled round-robin (channel `i` weighted by `cᵢ`,
/// `s` a unit sinusoid) into its images at `f0 + k/L`.
pub fn channel_periodic_images(coefficients: &[f64]) -> Vec<ImageTone> {
    let l = coefficients.len();
    (0..l)
        .map(|k| {
            let (re, im) = coefficients
                .iter()
                .enumerate()
                .fold((0.0, 0.0), |(re, im), (i, &c)| {
                    let ph = -2.0 * PI * (i * k) as f64 / l as f64;
                    (re + c * ph.cos(), im + c * ph.sin())
                });
            ImageTone {
                k,
                amplitude: (re * re + im * im).sqrt() / l as f64,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualTone {
    /// Per-channel `½(τᵢ² - Sᵢ·Δ²)·A·ω₀²`.
    pub coefficients: Vec<f64>,
    pub images: Vec<ImageTone>,
}

/// Second-order residual for a tone `A·sin(ω₀t)`, per channel, with the image
/// structure it implies.
pub fn predicted_residual_tone(
    channels: &[ChannelResidual],
    delta: f64,
    amplitude: f64,
    omega0: f64,
) -> ResidualTone {
    let coefficients: Vec<f64> = channels
        .iter()
        .map(|c| -0.5 * c.residual(delta) * amplitude * omega0 * omega0)
        .collect();
    let images = channel_periodic_images(&coefficients);
    ResidualTone {
        coefficients,
        images,
    }
}
