//! Analytic continuous-time stimuli.
//!
//! Signals are closed-form tone sums so they can be evaluated (and
//! differentiated exactly) at the irregular instants produced by the
//! conditioned sampling clocks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Highest derivative order served by [`TestSignal::derivative`].
pub const MAX_DERIVATIVE_ORDER: u32 = 4;

/// One sinusoidal component `A·sin(ω·t + φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub amplitude: f64,
    /// Angular frequency in rad/s.
    pub angular_frequency: f64,
    /// Phase in rad.
    #[serde(default)]
    pub phase: f64,
}

impl Tone {
    pub fn new(amplitude: f64, angular_frequency: f64, phase: f64) -> Self {
        Self {
            amplitude,
            angular_frequency,
            phase,
        }
    }

    /// Frequency in Hz.
    pub fn frequency(&self) -> f64 {
        self.angular_frequency / (2.0 * PI)
    }

    fn derivative(&self, t: f64, order: u32) -> f64 {
        let arg = self.angular_frequency * t + self.phase;
        // d^k/dt^k sin(arg) = ω^k sin(arg + kπ/2), picked exactly per quadrant.
        let trig = match order % 4 {
            0 => arg.sin(),
            1 => arg.cos(),
            2 => -arg.sin(),
            _ => -arg.cos(),
        };
        self.amplitude * self.angular_frequency.powi(order as i32) * trig
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Sinusoid,
    Multitone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSignal {
    kind: SignalKind,
    tones: Vec<Tone>,
}

impl TestSignal {
    pub fn sinusoid(amplitude: f64, angular_frequency: f64, phase: f64) -> Result<Self> {
        let tone = Tone::new(amplitude, angular_frequency, phase);
        validate(&tone)?;
        Ok(Self {
            kind: SignalKind::Sinusoid,
            tones: vec![tone],
        })
    }

    pub fn multitone(tones: Vec<Tone>) -> Result<Self> {
        if tones.is_empty() {
            return Err(Error::InvalidSignal(
                "multitone needs at least one tone".into(),
            ));
        }
        tones.iter().try_for_each(validate)?;
        let kind = if tones.len() == 1 {
            SignalKind::Sinusoid
        } else {
            SignalKind::Multitone
        };
        Ok(Self { kind, tones })
    }

    pub fn kind(&self) -> SignalKind {
        self.kind
    }

    pub fn tones(&self) -> &[Tone] {
        &self.tones
    }

    /// `Σ Aₖ·sin(ωₖ·t + φₖ)`
    pub fn eval(&self, t: f64) -> f64 {
        self.tones.iter().map(|tone| tone.derivative(t, 0)).sum()
    }

    /// Exact `order`-th time derivative.
    pub fn derivative(&self, t: f64, order: u32) -> Result<f64> {
        if order > MAX_DERIVATIVE_ORDER {
            return Err(Error::UnsupportedOrder(order));
        }
        Ok(self
            .tones
            .iter()
            .map(|tone| tone.derivative(t, order))
            .sum())
    }

    pub fn max_angular_frequency(&self) -> f64 {
        self.tones
            .iter()
            .map(|t| t.angular_frequency)
            .fold(0.0, f64::max)
    }

    /// Highest tone frequency in Hz.
    pub fn bandwidth(&self) -> f64 {
        self.max_angular_frequency() / (2.0 * PI)
    }

    pub fn peak_amplitude(&self) -> f64 {
        self.tones.iter().map(|t| t.amplitude).sum()
    }
}

fn validate(tone: &Tone) -> Result<()> {
    if !tone.amplitude.is_finite() || tone.amplitude < 0.0 {
        return Err(Error::InvalidSignal(format!(
            "amplitude must be finite and >= 0, got {}",
            tone.amplitude
        )));
    }
    if !tone.angular_frequency.is_finite() || tone.angular_frequency <= 0.0 {
        return Err(Error::InvalidSignal(format!(
            "angular frequency must be finite and > 0, got {}",
            tone.angular_frequency
        )));
    }
    if !tone.phase.is_finite() {
        return Err(Error::InvalidSignal("phase must be finite".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn derivative_by_phase_shift(tone: &Tone, t: f64, order: u32) -> f64 {
        tone.amplitude
            * tone.angular_frequency.powi(order as i32)
            * (tone.angular_frequency * t + tone.phase + order as f64 * FRAC_PI_2).sin()
    }

    /// Power series with explicit range reduction; shares nothing with `f64::sin`.
    fn series_sin(x: f64) -> f64 {
        let two_pi = 2.0 * PI;
        let mut r = x - two_pi * (x / two_pi).round();
        let mut sign = 1.0;
        if r > FRAC_PI_2 {
            r = PI - r;
        } else if r < -FRAC_PI_2 {
            r = -PI - r;
        }
        if r < 0.0 {
            sign = -1.0;
            r = -r;
        }
        let mut term = r;
        let mut sum = r;
        for k in 1..30 {
            term *= -r * r / ((2 * k) as f64 * (2 * k + 1) as f64);
            sum += term;
        }
        sign * sum
    }

    #[test]
    fn eval_examples() {
        let s = TestSignal::sinusoid(1.0, 2.0 * PI, 0.0).unwrap();
        assert_eq!(s.eval(0.0), 0.0);
        assert!((s.eval(0.25) - 1.0).abs() < 1e-15);

        let s = TestSignal::sinusoid(2.0, 3.0, 0.7).unwrap();
        let expected = 2.0 * series_sin(4.6);
        assert!((s.eval(1.3) - expected).abs() < 1e-14);
    }

    #[test]
    fn derivative_examples() {
        let w = 5.5;
        let s = TestSignal::sinusoid(1.0, w, 0.0).unwrap();
        assert!((s.derivative(0.0, 1).unwrap() - w).abs() < 1e-15);
        assert_eq!(s.derivative(0.37, 0).unwrap(), s.eval(0.37));
        let t = 0.81;
        assert!((s.derivative(t, 2).unwrap() + w * w * (w * t).sin()).abs() < 1e-12);
        assert_eq!(s.derivative(t, 5), Err(Error::UnsupportedOrder(5)));
    }

    #[test]
    fn rejects_bad_tones() {
        assert!(TestSignal::sinusoid(-1.0, 1.0, 0.0).is_err());
        assert!(TestSignal::sinusoid(1.0, 0.0, 0.0).is_err());
        assert!(TestSignal::sinusoid(f64::NAN, 1.0, 0.0).is_err());
        assert!(TestSignal::multitone(vec![]).is_err());
    }

    #[test]
    fn quadrant_table_matches_phase_shift() {
        let tone = Tone::new(0.7, 2.3, 0.4);
        for order in 0..=4 {
            for &t in &[-3.1, 0.0, 0.2, 7.9] {
                let a = tone.derivative(t, order);
                let b = derivative_by_phase_shift(&tone, t, order);
                assert!((a - b).abs() < 1e-12, "order {order} t {t}");
            }
        }
    }

    proptest! {
        #[test]
        fn derivatives_match_central_differences(
            a1 in 0.1f64..1.0, w1 in 0.5f64..5.0, p1 in -1.0f64..1.0,
            a2 in 0.0f64..1.0, w2 in 0.5f64..5.0, p2 in -1.0f64..1.0,
            t in -0.2f64..0.2,
        ) {
            let s = TestSignal::multitone(vec![Tone::new(a1, w1, p1), Tone::new(a2, w2, p2)]).unwrap();
            let h = 1e-5 / s.max_angular_frequency();
            let h2 = 1e-3 / s.max_angular_frequency();
            let fd1 = (s.eval(t + h) - s.eval(t - h)) / (2.0 * h);
            let fd2 = (s.eval(t + h2) - 2.0 * s.eval(t) + s.eval(t - h2)) / (h2 * h2);
            let d1 = s.derivative(t, 1).unwrap();
            let d2 = s.derivative(t, 2).unwrap();
            // Errors are taken relative to the derivative's scale so zero
            // crossings do not inflate the ratio.
            let scale1 = a1 * w1 + a2 * w2;
            let scale2 = a1 * w1 * w1 + a2 * w2 * w2;
            prop_assert!((fd1 - d1).abs() / scale1 < 1e-6);
            prop_assert!((fd2 - d2).abs() / scale2 < 1e-6);
        }

        #[test]
        fn single_tone_is_periodic(a in 0.0f64..2.0, w in 0.1f64..10.0, p in -3.0f64..3.0, t in -5.0f64..5.0) {
            let s = TestSignal::sinusoid(a, w, p).unwrap();
            prop_assert!((s.eval(t) - s.eval(t + 2.0 * PI / w)).abs() < 1e-12);
        }
    }
}
