use std::f64::consts::PI;

use tiadc::analysis::{channel_periodic_images, predicted_residual_tone, psd, ChannelResidual};
use tiadc::cli::{RunConfig, Scenario};
use tiadc::engine::{error_sequence, simulate};
use tiadc::subadc::SubAdcSpec;

/// Complex sinusoid amplitude of `e` at `f` cycles/sample, rectangular window.
fn project(e: &[f64], f: f64) -> f64 {
    let n = e.len() as f64;
    let (re, im) = e.iter().enumerate().fold((0.0, 0.0), |(re, im), (m, v)| {
        let ph = 2.0 * PI * f * m as f64;
        (re + v * ph.cos(), im - v * ph.sin())
    });
    2.0 * (re * re + im * im).sqrt() / n
}

fn idealized(samples: usize) -> RunConfig {
    RunConfig {
        samples,
        subadc: SubAdcSpec::idealized(),
        ..RunConfig::default()
    }
}

fn db(x: f64) -> f64 {
    20.0 * x.log10()
}

#[test]
fn first_order_images_match_direct_dft() {
    let cfg = idealized(1 << 16);
    let cap = simulate(&cfg.simulation(Scenario::Uncorrected).unwrap()).unwrap();
    let tone = &cfg.signal.tones[0];
    let (a, f0) = (tone.amplitude, tone.frequency_hz);
    let w0 = 2.0 * PI * f0;
    let skews = &cfg.timing.skews_s;
    let l = skews.len();

    let first_order: Vec<f64> = (0..cfg.samples)
        .map(|m| skews[m % l] * a * w0 * (w0 * m as f64 + tone.phase_rad).cos())
        .collect();
    let report = psd(&cap.output, cfg.nfft(), cfg.analysis.window).unwrap();
    let closed = channel_periodic_images(skews);

    for img in closed.iter().filter(|t| t.k != 0) {
        let f = img.frequency(f0, l);
        let direct = project(&first_order, f);
        let coefficient = img.amplitude * a * w0;
        assert!(
            (db(direct) - db(coefficient)).abs() < 0.05,
            "k {}: direct {direct:e} closed form {coefficient:e}",
            img.k
        );
        let measured = report.power[report.bin_of(f)];
        let expected = direct * direct / 2.0;
        let diff = 10.0 * (measured / expected).log10();
        assert!(
            diff.abs() < 1.0,
            "k {}: measured vs direct {diff:.2} dB",
            img.k
        );
    }
}

#[test]
fn shaped_images_stay_within_second_order_prediction() {
    let cfg = idealized(1 << 20);
    let cap = simulate(&cfg.simulation(Scenario::Shape).unwrap()).unwrap();
    let ideal = simulate(&cfg.simulation(Scenario::Ideal).unwrap()).unwrap();
    let err = error_sequence(&cap.output, &ideal.output).unwrap();

    let tone = &cfg.signal.tones[0];
    let f0 = tone.frequency_hz;
    let w0 = 2.0 * PI * f0;
    let residuals: Vec<ChannelResidual> = cap
        .channels
        .iter()
        .map(|c| ChannelResidual {
            tau: c.timing.tau(),
            second_moment: c.offset_second_moment(),
        })
        .collect();
    let predicted = predicted_residual_tone(&residuals, cfg.timing.delta_s, tone.amplitude, w0);
    let uncorrected = channel_periodic_images(&cfg.timing.skews_s);
    let n = err.len() as f64;

    for img in predicted.images.iter().filter(|t| t.k != 0) {
        let f = img.frequency(f0, 4);
        let measured = project(&err, f);
        let noise = ((8..40)
            .map(|j| {
                let p = project(&err, f + j as f64 / n);
                p * p
            })
            .sum::<f64>()
            / 32.0)
            .sqrt();
        assert!(
            measured <= img.amplitude + 5.0 * noise,
            "k {}: measured {measured:e} predicted {:e} noise {noise:e}",
            img.k,
            img.amplitude
        );
        let first = uncorrected[img.k].amplitude * tone.amplitude * w0;
        assert!(db(first) - db(measured) > 40.0, "k {}", img.k);
    }
}

#[test]
fn shaping_reduces_image_spurs_by_25_db() {
    let cfg = RunConfig::default();
    let f0 = cfg.signal.tones[0].frequency_hz;
    let spectrum = |s| {
        let cap = simulate(&cfg.simulation(s).unwrap()).unwrap();
        psd(&cap.output, cfg.nfft(), cfg.analysis.window).unwrap()
    };
    let raw = spectrum(Scenario::Uncorrected);
    let shaped = spectrum(Scenario::Shape);
    for img in channel_periodic_images(&cfg.timing.skews_s)
        .iter()
        .filter(|t| t.k != 0)
    {
        let bin = raw.bin_of(img.frequency(f0, 4));
        let reduction = 10.0 * (raw.power[bin] / shaped.power[bin]).log10();
        assert!(reduction >= 25.0, "k {}: {reduction:.1} dB", img.k);
    }
}
