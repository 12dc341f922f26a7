use std::f64::consts::PI;

use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use tiadc::analysis::{
    band_noise, measure_sfdr, predicted_sfdr, psd, slope_db_per_decade, white_noise_bin_power,
    ChannelResidual, Window,
};
use tiadc::ddsm::{Ddsm, DdsmSpec};
use tiadc::subadc::{quantize_stream, SubAdcSpec};

fn uniform_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        .collect()
}

fn window() -> impl Strategy<Value = Window> {
    prop_oneof![Just(Window::Hann), Just(Window::Rectangular)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bin_powers_sum_to_analyzed_power(
        seed in any::<u64>(),
        log_nfft in 3u32..10,
        extra in 0usize..700,
        w in window(),
    ) {
        let nfft = 1usize << log_nfft;
        let y = uniform_noise(nfft + extra, seed);
        let r = psd(&y, nfft, w).unwrap();
        let rel = (r.integrated_power() / r.analyzed_mean_square - 1.0).abs();
        prop_assert!(rel < 1e-9, "rel {rel:e}");
    }

    #[test]
    fn single_rectangular_segment_preserves_mean_square(seed in any::<u64>(), log_nfft in 3u32..12) {
        let nfft = 1usize << log_nfft;
        let y = uniform_noise(nfft, seed);
        let ms = y.iter().map(|v| v * v).sum::<f64>() / nfft as f64;
        let r = psd(&y, nfft, Window::Rectangular).unwrap();
        prop_assert!((r.integrated_power() / ms - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sfdr_ignores_overall_scale(seed in any::<u64>(), scale in 1e-3f64..1e3, w in window()) {
        let n = 4096;
        let noise = uniform_noise(n, seed);
        let y: Vec<f64> = noise
            .iter()
            .enumerate()
            .map(|(m, e)| (2.0 * PI * 0.1 * m as f64).sin() + 1e-3 * e)
            .collect();
        let scaled: Vec<f64> = y.iter().map(|v| v * scale).collect();
        let a = psd(&y, 1024, w).unwrap();
        let b = psd(&scaled, 1024, w).unwrap();
        let sa = measure_sfdr(&a, a.carrier_bin, 3, 1..=512).unwrap();
        let sb = measure_sfdr(&b, b.carrier_bin, 3, 1..=512).unwrap();
        prop_assert!((sa - sb).abs() < 1e-9);
    }

    #[test]
    fn predicted_sfdr_falls_with_frequency_and_residual(
        s in 0.5f64..3.0,
        tau in 0.0f64..0.2,
        delta in 0.3f64..1.0,
        w in 1e-3f64..1.0,
        bump in 1.01f64..2.0,
    ) {
        let ch = |s| vec![ChannelResidual { tau, second_moment: s }; 4];
        let base = predicted_sfdr(&ch(s), delta, w);
        prop_assert!(predicted_sfdr(&ch(s), delta, w * bump) < base);
        let residual = s * delta * delta - tau * tau;
        let larger = if residual > 0.0 { s * bump } else { s / bump };
        prop_assert!(predicted_sfdr(&ch(larger), delta, w) < base);
    }
}

#[test]
fn closed_form_sfdr_examples() {
    let ch = vec![
        ChannelResidual {
            tau: 0.0,
            second_moment: 2.0
        };
        4
    ];
    let expect = 10.0 * (4.0 / (4.0 * 0.5f64.powi(2) * 0.01f64.powi(4))).log10();
    assert!((predicted_sfdr(&ch, 0.5, 0.01) - expect).abs() < 1e-9);
    let zero = vec![
        ChannelResidual {
            tau: 0.5,
            second_moment: 1.0
        };
        4
    ];
    assert_eq!(predicted_sfdr(&zero, 0.5, 0.01), f64::INFINITY);
}

#[test]
fn white_noise_floor_matches_variance() {
    let y = uniform_noise(1 << 18, 7);
    for w in [Window::Hann, Window::Rectangular] {
        let r = psd(&y, 4096, w).unwrap();
        let total = r.integrated_power() * 12.0;
        assert!((total - 1.0).abs() < 0.01, "{w:?}: {total}");
        let floor = band_noise(&r, 1..=2047, &[], 0, &[]).unwrap();
        let expected = white_noise_bin_power(1.0 / 12.0, &r);
        let diff = 10.0 * (floor / expected).log10();
        assert!(diff.abs() < 0.3, "{w:?}: {diff:.3} dB");
    }
}

fn shaped(spec: DdsmSpec, input: f64, len: usize) -> Vec<f64> {
    let seq: Vec<f64> = Ddsm::new(spec, input, 11, 0).unwrap().take(len).collect();
    let mean = seq.iter().sum::<f64>() / len as f64;
    seq.iter().map(|v| v - mean).collect()
}

#[test]
fn ddsm_spectrum_rises_at_40_db_per_decade() {
    let len = 1 << 20;
    let dithered = DdsmSpec::default();
    let plain = DdsmSpec {
        dither: false,
        ..dithered
    };
    // Odd multiples of the input LSB avoid short limit cycles without dither.
    let lsb = plain.step / 2.0 * 2f64.powi(-(plain.input_bits as i32));
    for input in [-0.3, 0.2, 0.55] {
        let odd = ((input / lsb / 2.0).floor() * 2.0 + 1.0) * lsb;
        let r = psd(&shaped(plain, odd, len), 1 << 16, Window::Hann).unwrap();
        let slope = slope_db_per_decade(&r, 1e-3, 1e-2).unwrap();
        assert!(
            (slope - 40.0).abs() < 4.0,
            "no dither, input {odd}: {slope:.1}"
        );

        let r = psd(&shaped(dithered, input, len), 1 << 16, Window::Hann).unwrap();
        let slope = slope_db_per_decade(&r, 1e-3, 1e-2).unwrap();
        assert!(
            (slope - 40.0).abs() < 4.0,
            "dither, input {input}: {slope:.1}"
        );
    }
}

#[test]
fn delta_sigma_subadc_shapes_its_error() {
    let n = 1 << 18;
    let f = 0.0517;
    let x: Vec<f64> = (0..n)
        .map(|m| 0.5 * (2.0 * PI * f * m as f64).sin())
        .collect();
    let spec = SubAdcSpec::default();
    let conv = quantize_stream(&x, &spec);
    assert_eq!(conv.saturated, 0);
    let e: Vec<f64> = (1..n).map(|m| conv.codes[m] - x[m - 1]).collect();
    let r = psd(&e, 1 << 14, Window::Hann).unwrap();
    let slope = slope_db_per_decade(&r, 1e-3, 1e-2).unwrap();
    assert!((slope - 40.0).abs() < 4.0, "{slope:.1}");
}
