//! Config-driven scenarios and file output.
//!
//! A run executes one or more scenarios against the same stimulus:
//!
//! | scenario      | skews      | conditioning     |
//! |---------------|------------|------------------|
//! | `ideal`       | all zero   | none             |
//! | `uncorrected` | configured | none             |
//! | `scramble`    | configured | edge scrambling  |
//! | `shape`       | configured | delta-sigma      |
//!
//! and writes `<scenario>_spectrum.csv` plus a single `metrics.json`.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{self, ChannelResidual, SpectrumReport, Window};
use crate::ddsm::DdsmSpec;
use crate::engine::{simulate, Conditioning, InterleavedCapture, SimulationSpec};
use crate::scramble::{default_g_squared, DitherSource};
use crate::signal::{TestSignal, Tone};
use crate::subadc::{SubAdcKind, SubAdcSpec};
use crate::timing::{channel_timings, InterleaveClock};
use crate::{Error, Result};

/// Default capture length.
pub const DEFAULT_SAMPLES: usize = 1 << 16;
/// Default analysis length: seven half-overlapping segments of the default
/// capture.
pub const DEFAULT_NFFT: usize = DEFAULT_SAMPLES / 4;
/// Default tone, on an odd bin of the default analysis length.
pub const DEFAULT_TONE_BIN: usize = 85;

/// Largest seed a TOML integer can hold.
pub const MAX_SEED: u64 = i64::MAX as u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub samples: usize,
    pub seed: u64,
    pub clock: ClockConfig,
    pub timing: TimingConfig,
    pub signal: SignalConfig,
    pub subadc: SubAdcSpec,
    pub scramble: ScrambleConfig,
    pub shape: DdsmSpec,
    pub analysis: AnalysisConfig,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClockConfig {
    pub channels: usize,
    /// Aggregate sampling period in seconds.
    pub period_s: f64,
}

impl Default for ClockConfig {
    fn default() -> Self {
        Self {
            channels: 4,
            period_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    /// Per-channel skew in seconds, channel 0 first.
    pub skews_s: Vec<f64>,
    /// Edge step in seconds.
    pub delta_s: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            skews_s: vec![0.0, 0.15, -0.10, 0.08],
            delta_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneConfig {
    pub amplitude: f64,
    pub frequency_hz: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalConfig {
    pub tones: Vec<ToneConfig>,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self {
            tones: vec![ToneConfig {
                amplitude: 0.5,
                frequency_hz: DEFAULT_TONE_BIN as f64 / DEFAULT_NFFT as f64,
                phase_rad: 0.0,
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScrambleConfig {
    /// Shared second moment `g²`; the smallest value feasible for every
    /// channel (plus 5%) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_squared: Option<f64>,
    pub dither_bits: u32,
}

impl Default for ScrambleConfig {
    fn default() -> Self {
        Self {
            g_squared: None,
            dither_bits: DitherSource::DEFAULT_BITS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub window: Window,
    /// FFT length; the largest power of two not above a quarter of the
    /// capture when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nfft: Option<usize>,
    /// Bins on either side of the carrier left out of the spur search.
    pub exclusion_bins: usize,
    /// Half-width, in cycles/sample, of the search window around `F_S/L`
    /// used for delta-sigma sub-ADCs.
    pub image_band_half_width: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            window: Window::Hann,
            nfft: None,
            exclusion_bins: 3,
            image_band_half_width: (DEFAULT_TONE_BIN + 8) as f64 / DEFAULT_NFFT as f64,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: default_seed(),
            clock: ClockConfig::default(),
            timing: TimingConfig::default(),
            signal: SignalConfig::default(),
            subadc: SubAdcSpec::default(),
            scramble: ScrambleConfig::default(),
            shape: DdsmSpec::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Ideal,
    Uncorrected,
    Scramble,
    Shape,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Ideal,
        Scenario::Uncorrected,
        Scenario::Scramble,
        Scenario::Shape,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Ideal => "ideal",
            Scenario::Uncorrected => "uncorrected",
            Scenario::Scramble => "scramble",
            Scenario::Shape => "shape",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `ideal`, `uncorrected`, `scramble`, `shape` or `all`.
pub fn parse_scenarios(s: &str) -> Result<Vec<Scenario>> {
    match s {
        "all" => Ok(Scenario::ALL.to_vec()),
        "ideal" => Ok(vec![Scenario::Ideal]),
        "uncorrected" => Ok(vec![Scenario::Uncorrected]),
        "scramble" => Ok(vec![Scenario::Scramble]),
        "shape" => Ok(vec![Scenario::Shape]),
        other => Err(Error::Config(format!("unknown scenario '{other}'"))),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// Checks every invariant that does not depend on the conditioner.
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("samples must be > 0".into()));
        }
        if self.seed > MAX_SEED {
            return Err(Error::Config(format!("seed must be <= {MAX_SEED}")));
        }
        if self.timing.skews_s.len() != self.clock.channels {
            return Err(Error::Config(format!(
                "timing.skews_s has {} entries for {} channels",
                self.timing.skews_s.len(),
                self.clock.channels
            )));
        }
        let nfft = self.nfft();
        if !nfft.is_power_of_two() || nfft > self.samples {
            return Err(Error::Config(format!(
                "analysis.nfft = {nfft} must be a power of two no larger than samples = {}",
                self.samples
            )));
        }
        if !(self.analysis.image_band_half_width > 0.0) {
            return Err(Error::Config(
                "analysis.image_band_half_width must be > 0".into(),
            ));
        }
        if let Some(g) = self.scramble.g_squared {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!(
                    "scramble.g_squared must be > 0, got {g}"
                )));
            }
        }
        DitherSource::new(self.scramble.dither_bits, 0, 0)?;
        self.shape.validate()?;
        self.simulation(Scenario::Uncorrected).map(|_| ())
    }

    pub fn nfft(&self) -> usize {
        self.analysis.nfft.unwrap_or_else(|| {
            let quarter = (self.samples / 4).max(2);
            1 << quarter.ilog2()
        })
    }

    pub fn signal(&self) -> Result<TestSignal> {
        let tones = self
            .signal
            .tones
            .iter()
            .map(|t| {
                Tone::new(
                    t.amplitude,
                    2.0 * std::f64::consts::PI * t.frequency_hz,
                    t.phase_rad,
                )
            })
            .collect();
        TestSignal::multitone(tones)
    }

    /// Shared `g²` for scrambling.
    pub fn g_squared(&self) -> f64 {
        self.scramble.g_squared.unwrap_or_else(|| {
            default_g_squared(
                self.timing
                    .skews_s
                    .iter()
                    .map(|tau| tau / self.timing.delta_s),
            )
        })
    }

    pub fn simulation(&self, scenario: Scenario) -> Result<SimulationSpec> {
        let clock = InterleaveClock::new(self.clock.channels, self.clock.period_s)?;
        let skews: Vec<f64> = match scenario {
            Scenario::Ideal => vec![0.0; self.timing.skews_s.len()],
            _ => self.timing.skews_s.clone(),
        };
        let conditioning = match scenario {
            Scenario::Ideal | Scenario::Uncorrected => Conditioning::None,
            Scenario::Scramble => Conditioning::Scramble {
                g_squared: self.g_squared(),
                dither_bits: self.scramble.dither_bits,
            },
            Scenario::Shape => Conditioning::Shape(self.shape),
        };
        let spec = SimulationSpec {
            clock,
            channels: channel_timings(&skews, self.timing.delta_s)?,
            signal: self.signal()?,
            subadc: self.subadc,
            conditioning,
            samples: self.samples,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Where spurs are searched for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BandMode {
    /// Whole Nyquist band.
    Full,
    /// Window around `F_S/L`, where the delta-sigma sub-ADCs leave a
    /// noise null.
    ImageNull,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub scenario: Scenario,
    pub sfdr_db_measured: f64,
    /// Closed-form SFDR from the per-channel residuals; `null` when the
    /// residual vanishes.
    pub sfdr_db_predicted: Option<f64>,
    pub error_mean_per_channel: Vec<f64>,
    pub error_second_moment_per_channel: Vec<f64>,
    pub offset_second_moment_per_channel: Vec<f64>,
    pub noise_floor_db: Option<f64>,
    pub band_mode: BandMode,
    pub band_bins: [usize; 2],
    pub carrier_bin: usize,
    pub saturated_samples: usize,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub metrics: MetricsReport,
    pub spectrum: SpectrumReport,
    pub capture: InterleavedCapture,
}

/// Runs one scenario and measures it.
pub fn run_scenario(config: &RunConfig, scenario: Scenario) -> Result<ScenarioResult> {
    let spec = config.simulation(scenario)?;
    let capture = simulate(&spec)?;
    let mut spectrum = analysis::psd(&capture.output, config.nfft(), config.analysis.window)?;

    let signal = config.signal()?;
    let main = signal
        .tones()
        .iter()
        .max_by(|a, b| a.amplitude.total_cmp(&b.amplitude))
        .copied()
        .ok_or_else(|| Error::Config("no tones".into()))?;
    let f0 = main.frequency() * config.clock.period_s;
    let carrier = spectrum.bin_of(f0);
    let (band_mode, band) = match config.subadc.kind {
        SubAdcKind::IdealUniform => (BandMode::Full, 0..=config.nfft() / 2),
        SubAdcKind::DeltaSigma2 => (
            BandMode::ImageNull,
            analysis::band_around(
                &spectrum,
                1.0 / config.clock.channels as f64,
                config.analysis.image_band_half_width,
            ),
        ),
    };
    spectrum.measure(carrier, config.analysis.exclusion_bins, band.clone())?;

    let delta = config.timing.delta_s;
    let residuals: Vec<ChannelResidual> = capture
        .channels
        .iter()
        .map(|c| ChannelResidual {
            tau: c.timing.tau(),
            second_moment: c.offset_second_moment(),
        })
        .collect();
    let predicted = analysis::predicted_sfdr(&residuals, delta, main.angular_frequency);
    let (means, seconds): (Vec<f64>, Vec<f64>) =
        capture.channels.iter().map(|c| c.error_moments()).unzip();

    let metrics = MetricsReport {
        scenario,
        sfdr_db_measured: spectrum.sfdr_db.unwrap_or(f64::NAN),
        sfdr_db_predicted: predicted.is_finite().then_some(predicted),
        error_mean_per_channel: means,
        error_second_moment_per_channel: seconds,
        offset_second_moment_per_channel: residuals.iter().map(|r| r.second_moment).collect(),
        noise_floor_db: spectrum.noise_power.map(analysis::to_db),
        band_mode,
        band_bins: [*band.start(), *band.end()],
        carrier_bin: carrier,
        saturated_samples: capture.saturated(),
        seed: config.seed,
        config_hash: config.hash(),
    };
    Ok(ScenarioResult {
        metrics,
        spectrum,
        capture,
    })
}

/// Runs scenarios concurrently; results keep the requested order.
pub fn run_scenarios(config: &RunConfig, scenarios: &[Scenario]) -> Result<Vec<ScenarioResult>> {
    scenarios
        .par_iter()
        .map(|&s| run_scenario(config, s))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// `freq_norm,psd_db`, one row per bin.
pub fn spectrum_csv(report: &SpectrumReport) -> String {
    let mut out = String::from("freq_norm,psd_db\n");
    for (f, p) in report.freqs.iter().zip(&report.power) {
        let _ = writeln!(out, "{},{:.6}", format_sig(*f, 9), analysis::to_db(*p));
    }
    out
}

/// Plain decimal with `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{:.*}", digits - 1, x);
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn metrics_json(metrics: &[MetricsReport]) -> String {
    let mut s = serde_json::to_string_pretty(metrics).expect("metrics serialize");
    s.push('\n');
    s
}

/// Runs the scenarios and writes spectra and metrics into `out_dir`.
pub fn run(
    config: &RunConfig,
    scenarios: &[Scenario],
    out_dir: &Path,
) -> Result<Vec<MetricsReport>> {
    let results = run_scenarios(config, scenarios)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    for r in &results {
        let path = out_dir.join(format!("{}_spectrum.csv", r.metrics.scenario));
        write_file(&path, &spectrum_csv(&r.spectrum))?;
    }
    let metrics: Vec<MetricsReport> = results.into_iter().map(|r| r.metrics).collect();
    write_file(&out_dir.join("metrics.json"), &metrics_json(&metrics))?;
    Ok(metrics)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    GSquared,
    Delta,
    SkewScale,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::GSquared => "g_squared",
            SweepParameter::Delta => "delta",
            SweepParameter::SkewScale => "skew_scale",
        }
    }

    /// Copy of `base` with this parameter set to `value`.
    pub fn apply(&self, base: &RunConfig, value: f64) -> RunConfig {
        let mut cfg = base.clone();
        match self {
            SweepParameter::GSquared => cfg.scramble.g_squared = Some(value),
            SweepParameter::Delta => cfg.timing.delta_s = value,
            SweepParameter::SkewScale => cfg.timing.skews_s.iter_mut().for_each(|t| *t *= value),
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl FromStr for SweepSpec {
    type Err = Error;

    /// `PARAM=V1,V2,...`
    fn from_str(s: &str) -> Result<Self> {
        let (name, values) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("sweep '{s}' is not PARAM=V1,V2,...")))?;
        let parameter = match name.trim() {
            "g_squared" => SweepParameter::GSquared,
            "delta" => SweepParameter::Delta,
            "skew_scale" => SweepParameter::SkewScale,
            other => return Err(Error::Config(format!("unknown sweep parameter '{other}'"))),
        };
        let values = values
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad sweep value '{v}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        Ok(Self { parameter, values })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub parameter: SweepParameter,
    pub value: f64,
    pub scenario: Scenario,
    /// `ok`, `infeasible: …` or `invalid: …`
    pub status: String,
    pub metrics: Option<MetricsReport>,
}

/// One row per (value, scenario). Rows that cannot run carry a status
/// instead of aborting the sweep.
pub fn sweep(base: &RunConfig, sweep: &SweepSpec, scenarios: &[Scenario]) -> Vec<SweepRow> {
    let jobs: Vec<(f64, Scenario)> = sweep
        .values
        .iter()
        .flat_map(|&v| scenarios.iter().map(move |&s| (v, s)))
        .collect();
    jobs.par_iter()
        .map(|&(value, scenario)| {
            let cfg = sweep.parameter.apply(base, value);
            let outcome = cfg.validate().and_then(|_| run_scenario(&cfg, scenario));
            let (status, metrics) = match outcome {
                Ok(r) => ("ok".to_string(), Some(r.metrics)),
                Err(e) if e.is_infeasible() => (format!("infeasible: {e}"), None),
                Err(e) => (format!("invalid: {e}"), None),
            };
            SweepRow {
                parameter: sweep.parameter,
                value,
                scenario,
                status,
                metrics,
            }
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "parameter,value,scenario,status,sfdr_db_measured,sfdr_db_predicted,noise_floor_db\n",
    );
    let num = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for r in rows {
        let m = r.metrics.as_ref();
        let _ = writeln!(
            out,
            "{},{},{},\"{}\",{},{},{}",
            r.parameter.name(),
            r.value,
            r.scenario,
            r.status.replace('"', "'"),
            num(m.map(|m| m.sfdr_db_measured)),
            num(m.and_then(|m| m.sfdr_db_predicted)),
            num(m.and_then(|m| m.noise_floor_db)),
        );
    }
    out
}

/// Runs a sweep and writes `sweep_<param>.csv` into `out_dir`.
pub fn run_sweep(
    base: &RunConfig,
    spec: &SweepSpec,
    scenarios: &[Scenario],
    out_dir: &Path,
) -> Result<(PathBuf, Vec<SweepRow>)> {
    let rows = sweep(base, spec, scenarios);
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    let path = out_dir.join(format!("sweep_{}.csv", spec.parameter.name()));
    write_file(&path, &sweep_csv(&rows))?;
    Ok((path, rows))
}

/// Process exit status for an error: 1 for I/O, 3 for an unrealizable
/// conditioner, 2 for anything else wrong with the configuration.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 1,
        e if e.is_infeasible() => 3,
        _ => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn empty_config_is_the_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn sig_digits() {
        assert_eq!(format_sig(0.0, 9), "0.00000000");
        assert_eq!(format_sig(0.5, 9), "0.500000000");
        assert_eq!(format_sig(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(format_sig(341.0 / 65536.0, 9), "0.00520324707");
    }

    #[test]
    fn sweep_specs_parse() {
        let s: SweepSpec = "g_squared=0.25, 0.5".parse().unwrap();
        assert_eq!(s.parameter, SweepParameter::GSquared);
        assert_eq!(s.values, vec![0.25, 0.5]);
        assert!("foo=1".parse::<SweepSpec>().is_err());
        assert!("delta".parse::<SweepSpec>().is_err());
        assert!("delta=x".parse::<SweepSpec>().is_err());
    }

    #[test]
    fn validation_names_the_problem() {
        let mut cfg = RunConfig::default();
        cfg.timing.skews_s.pop();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("skews_s"));
        assert_eq!(exit_code(&err), 2);

        let err = RunConfig::from_toml("samples = 0").unwrap_err();
        assert_eq!(exit_code(&err), 2);
        assert_eq!(exit_code(&Error::Io("x".into())), 1);
    }

    #[test]
    fn scenario_names() {
        assert_eq!(parse_scenarios("all").unwrap().len(), 4);
        assert_eq!(parse_scenarios("shape").unwrap(), vec![Scenario::Shape]);
        assert!(parse_scenarios("bogus").is_err());
    }
}
