use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tiadc::cli::{self, RunConfig, SweepSpec};

/// Time-interleaved ADC timing-skew simulator.
#[derive(Debug, Parser)]
#[command(name = "tiadc", version)]
struct Args {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// ideal, uncorrected, scramble, shape or all.
    #[arg(long, default_value = "all")]
    scenario: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// PARAM=V1,V2,... with PARAM one of g_squared, delta, skew_scale.
    #[arg(long)]
    sweep: Option<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}

fn run(args: &Args) -> tiadc::Result<()> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(samples) = args.samples {
        config.samples = samples;
    }
    config.validate()?;
    let scenarios = cli::parse_scenarios(&args.scenario)?;

    if let Some(sweep) = &args.sweep {
        let spec: SweepSpec = sweep.parse()?;
        let (path, rows) = cli::run_sweep(&config, &spec, &scenarios, &args.out)?;
        for r in &rows {
            let sfdr = r
                .metrics
                .as_ref()
                .map(|m| format!("{:.2} dB", m.sfdr_db_measured))
                .unwrap_or_else(|| "-".into());
            println!(
                "{}={} {:<12} {:<10} {}",
                spec.parameter.name(),
                r.value,
                r.scenario,
                sfdr,
                r.status
            );
        }
        println!("wrote {}", path.display());
        return Ok(());
    }

    let metrics = cli::run(&config, &scenarios, &args.out)?;
    for m in &metrics {
        let predicted = m
            .sfdr_db_predicted
            .map(|p| format!("{p:.2} dB"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<12} sfdr {:>8.2} dB  predicted {:>10}",
            m.scenario.name(),
            m.sfdr_db_measured,
            predicted
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}
