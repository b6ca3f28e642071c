//! Benchmark CLI: paired Picard / Anderson-accelerated ICP sweeps.
//!
//! Exit codes: 0 success, 1 configuration error, 2 input-data error,
//! 3 every trial failed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use aa_icp::{
    load_cloud, make_test_shape, run_sweep, write_csv, AaConfig, CloudFormat, Error, PointCloud,
    SweepConfig, SweepResult,
};

/// Points generated for built-in shapes before optional subsampling.
const SHAPE_POINTS: usize = 3000;

/// Compares plain and Anderson-accelerated ICP over seeded misalignment
/// sweeps and writes one CSV row per trial.
#[derive(Parser, Debug)]
#[command(name = "aa-icp", version, about)]
struct Cli {
    /// Reference cloud file (ASCII .ply, or .xyz / .txt with one point per line)
    #[arg(long, conflicts_with = "shape", required_unless_present = "shape")]
    input: Option<PathBuf>,

    /// Built-in reference shape: sphere-ish, two-planes or bunny-proxy
    /// (generated with 3000 points; see --subsample)
    #[arg(long)]
    shape: Option<String>,

    /// Experiment axis: rotation (degrees), translation (meters) or epsilon
    #[arg(long)]
    axis: String,

    /// Comma-separated axis values, e.g. 5,10,20
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,

    /// Trials per axis value
    #[arg(long, default_value_t = 50)]
    trials: usize,

    /// Convergence tolerance (the epsilon axis overrides this per value)
    #[arg(long, default_value_t = 0.001)]
    epsilon: f64,

    /// Largest acceptable acceleration weight magnitude
    #[arg(long, default_value_t = 10.0)]
    alpha_limit: f64,

    /// Acceleration window (0 runs plain Picard on both sides)
    #[arg(long, default_value_t = 10)]
    history: usize,

    /// Hard cap on solver iterations
    #[arg(long, default_value_t = 100)]
    max_iters: usize,

    /// Gaussian noise (std dev, meters) added to each misaligned source
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,

    /// Subsample the reference cloud to this many points before the sweep
    #[arg(long)]
    subsample: Option<usize>,

    /// Master seed; the whole sweep is deterministic given this
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// CSV output path
    #[arg(long)]
    out: PathBuf,

    /// Which drivers to run: both, picard or aa
    #[arg(long, default_value = "both")]
    mode: String,
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Parse { .. } => 2,
        Error::NoSuccessfulTrials => 3,
        _ => 1,
    }
}

fn load_reference(cli: &Cli) -> aa_icp::Result<PointCloud> {
    if let Some(path) = &cli.input {
        let format = CloudFormat::from_extension(path).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "cannot infer a cloud format from '{}' (expected .ply, .xyz or .txt)",
                path.display()
            ))
        })?;
        load_cloud(path, format)
    } else {
        let kind = cli
            .shape
            .as_deref()
            .expect("clap guarantees --input or --shape")
            .parse()?;
        make_test_shape(kind, SHAPE_POINTS, cli.seed)
    }
}

fn print_report(cli: &Cli, cfg: &SweepConfig, result: &SweepResult) {
    println!(
        "wrote {} trial rows to {}",
        result.rows.len(),
        cli.out.display()
    );
    for summary in &result.summaries {
        let label = format!("{} = {}", cfg.axis, summary.axis_value);
        match &summary.stats {
            Some(s) => println!(
                "{label}: median speed-up {:.1}%, mean {:.1}%, accelerated {:.0}%, \
                 error improved {:.0}%, reset iterations {:.1}%, {} trials ({} failed)",
                s.median_speedup * 100.0,
                s.mean_speedup * 100.0,
                s.fraction_accelerated * 100.0,
                s.fraction_error_improved * 100.0,
                s.reset_fraction * 100.0,
                s.trials,
                s.failed,
            ),
            None => println!("{label}: no paired statistics in mode '{}'", cfg.mode),
        }
    }
}

fn run(cli: &Cli) -> aa_icp::Result<()> {
    let cfg = SweepConfig {
        axis: cli.axis.parse()?,
        values: cli.values.clone(),
        trials: cli.trials,
        seed: cli.seed,
        noise_sigma: cli.noise_sigma,
        subsample_to: cli.subsample,
        mode: cli.mode.parse()?,
        solver: AaConfig {
            history_limit: cli.history,
            alpha_limit: cli.alpha_limit,
            epsilon: cli.epsilon,
            max_iterations: cli.max_iters,
            ..AaConfig::default()
        },
    };
    cfg.validate()?;
    let reference = load_reference(cli)?;
    let result = run_sweep(&reference, &cfg)?;
    write_csv(&cli.out, &result.rows)?;
    print_report(cli, &cfg, &result);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let wants_exit_zero =
                matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if wants_exit_zero {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
