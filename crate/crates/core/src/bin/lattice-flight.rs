use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lattice_flight::allocation::{render_result, AllocationRequest, Metric, RequestError};
use lattice_flight::harness::{self, bundled, bundled_lattice, HarnessError, Scenario};
use lattice_flight::structure::Structure;

/// Simulate, compare and inspect multi-copter lattice structures.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fly one scenario and write its telemetry CSV.
    Simulate {
        /// Scenario file, or the name of a bundled scenario.
        #[arg(long)]
        scenario: String,
        /// Override the scenario's allocation metric (pinv, ft, fe, fb).
        #[arg(long)]
        metric: Option<Metric>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the telemetry CSV.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Fly without measurement noise.
        #[arg(long)]
        no_noise: bool,
    },
    /// Fly one scenario under several metrics and tabulate the results.
    Compare {
        #[arg(long)]
        scenario: String,
        /// Comma-separated metrics.
        #[arg(long, value_delimiter = ',', default_value = "pinv,ft,fe,fb")]
        metrics: Vec<Metric>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print agent poses, mass properties and hover bending of a lattice.
    Inspect {
        /// Lattice file, or the name of a bundled lattice.
        #[arg(long)]
        structure: String,
    },
    /// Solve one allocation problem read from standard input.
    Allocate,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Request(#[from] RequestError),
    #[error("{0}")]
    Other(String),
    #[error("{degraded:.2} % of ticks fell back to least squares (threshold {threshold:.2} %)")]
    Degraded { degraded: f64, threshold: f64 },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Harness(e) => e.exit_code() as u8,
            CliError::Degraded { .. } => 3,
            _ => 1,
        }
    }
}

/// Bundled lattices answer to their file name with or without extension.
fn lattice_text(name: &str) -> Option<&'static str> {
    bundled_lattice(name).or_else(|| bundled_lattice(&format!("{name}.lattice")))
}

fn load_scenario(name: &str) -> Result<Scenario, HarnessError> {
    let path = Path::new(name);
    if path.is_file() {
        Scenario::from_file(path)
    } else {
        bundled(name)
    }
}

fn simulate(
    scenario: &str,
    metric: Option<Metric>,
    seed: Option<u64>,
    out: &Path,
    no_noise: bool,
) -> Result<(), CliError> {
    let mut s = load_scenario(scenario)?;
    if let Some(m) = metric {
        s = s.with_metric(m);
    }
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if no_noise {
        s = s.without_noise();
    }
    let run = harness::run_scenario(&s)?;
    let path = run.write_to(out)?;
    print!("{}", run.summary.render());
    println!("telemetry       {}", path.display());
    let degraded = run.summary.degraded_fraction();
    let threshold = s.allocation.fallback_threshold;
    if degraded > threshold {
        return Err(CliError::Degraded {
            degraded: 100.0 * degraded,
            threshold: 100.0 * threshold,
        });
    }
    Ok(())
}

fn compare(scenario: &str, metrics: &[Metric], out: &Path) -> Result<(), CliError> {
    let s = load_scenario(scenario)?;
    let cmp = harness::compare_metrics(&s, metrics)?;
    let paths = cmp.write_to(out)?;
    print!("{}", cmp.table());
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn inspect(name: &str) -> Result<(), CliError> {
    let path = Path::new(name);
    let structure = if path.is_file() {
        Structure::from_file(path).map_err(HarnessError::from)?
    } else {
        let text = lattice_text(name).ok_or_else(|| CliError::Other(format!("no file or bundled lattice `{name}`")))?;
        Structure::parse(text).map_err(HarnessError::from)?
    };
    print!("{}", harness::inspect(&structure));
    Ok(())
}

fn allocate() -> Result<(), CliError> {
    let mut text = String::new();
    std::io::stdin()
        .read_to_string(&mut text)
        .map_err(|e| CliError::Other(format!("cannot read standard input: {e}")))?;
    let request = AllocationRequest::parse_with(&text, |name| {
        if Path::new(name).is_file() {
            std::fs::read_to_string(name).map_err(|e| RequestError::Invalid(format!("cannot read {name}: {e}")))
        } else {
            lattice_text(name)
                .map(str::to_string)
                .ok_or_else(|| RequestError::Invalid(format!("no file or bundled lattice `{name}`")))
        }
    })?;
    print!("{}", render_result(&request.run()));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate {
            scenario,
            metric,
            seed,
            out,
            no_noise,
        } => simulate(scenario, *metric, *seed, out, *no_noise),
        Command::Compare { scenario, metrics, out } => compare(scenario, metrics, out),
        Command::Inspect { structure } => inspect(structure),
        Command::Allocate => allocate(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
