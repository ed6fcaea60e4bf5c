//! Flies the pentacopter scenarios under competing metrics and writes the
//! aligned telemetry plus a summary table.
//!
//! `cargo run --release --example compare_metrics [-- out_dir]`

use std::path::PathBuf;

use lattice_flight::allocation::Metric;
use lattice_flight::harness::{bundled, compare_metrics};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "out".into()).into();
    for (name, metrics) in [
        ("pentacopter", [Metric::Fe, Metric::PseudoInverse]),
        ("pentacopter_depleted", [Metric::Fb, Metric::PseudoInverse]),
    ] {
        let cmp = compare_metrics(&bundled(name)?, &metrics)?;
        println!("== {name}");
        print!("{}", cmp.table());
        for run in &cmp.runs {
            let means: Vec<String> = run.summary.mean_thrust.iter().map(|t| format!("{t:.4}")).collect();
            println!(
                "{:<5} mean thrust per agent: {}",
                run.summary.metric.name(),
                means.join(" ")
            );
        }
        for path in cmp.write_to(&out)? {
            println!("wrote {}", path.display());
        }
        println!();
    }
    Ok(())
}
