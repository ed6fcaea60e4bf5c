//! Runs every bundled scenario and prints its summary.
//!
//! `cargo run --release --example scenario_suite [-- --quiet-noise]`

use lattice_flight::harness::{run_scenario, scenario_suite};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let noiseless = std::env::args().any(|a| a == "--quiet-noise");
    for scenario in scenario_suite()? {
        let scenario = if noiseless { scenario.without_noise() } else { scenario };
        let out = run_scenario(&scenario)?;
        println!("{}", out.summary.render());
        let a = &out.summary.final_adaptive;
        println!(
            "m̂ = {:.5} (true {:.5})  τ̂ = {:.3e}  true τ^s = {:.3e}\n",
            a.mass,
            scenario.structure.truth.total_mass,
            a.static_torque.transpose(),
            scenario.structure.truth.static_torque.transpose()
        );
    }
    Ok(())
}
