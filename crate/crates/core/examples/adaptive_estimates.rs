//! Follows the T-copter's adaptive estimates as they converge onto the
//! unknown payload's mass and static torque.

use lattice_flight::harness::{bundled, run_scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = bundled("tcopter")?;
    let truth = &scenario.structure.truth;
    let out = run_scenario(&scenario)?;
    println!(
        "{:>6} {:>9} {:>11} {:>11} {:>9}",
        "t [s]", "m̂ [kg]", "τ̂x [N·m]", "τ̂y [N·m]", "e_z [m]"
    );
    for r in out.records.iter().step_by(1000) {
        println!(
            "{:>6.1} {:>9.5} {:>11.3e} {:>11.3e} {:>9.5}",
            r.time,
            r.mass_estimate,
            r.torque_estimate.x,
            r.torque_estimate.y,
            r.position.z - r.reference.z
        );
    }
    println!(
        "{:>6} {:>9.5} {:>11.3e} {:>11.3e}",
        "truth", truth.total_mass, truth.static_torque.x, truth.static_torque.y
    );
    Ok(())
}
