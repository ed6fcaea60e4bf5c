//! Solves one roll-heavy demand on the asymmetric hexacopter under every
//! metric and prints the resulting thrusts.

use lattice_flight::allocation::{allocate, build_gamma, AllocationProblem, Metric, MetricParams};
use lattice_flight::harness::bundled_lattice;
use lattice_flight::structure::Structure;
use lattice_flight::GRAVITY;
use nalgebra::Vector3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = Structure::parse(bundled_lattice("hexacopter.lattice").expect("bundled"))?;
    let gamma = build_gamma(&s.geometry);
    let n = s.n_agents();
    let weight = s.truth.total_mass * GRAVITY;
    // one agent's pack is running low
    let mut batteries = vec![4.1; n];
    batteries[3] = 3.6;

    println!("rhs = (0.02 N·m, -0.01 N·m, {weight:.3} N)");
    println!(
        "{:<6} {:>9} {:>9} {:>12}  thrusts [N]",
        "metric", "max T", "ΣT", "status"
    );
    for metric in Metric::ALL {
        let problem = AllocationProblem {
            gamma: gamma.clone(),
            rhs: Vector3::new(0.02, -0.01, weight),
            t_max: 0.6,
            metric,
            params: MetricParams {
                batteries: batteries.clone(),
                delta_volt: 2.9,
                ..MetricParams::default()
            },
        };
        let r = allocate(&problem);
        println!(
            "{:<6} {:>9.4} {:>9.4} {:>12}  {:.4?}",
            metric.name(),
            r.thrusts.max(),
            r.thrusts.sum(),
            r.status.to_string(),
            r.thrusts.as_slice()
        );
    }
    Ok(())
}
