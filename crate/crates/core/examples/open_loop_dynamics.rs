//! Open-loop plant: the T-copter under the nominal hover split, with and
//! without an off-centre payload, rigid and flexible.

use lattice_flight::allocation::{build_gamma, solve_pseudo_inverse, AllocationProblem, Metric, MetricParams};
use lattice_flight::dynamics::{step, FlightState, PlantParams, ThrustVector};
use lattice_flight::harness::bundled_lattice;
use lattice_flight::structure::{PayloadSpec, Structure, StructureSpec};
use lattice_flight::GRAVITY;
use nalgebra::Vector3;

fn fly(structure: &Structure, rigid: bool) -> Result<FlightState, Box<dyn std::error::Error>> {
    let mut plant = PlantParams::from_structure(structure, 0.02)?;
    if rigid {
        plant = plant.rigid();
    }
    let n = structure.n_agents();
    // level hover for the structure the controller believes in
    let hover = solve_pseudo_inverse(&AllocationProblem {
        gamma: build_gamma(&structure.geometry),
        rhs: Vector3::new(0.0, 0.0, structure.nominal.total_mass * GRAVITY),
        t_max: 0.6,
        metric: Metric::PseudoInverse,
        params: MetricParams {
            batteries: vec![4.0; n],
            ..MetricParams::default()
        },
    })?;
    let command = ThrustVector {
        thrusts: hover.thrusts,
        ..ThrustVector::zeros(n)
    };
    let mut state = FlightState::at_rest(Vector3::new(0.0, 0.0, 1.0), n);
    for _ in 0..500 {
        state = step(&state, &command, 1e-3, &plant)?;
    }
    Ok(state)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = StructureSpec::parse(bundled_lattice("tcopter.lattice").expect("bundled"))?;
    let bare = Structure::new(spec.clone())?;
    let loaded = Structure::new(StructureSpec {
        payload: Some(PayloadSpec {
            mass: 0.01,
            offset: Vector3::new(0.03, -0.05, 0.0),
            known: false,
        }),
        ..spec
    })?;
    println!("0.5 s at the nominal hover split:");
    for (label, s) in [("bare", &bare), ("payload", &loaded)] {
        for rigid in [true, false] {
            let x = fly(s, rigid)?;
            println!(
                "{label:<8} {:<8} z = {:.4} m  φ = {:+.4}°  θ = {:+.4}°",
                if rigid { "rigid" } else { "flexible" },
                x.position.z,
                x.attitude.x.to_degrees(),
                x.attitude.y.to_degrees()
            );
        }
    }
    Ok(())
}
