use std::fmt::Write as _;

use nalgebra::DVector;

use crate::allocation::{self, build_gamma, gamma_rank, AllocationProblem, Metric, MetricParams};
use crate::flexibility::{static_deflection, BeamParams};
use crate::structure::Structure;
use crate::GRAVITY;

/// Human-readable digest of a lattice: agent poses, mass properties, the
/// allocation matrix and the bending at an equal-share hover.
pub fn inspect(structure: &Structure) -> String {
    let mut out = String::new();
    let spec = &structure.spec;
    let geo = &structure.geometry;
    let n = structure.n_agents();
    let _ = writeln!(
        out,
        "{n} copters, {} polygons, {} rods; hardware mass {:.5} kg",
        spec.n_polygons(),
        spec.rods.len(),
        spec.hardware_mass()
    );
    if let Some(p) = &spec.payload {
        let _ = writeln!(
            out,
            "payload {:.5} kg at ({:.4}, {:.4}, {:.4}) m, {}",
            p.mass,
            p.offset.x,
            p.offset.y,
            p.offset.z,
            if p.known { "known" } else { "unknown to the controller" }
        );
    }
    let _ = writeln!(out, "x_s points at copter {}", geo.xs_agent);

    let nominal = &structure.nominal;
    let truth = &structure.truth;
    let d = nominal.inertia.diagonal();
    let _ = writeln!(
        out,
        "nominal mass {:.5} kg, true mass {:.5} kg",
        nominal.total_mass, truth.total_mass
    );
    let _ = writeln!(out, "inertia diag ({:.4e}, {:.4e}, {:.4e}) kg·m²", d.x, d.y, d.z);
    let t = truth.static_torque;
    let _ = writeln!(out, "static torque ({:.4e}, {:.4e}, {:.4e}) N·m", t.x, t.y, t.z);

    let gamma = build_gamma(geo);
    let hover_total = truth.total_mass * GRAVITY;
    // level hover: the thrust torques cancel the static torque
    let hover = allocation::solve_pseudo_inverse(&AllocationProblem {
        gamma: gamma.clone(),
        rhs: nalgebra::Vector3::new(-t.x, -t.y, hover_total),
        // no agent can need more than the whole weight
        t_max: hover_total,
        metric: Metric::PseudoInverse,
        params: MetricParams {
            batteries: vec![4.0; n],
            ..MetricParams::default()
        },
    })
    .map(|r| r.thrusts)
    .unwrap_or_else(|_| DVector::from_element(n, hover_total / n as f64));
    let _ = writeln!(out, "allocation matrix rank {}", gamma_rank(&gamma));

    let beams = BeamParams::for_structure(spec);
    let _ = writeln!(
        out,
        "agent      x [m]      y [m]      z [m]  alpha [deg]  hover T [N]  gamma [deg]  delta_z [mm]"
    );
    for (i, pose) in geo.agent_poses.iter().enumerate() {
        let c = pose.displacement;
        let flex = beams[i]
            .map(|b| static_deflection(hover[i], &b, GRAVITY))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{i:>5}  {:>9.4}  {:>9.4}  {:>9.4}  {:>11.2}  {:>11.4}  {:>11.3}  {:>12.3}",
            c.x,
            c.y,
            c.z,
            pose.alpha.to_degrees(),
            hover[i],
            flex.gamma.to_degrees(),
            flex.delta_z * 1e3
        );
    }
    out
}
