use nalgebra::{Matrix3, Matrix3xX};

use crate::flexibility::FlexState;
use crate::structure::{MassProperties, StructureGeometry};
use crate::GRAVITY;

/// Translational dynamics linearised about level hover with equal thrust
/// shares `T_i° = m g / n`:
/// `ΔẌ = A_ω·[Δφ, Δθ, Δψ] + B_ω·ΔT`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub a_omega: Matrix3<f64>,
    pub b_omega: Matrix3xX<f64>,
    /// `sin γ ≈ γ`, `cos γ ≈ 1` variants.
    pub a_omega_small: Matrix3<f64>,
    pub b_omega_small: Matrix3xX<f64>,
}

pub fn linearize(geometry: &StructureGeometry, flex: &FlexState, mass: &MassProperties) -> Linearization {
    let n = geometry.n_agents();
    let nf = n as f64;
    let m = mass.total_mass;
    let mut c_sum = 0.0;
    let mut sa_sg = 0.0;
    let mut ca_sg = 0.0;
    let mut sa_g = 0.0;
    let mut ca_g = 0.0;
    for (pose, f) in geometry.agent_poses.iter().zip(&flex.agents) {
        let (sa, ca) = pose.alpha.sin_cos();
        c_sum += f.gamma.cos();
        sa_sg += sa * f.gamma.sin();
        ca_sg += ca * f.gamma.sin();
        sa_g += sa * f.gamma;
        ca_g += ca * f.gamma;
    }
    let skew = |c: f64, sa: f64, ca: f64| {
        Matrix3::new(
            0.0,
            c / nf,
            sa / nf, //
            -c / nf,
            0.0,
            -ca / nf, //
            -sa / nf,
            ca / nf,
            0.0,
        ) * GRAVITY
    };
    let b = |small: bool| {
        Matrix3xX::from_fn(n, |r, i| {
            let a = geometry.agent_poses[i].alpha;
            let g = flex.agents[i].gamma;
            let (sg, cg) = if small { (g, 1.0) } else { g.sin_cos() };
            match r {
                0 => -a.cos() * sg / m,
                1 => -a.sin() * sg / m,
                _ => cg / m,
            }
        })
    };
    Linearization {
        a_omega: skew(c_sum, sa_sg, ca_sg),
        b_omega: b(false),
        a_omega_small: skew(nf, sa_g, ca_g),
        b_omega_small: b(true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flexibility::FlexEntry;
    use crate::structure::Structure;

    #[test]
    fn rigid_limit() {
        let s = Structure::parse(include_str!("../../scenarios/quad.lattice")).unwrap();
        let lin = linearize(&s.geometry, &FlexState::rigid(4), &s.nominal);
        let expected = Matrix3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0) * GRAVITY;
        assert!((lin.a_omega - expected).norm() < 1e-12);
        for i in 0..4 {
            assert_eq!(lin.b_omega[(0, i)], 0.0);
            assert_eq!(lin.b_omega[(1, i)], 0.0);
            assert!((lin.b_omega[(2, i)] - 1.0 / s.nominal.total_mass).abs() < 1e-15);
        }
    }

    #[test]
    fn skew_symmetric_for_any_bending() {
        let s = Structure::parse(include_str!("../../scenarios/hexacopter.lattice")).unwrap();
        let flex = FlexState {
            agents: (0..6)
                .map(|i| FlexEntry {
                    gamma: 0.02 * i as f64 - 0.04,
                    delta_z: 0.0,
                })
                .collect(),
        };
        let lin = linearize(&s.geometry, &flex, &s.nominal);
        assert!((lin.a_omega + lin.a_omega.transpose()).norm() < 1e-15);
        assert!((lin.a_omega_small + lin.a_omega_small.transpose()).norm() < 1e-15);
    }
}
