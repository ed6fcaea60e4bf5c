//! Rigid-plus-flexible flight dynamics of the lattice.
//!
//! Thrust of agent `i` acts along `Rot(z, α_i)·Rot(y, -γ_i)·e3` in `C_s` and
//! is applied at `^sc_i + δ_i^z e3`. Angular rates are integrated directly as
//! Euler-angle rates.

mod linear;
mod plant;

use nalgebra::{DVector, Matrix3, Matrix3xX, Rotation3, Vector3};

use crate::flexibility::FlexState;
use crate::structure::{MassProperties, StructureGeometry};
use crate::GRAVITY;

pub use linear::{linearize, Linearization};
pub use plant::{flex_after, rk4_step, step, DerivativeModel, PlantParams, StateDerivative};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("inertia matrix is singular")]
    SingularInertia,
    #[error("state left the finite range: {0}")]
    NonFiniteState(&'static str),
    #[error("time step must be positive, found {0}")]
    InvalidStep(f64),
    #[error("expected {expected} agents, found {found}")]
    AgentCount { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlightState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// `(φ, θ, ψ)`.
    pub attitude: Vector3<f64>,
    /// Euler-angle rates `(φ̇, θ̇, ψ̇)`.
    pub rates: Vector3<f64>,
    pub flex: FlexState,
}

impl FlightState {
    pub fn at_rest(position: Vector3<f64>, n_agents: usize) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            attitude: Vector3::zeros(),
            rates: Vector3::zeros(),
            flex: FlexState::rigid(n_agents),
        }
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        rotation_zyx(&self.attitude)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.attitude.iter().all(|v| v.is_finite())
            && self.rates.iter().all(|v| v.is_finite())
    }
}

/// Per-agent thrusts `T_i` and yaw moments `M_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThrustVector {
    pub thrusts: DVector<f64>,
    pub moments: DVector<f64>,
}

impl ThrustVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            thrusts: DVector::zeros(n),
            moments: DVector::zeros(n),
        }
    }

    pub fn uniform(n: usize, thrust: f64) -> Self {
        Self {
            thrusts: DVector::from_element(n, thrust),
            moments: DVector::zeros(n),
        }
    }

    pub fn len(&self) -> usize {
        self.thrusts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thrusts.is_empty()
    }
}

/// `Rot_z(ψ)·Rot_y(θ)·Rot_x(φ)`.
pub fn rotation_zyx(attitude: &Vector3<f64>) -> Rotation3<f64> {
    Rotation3::from_euler_angles(attitude.x, attitude.y, attitude.z)
}

/// Thrust directions: column `i` is `[-sγ cα, -sγ sα, cγ]`.
pub fn psi_matrix(geometry: &StructureGeometry, flex: &FlexState) -> Matrix3xX<f64> {
    let n = geometry.n_agents();
    Matrix3xX::from_fn(n, |r, i| {
        let a = geometry.agent_poses[i].alpha;
        let g = flex.agents[i].gamma;
        match r {
            0 => -g.sin() * a.cos(),
            1 => -g.sin() * a.sin(),
            _ => g.cos(),
        }
    })
}

/// Thrust-to-torque map of the bent lattice, planar arms only.
pub fn xi_matrix(geometry: &StructureGeometry, flex: &FlexState) -> Matrix3xX<f64> {
    let n = geometry.n_agents();
    Matrix3xX::from_fn(n, |r, i| {
        let pose = &geometry.agent_poses[i];
        let (sa, ca) = pose.alpha.sin_cos();
        let (sg, cg) = flex.agents[i].gamma.sin_cos();
        let d = flex.agents[i].delta_z;
        let (x, y) = (pose.x(), pose.y());
        match r {
            0 => d * sg * sa + y * cg,
            1 => -d * sg * ca - x * cg,
            _ => y * sg * ca - x * sg * sa,
        }
    })
}

/// `ẍ = -g e3 + (1/m)·R·Ψ·T` in the inertial frame.
pub fn translational_accel(
    state: &FlightState,
    thrusts: &DVector<f64>,
    mass: &MassProperties,
    geometry: &StructureGeometry,
) -> Vector3<f64> {
    let psi = psi_matrix(geometry, &state.flex);
    translational_accel_with(&state.rotation(), &psi, thrusts, mass.total_mass)
}

pub(crate) fn translational_accel_with(
    r: &Rotation3<f64>,
    psi: &Matrix3xX<f64>,
    thrusts: &DVector<f64>,
    mass: f64,
) -> Vector3<f64> {
    Vector3::new(0.0, 0.0, -GRAVITY) + r * (psi * thrusts) / mass
}

/// Which thrust-direction model to use for the yaw moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiModel {
    /// Full `Ψ`, used by the plant.
    Full,
    /// Every column `[0, 0, 1]`: yaw moments act on the z axis only.
    Simplified,
}

/// Solves `J Ω̇ = -Ω×(JΩ) + Ξ T + Ψ M + τ^s` for `Ω̇`.
pub fn rotational_accel(
    state: &FlightState,
    command: &ThrustVector,
    mass: &MassProperties,
    geometry: &StructureGeometry,
    psi_model: PsiModel,
) -> Result<Vector3<f64>, DynamicsError> {
    let j_inv = mass.inertia.try_inverse().ok_or(DynamicsError::SingularInertia)?;
    let xi = xi_matrix(geometry, &state.flex);
    let psi = match psi_model {
        PsiModel::Full => psi_matrix(geometry, &state.flex),
        PsiModel::Simplified => {
            let mut p = Matrix3xX::zeros(geometry.n_agents());
            p.row_mut(2).fill(1.0);
            p
        }
    };
    let tau_s = mass.static_torque_at(&state.rotation());
    Ok(rotational_accel_with(
        &mass.inertia,
        &j_inv,
        &state.rates,
        &(xi * &command.thrusts + psi * &command.moments + tau_s),
    ))
}

pub(crate) fn rotational_accel_with(
    j: &Matrix3<f64>,
    j_inv: &Matrix3<f64>,
    rates: &Vector3<f64>,
    torque: &Vector3<f64>,
) -> Vector3<f64> {
    j_inv * (torque - rates.cross(&(j * rates)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flexibility::FlexEntry;
    use crate::structure::Structure;

    const QUAD: &str = include_str!("../../scenarios/quad.lattice");
    const TCOPTER: &str = include_str!("../../scenarios/tcopter.lattice");

    fn flex_with(n: usize, f: impl Fn(usize) -> FlexEntry) -> FlexState {
        FlexState {
            agents: (0..n).map(f).collect(),
        }
    }

    #[test]
    fn psi_rigid_and_bent() {
        let s = Structure::parse(QUAD).unwrap();
        let psi = psi_matrix(&s.geometry, &FlexState::rigid(4));
        for c in psi.column_iter() {
            assert_eq!(c, Vector3::new(0.0, 0.0, 1.0));
        }
        let mut geometry = s.geometry.clone();
        geometry.agent_poses[0].alpha = 0.0;
        let flex = flex_with(4, |i| FlexEntry {
            gamma: if i == 0 { 0.1 } else { 0.0 },
            delta_z: 0.0,
        });
        let psi = psi_matrix(&geometry, &flex);
        assert!((psi[(0, 0)] + 0.0998334).abs() < 1e-6);
        assert!(psi[(1, 0)].abs() < 1e-15);
        assert!((psi[(2, 0)] - 0.9950042).abs() < 1e-6);
    }

    #[test]
    fn xi_rigid_limit_matches_arms() {
        let s = Structure::parse(TCOPTER).unwrap();
        let xi = xi_matrix(&s.geometry, &FlexState::rigid(3));
        for (i, pose) in s.geometry.agent_poses.iter().enumerate() {
            assert_eq!(xi[(0, i)], pose.y());
            assert_eq!(xi[(1, i)], -pose.x());
            assert_eq!(xi[(2, i)], 0.0);
        }
    }

    #[test]
    fn quad_equal_bending_has_no_yaw_coupling() {
        let s = Structure::parse(QUAD).unwrap();
        let flex = flex_with(4, |_| FlexEntry {
            gamma: 0.05,
            delta_z: 0.004,
        });
        let xi = xi_matrix(&s.geometry, &flex);
        let sum: f64 = (0..4).map(|i| xi[(2, i)] * 0.3).sum();
        assert!(sum.abs() < 1e-15);
    }

    #[test]
    fn hover_and_double_thrust() {
        let s = Structure::parse(QUAD).unwrap();
        let m = s.truth.total_mass;
        let state = FlightState::at_rest(Vector3::zeros(), 4);
        let hover = DVector::from_element(4, m * GRAVITY / 4.0);
        assert!(translational_accel(&state, &hover, &s.truth, &s.geometry).norm() < 1e-12);
        let a = translational_accel(&state, &(hover * 2.0), &s.truth, &s.geometry);
        assert!((a - Vector3::new(0.0, 0.0, GRAVITY)).norm() < 1e-12);
    }

    #[test]
    fn pitched_hover_accelerates_forward() {
        let s = Structure::parse(QUAD).unwrap();
        let m = s.truth.total_mass;
        let mut state = FlightState::at_rest(Vector3::zeros(), 4);
        state.attitude.y = 0.1;
        let hover = DVector::from_element(4, m * GRAVITY / 4.0);
        let a = translational_accel(&state, &hover, &s.truth, &s.geometry);
        assert!((a.x - GRAVITY * 0.1_f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn rotational_zero_input() {
        let s = Structure::parse(QUAD).unwrap();
        let state = FlightState::at_rest(Vector3::zeros(), 4);
        let w = rotational_accel(&state, &ThrustVector::zeros(4), &s.truth, &s.geometry, PsiModel::Full).unwrap();
        assert_eq!(w, Vector3::zeros());
    }

    #[test]
    fn singular_inertia_is_reported() {
        let s = Structure::parse(QUAD).unwrap();
        let mut mass = s.truth.clone();
        mass.inertia = Matrix3::zeros();
        let state = FlightState::at_rest(Vector3::zeros(), 4);
        assert_eq!(
            rotational_accel(&state, &ThrustVector::zeros(4), &mass, &s.geometry, PsiModel::Full),
            Err(DynamicsError::SingularInertia)
        );
    }
}
