//! Backstepping altitude/lateral control with mass adaptation, adaptive
//! attitude control with inertia and static-torque estimation, and the
//! per-agent setpoint extraction.
//!
//! All laws are written in the structure frame with Euler-angle rates as
//! the angular velocity, matching the plant in [`crate::dynamics`].

mod controller;
mod lyapunov;
mod setpoints;

use nalgebra::{Matrix3, Vector3};

use crate::flexibility::FlexState;
use crate::structure::StructureGeometry;
use crate::GRAVITY;

pub use controller::{ControlCommand, Controller, ControllerConfig, Reference};
pub use lyapunov::{altitude_lyapunov, attitude_lyapunov, mass_lyapunov};
pub use setpoints::{agent_setpoints, AgentSetpoint};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControlError {
    #[error("gain `{name}` must be strictly positive, found {value}")]
    NonPositiveGain { name: &'static str, value: f64 },
    #[error("expected {expected} agents, found {found}")]
    AgentCount { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionGains {
    pub kz1: f64,
    pub kz2: f64,
    pub kx1: f64,
    pub kx2: f64,
    pub ky1: f64,
    pub ky2: f64,
    /// Mass adaptation rate `σ_m`.
    pub sigma_m: f64,
    /// Clamp on the commanded roll and pitch, rad.
    pub angle_max: f64,
}

impl Default for PositionGains {
    fn default() -> Self {
        // the lateral plant is ẍ ≈ gθ, so the effective lateral gains are
        // scaled by g; small values keep the loop well below the attitude one
        Self {
            kz1: 2.0,
            kz2: 2.0,
            kx1: 0.3,
            kx2: 0.3,
            ky1: 0.3,
            ky2: 0.3,
            sigma_m: 0.02,
            angle_max: 0.25,
        }
    }
}

impl PositionGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        for (name, value) in [
            ("kz1", self.kz1),
            ("kz2", self.kz2),
            ("kx1", self.kx1),
            ("kx2", self.kx2),
            ("ky1", self.ky1),
            ("ky2", self.ky2),
            ("sigma_m", self.sigma_m),
            ("angle_max", self.angle_max),
        ] {
            positive(name, value)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeGains {
    pub k_phi: Matrix3<f64>,
    pub k_omega: Matrix3<f64>,
    /// Inertia adaptation gain `Λ`.
    pub lambda: Matrix3<f64>,
    /// Static-torque adaptation rate.
    pub sigma_tau: f64,
}

impl Default for AttitudeGains {
    fn default() -> Self {
        Self {
            k_phi: Matrix3::from_diagonal(&Vector3::new(10.0, 10.0, 4.0)),
            k_omega: Matrix3::from_diagonal(&Vector3::new(10.0, 10.0, 4.0)),
            lambda: Matrix3::from_diagonal_element(2e-4),
            sigma_tau: 2e-3,
        }
    }
}

impl AttitudeGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        for (name, m) in [
            ("k_phi", &self.k_phi),
            ("k_omega", &self.k_omega),
            ("lambda", &self.lambda),
        ] {
            for i in 0..3 {
                positive(name, m[(i, i)])?;
            }
        }
        positive("sigma_tau", self.sigma_tau)
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), ControlError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ControlError::NonPositiveGain { name, value })
    }
}

/// The controller's estimates of the uncertain plant parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveState {
    pub mass: f64,
    pub inertia: Matrix3<f64>,
    pub static_torque: Vector3<f64>,
}

/// Projection limits keeping the estimates physical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveFloors {
    pub mass: f64,
    pub inertia_diagonal: Vector3<f64>,
}

impl AdaptiveFloors {
    /// `m̂ ≥ 0.2·m_hw`, `diag Ĵ ≥ 0.1·diag Ĵ(0)`.
    pub fn from_initial(hardware_mass: f64, inertia: &Matrix3<f64>) -> Self {
        Self {
            mass: 0.2 * hardware_mass,
            inertia_diagonal: inertia.diagonal() * 0.1,
        }
    }
}

/// Tracking errors at one control tick.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorState {
    pub e_z: f64,
    pub de_z: f64,
    pub s_z: f64,
    pub e_x: f64,
    pub de_x: f64,
    pub e_y: f64,
    pub de_y: f64,
    /// `Γ - Γ^d`.
    pub e_att: Vector3<f64>,
    /// `Ω - Ω^d + K_φ e`.
    pub z_att: Vector3<f64>,
}

impl ErrorState {
    /// Position errors `X - X^d` with derivatives, `s_z = ė_z + K_z1 e_z`.
    pub fn position(error: &Vector3<f64>, rate: &Vector3<f64>, gains: &PositionGains) -> Self {
        Self {
            e_x: error.x,
            de_x: rate.x,
            e_y: error.y,
            de_y: rate.y,
            e_z: error.z,
            de_z: rate.z,
            s_z: rate.z + gains.kz1 * error.z,
            ..Self::default()
        }
    }

    /// Adds the attitude errors; `desired_rates` is `Ω^d`.
    pub fn with_attitude(
        mut self,
        attitude: &Vector3<f64>,
        rates: &Vector3<f64>,
        desired: &Vector3<f64>,
        desired_rates: &Vector3<f64>,
        gains: &AttitudeGains,
    ) -> Self {
        self.e_att = (attitude - desired).map(crate::structure::wrap_angle);
        self.z_att = rates - desired_rates + gains.k_phi * self.e_att;
        self
    }
}

/// Small-deflection coupling terms of one agent.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct XiTerms {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Per-agent `ξ` terms from the attitude deviations `(Δφ, Δθ, Δψ)` about
/// hover and the previous tick's differential thrusts `ΔT_i`.
pub fn xi_terms(
    geometry: &StructureGeometry,
    attitude_deltas: &Vector3<f64>,
    delta_thrusts: &[f64],
    mass_estimate: f64,
) -> Vec<XiTerms> {
    let n = geometry.n_agents() as f64;
    let (dphi, dtheta, dpsi) = (attitude_deltas.x, attitude_deltas.y, attitude_deltas.z);
    geometry
        .agent_poses
        .iter()
        .zip(delta_thrusts)
        .map(|(pose, &dt)| {
            let (sa, ca) = pose.alpha.sin_cos();
            XiTerms {
                x: sa * dpsi / n - ca * dt / mass_estimate,
                y: -ca * dpsi / n - sa * dt / mass_estimate,
                z: (-GRAVITY * sa * dphi + GRAVITY * ca * dtheta) / n,
            }
        })
        .collect()
}

/// `Σ γ_i ξ_i` per axis.
pub fn weighted_xi(xi: &[XiTerms], flex: &FlexState) -> Vector3<f64> {
    xi.iter()
        .zip(flex.gammas())
        .fold(Vector3::zeros(), |acc, (t, g)| acc + Vector3::new(t.x, t.y, t.z) * g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AltitudeCommand {
    /// `ΣΔT_i = m̂·u`.
    pub delta_total: f64,
    /// `T^d`, hover feed-forward plus differential, divided by the vertical
    /// projection `kappa` of the summed thrust.
    pub total: f64,
    /// Commanded vertical acceleration `u`.
    pub accel: f64,
}

/// Vertical acceleration command
/// `u = -(K_z1+K_z2) ė_z - (1+K_z1 K_z2) e_z - Σγξ^z`.
pub fn altitude_accel(errors: &ErrorState, xi_z: f64, gains: &PositionGains) -> f64 {
    -(gains.kz1 + gains.kz2) * errors.de_z - (1.0 + gains.kz1 * gains.kz2) * errors.e_z - xi_z
}

/// Altitude law. `kappa` is the fraction of the summed thrust that acts
/// vertically (`1` for a level rigid lattice).
pub fn altitude_control(
    errors: &ErrorState,
    xi_z: f64,
    gains: &PositionGains,
    mass_estimate: f64,
    kappa: f64,
) -> AltitudeCommand {
    let accel = altitude_accel(errors, xi_z, gains);
    let delta_total = mass_estimate * accel;
    AltitudeCommand {
        delta_total,
        total: (mass_estimate * GRAVITY + delta_total) / kappa,
        accel,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MassAdaptationLaw {
    /// `ṁ̂ = -σ s_z u`, which ignores the gravity feed-forward the mass
    /// estimate also scales.
    WithoutGravity,
    /// `ṁ̂ = -σ s_z (g + u)`, what the Lyapunov argument requires when the
    /// controller commands `T^d = m̂ (g + u)`.
    #[default]
    GravityCompensated,
}

/// Factor multiplying `s_z` in the mass update law, from the errors the
/// tick's command was computed with.
pub fn mass_adaptation_drive(errors: &ErrorState, xi_z: f64, gains: &PositionGains, law: MassAdaptationLaw) -> f64 {
    // −K1(s − K1 e) − e − K2 s − Σγξ^z, identical to the acceleration command
    let bracket = -gains.kz1 * (errors.s_z - gains.kz1 * errors.e_z) - errors.e_z - gains.kz2 * errors.s_z - xi_z;
    match law {
        MassAdaptationLaw::WithoutGravity => bracket,
        MassAdaptationLaw::GravityCompensated => GRAVITY + bracket,
    }
}

/// `m̂ ← m̂ - σ · drive · ∫s_z dt`, projected onto `≥ floor`. The
/// controller passes `dt · s_z` measured at the end of the tick, a backward
/// Euler step.
pub fn mass_adaptation_step(mass_estimate: f64, drive: f64, s_integral: f64, gains: &PositionGains, floor: f64) -> f64 {
    (mass_estimate - gains.sigma_m * drive * s_integral).max(floor)
}

/// Roll and pitch commands of the lateral law, clamped to `angle_max`.
///
/// With `ẍ ≈ gθ` and `ÿ ≈ -gφ`, pitch tracks x and roll tracks -y; the
/// coupling terms enter as accelerations and are divided by `g`.
pub fn lateral_control(errors: &ErrorState, xi_x: f64, xi_y: f64, gains: &PositionGains) -> (f64, f64) {
    let theta = -(gains.kx1 + gains.kx2) * errors.de_x - (1.0 + gains.kx1 * gains.kx2) * errors.e_x - xi_x / GRAVITY;
    let phi = (gains.ky1 + gains.ky2) * errors.de_y + (1.0 + gains.ky1 * gains.ky2) * errors.e_y + xi_y / GRAVITY;
    let clamp = |a: f64| a.clamp(-gains.angle_max, gains.angle_max);
    (clamp(theta), clamp(phi))
}

/// `A = -K_φ(z - K_φ e) - e - K_ω z`, the angular acceleration the
/// backstepping design asks for.
pub fn attitude_accel(errors: &ErrorState, gains: &AttitudeGains) -> Vector3<f64> {
    let (e, z) = (&errors.e_att, &errors.z_att);
    -gains.k_phi * (z - gains.k_phi * e) - e - gains.k_omega * z
}

/// `τ^c = Ω×(ĴΩ) + Ĵ A - τ̂^s`.
pub fn attitude_control(
    errors: &ErrorState,
    rates: &Vector3<f64>,
    adaptive: &AdaptiveState,
    gains: &AttitudeGains,
) -> Vector3<f64> {
    rates.cross(&(adaptive.inertia * rates)) + adaptive.inertia * attitude_accel(errors, gains) - adaptive.static_torque
}

/// Integrates `Ĵ̇ = -z Aᵀ Λ` and `τ̂̇^s = σ z` over one tick with `A` held,
/// given `∫z dt`; the diagonal of `Ĵ` is projected onto its floor.
pub fn attitude_adaptation_step(
    adaptive: &AdaptiveState,
    accel: &Vector3<f64>,
    z_integral: &Vector3<f64>,
    gains: &AttitudeGains,
    floors: &AdaptiveFloors,
) -> (Matrix3<f64>, Vector3<f64>) {
    let mut inertia = adaptive.inertia - z_integral * accel.transpose() * gains.lambda;
    for i in 0..3 {
        inertia[(i, i)] = inertia[(i, i)].max(floors.inertia_diagonal[i]);
    }
    let torque = adaptive.static_torque + z_integral * gains.sigma_tau;
    (inertia, torque)
}
