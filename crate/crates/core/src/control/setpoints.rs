use std::f64::consts::FRAC_PI_2;

use nalgebra::{Rotation3, Vector3};

use crate::structure::StructureGeometry;

/// What is sent to one copter's on-board autopilot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentSetpoint {
    pub roll: f64,
    pub pitch: f64,
    pub thrust: f64,
    pub moment: f64,
    /// Pitch within 1e-6 of ±π/2: roll and yaw are not separable there.
    pub gimbal_lock: bool,
}

/// Each agent's roll/pitch from `Rz(α_i)·R·Rz(α_i)ᵀ`, with thrust and yaw
/// moment passed through.
pub fn agent_setpoints(
    attitude: &Rotation3<f64>,
    geometry: &StructureGeometry,
    thrusts: &[f64],
    moments: &[f64],
) -> Vec<AgentSetpoint> {
    geometry
        .agent_poses
        .iter()
        .zip(thrusts.iter().zip(moments))
        .map(|(pose, (&thrust, &moment))| {
            let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), pose.alpha);
            let (roll, pitch, _) = (rz * attitude * rz.inverse()).euler_angles();
            AgentSetpoint {
                roll,
                pitch,
                thrust,
                moment,
                gimbal_lock: (pitch.abs() - FRAC_PI_2).abs() < 1e-6,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::Structure;

    const QUAD: &str = include_str!("../../scenarios/quad.lattice");

    #[test]
    fn identity_gives_level_agents() {
        let s = Structure::parse(QUAD).unwrap();
        let sp = agent_setpoints(&Rotation3::identity(), &s.geometry, &[0.3; 4], &[0.0; 4]);
        for a in &sp {
            assert!(a.roll.abs() < 1e-15 && a.pitch.abs() < 1e-15);
            assert_eq!(a.thrust, 0.3);
            assert!(!a.gimbal_lock);
        }
    }

    #[test]
    fn zero_offset_passes_attitude_through() {
        let mut s = Structure::parse(QUAD).unwrap();
        s.geometry.agent_poses[1].alpha = 0.0;
        let r = Rotation3::from_euler_angles(0.1, -0.2, 0.0);
        let sp = agent_setpoints(&r, &s.geometry, &[0.0; 4], &[0.0; 4]);
        assert!((sp[1].roll - 0.1).abs() < 1e-12);
        assert!((sp[1].pitch + 0.2).abs() < 1e-12);
    }

    #[test]
    fn quarter_turn_swaps_axes() {
        let mut s = Structure::parse(QUAD).unwrap();
        s.geometry.agent_poses[0].alpha = FRAC_PI_2;
        let theta = 0.1;
        let r = Rotation3::from_euler_angles(0.0, theta, 0.0);
        let sp = agent_setpoints(&r, &s.geometry, &[0.0; 4], &[0.0; 4]);
        // Rz(90°)·Ry(θ)·Rz(-90°) is a rotation by θ about the -x axis
        assert!((sp[0].roll + theta).abs() < 1e-12);
        assert!(sp[0].pitch.abs() < 1e-12);
    }

    #[test]
    fn gimbal_lock_flag() {
        let s = Structure::parse(QUAD).unwrap();
        let mut geo = s.geometry.clone();
        geo.agent_poses[0].alpha = 0.0;
        let r = Rotation3::from_euler_angles(0.0, FRAC_PI_2, 0.0);
        let sp = agent_setpoints(&r, &geo, &[0.0; 4], &[0.0; 4]);
        assert!(sp[0].gimbal_lock);
    }
}
