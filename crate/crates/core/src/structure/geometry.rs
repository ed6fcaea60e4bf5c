use std::f64::consts::PI;

use nalgebra::{Isometry3, Matrix3, Matrix4, Point3, Translation3, UnitQuaternion, Vector3};

use super::kinematics::{LatticeKinematics, Pose};
use super::spec::StructureSpec;
use super::StructureError;

/// Pose of one agent in the structure frame `C_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentPose {
    /// Yaw of the agent frame relative to `x_s`, wrapped to `(-π, π]`.
    pub alpha: f64,
    /// Displacement `(^sc_x, ^sc_y, ^sc_z)` from the structure origin.
    pub displacement: Vector3<f64>,
}

impl AgentPose {
    /// Homogeneous matrix `^sA_i = [Rot(z, α_i) | ^sc_i]`.
    pub fn homogeneous(&self) -> Matrix4<f64> {
        let rot = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.alpha);
        Isometry3::from_parts(Translation3::from(self.displacement), rot).to_homogeneous()
    }

    pub fn x(&self) -> f64 {
        self.displacement.x
    }

    pub fn y(&self) -> f64 {
        self.displacement.y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureGeometry {
    pub agent_poses: Vec<AgentPose>,
    /// Origin of `C_s` in `C_0` coordinates.
    pub com: Vector3<f64>,
    pub xs_agent: usize,
    /// `C_s` expressed in `C_0`.
    pub frame: Pose,
}

impl StructureGeometry {
    pub fn n_agents(&self) -> usize {
        self.agent_poses.len()
    }

    pub fn alphas(&self) -> impl Iterator<Item = f64> + '_ {
        self.agent_poses.iter().map(|a| a.alpha)
    }

    /// Maps a point from `C_0` into `C_s`.
    pub fn to_structure(&self, p: &Point3<f64>) -> Vector3<f64> {
        (self.frame.inverse() * p).coords
    }
}

/// A lumped mass in `C_0` coordinates; rods keep their extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum MassElement {
    Point {
        mass: f64,
        at: Point3<f64>,
    },
    Bar {
        mass: f64,
        start: Point3<f64>,
        end: Point3<f64>,
    },
}

impl MassElement {
    pub(crate) fn mass(&self) -> f64 {
        match *self {
            MassElement::Point { mass, .. } | MassElement::Bar { mass, .. } => mass,
        }
    }

    pub(crate) fn centroid(&self) -> Point3<f64> {
        match *self {
            MassElement::Point { at, .. } => at,
            MassElement::Bar { start, end, .. } => nalgebra::center(&start, &end),
        }
    }
}

pub(crate) fn hardware_elements(spec: &StructureSpec, kin: &LatticeKinematics) -> Vec<MassElement> {
    let copters = spec
        .copters
        .iter()
        .zip(&kin.copters)
        .map(|(c, pose)| MassElement::Point {
            mass: c.mass,
            at: pose * Point3::origin(),
        });
    let polygons = spec
        .polygons
        .iter()
        .zip(&kin.polygons)
        .map(|(p, pose)| MassElement::Point {
            mass: p.mass,
            at: pose * Point3::origin(),
        });
    let rods = spec.rods.iter().zip(&kin.rods).map(|(r, seg)| MassElement::Bar {
        mass: r.mass,
        start: seg.start,
        end: seg.end,
    });
    copters.chain(polygons).chain(rods).collect()
}

fn weighted_centroid(elements: &[MassElement]) -> Vector3<f64> {
    let total: f64 = elements.iter().map(MassElement::mass).sum();
    elements
        .iter()
        .map(|e| e.centroid().coords * e.mass())
        .sum::<Vector3<f64>>()
        / total
}

pub(crate) fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Builds `C_s` with its origin at `com` and `x_s` through the copter with the
/// largest planar distance (ties go to the lowest index).
fn frame_at(kin: &LatticeKinematics, com: Vector3<f64>) -> Result<StructureGeometry, StructureError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, pose) in kin.copters.iter().enumerate() {
        let d = pose.translation.vector - com;
        let dist = d.x.hypot(d.y);
        // relative slack keeps mirror-image ties deterministic under rounding
        match best {
            Some((_, b)) if dist <= b * (1.0 + 1e-9) => {}
            _ => best = Some((i, dist)),
        }
    }
    let (xs_agent, dist) = best.expect("at least one copter");
    if dist < 1e-9 {
        return Err(StructureError::DegenerateFrame);
    }
    let d = kin.copters[xs_agent].translation.vector - com;
    let heading = d.y.atan2(d.x);
    let frame = Isometry3::from_parts(
        Translation3::from(com),
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), heading),
    );
    let inv = frame.inverse();
    let agent_poses = kin
        .copters
        .iter()
        .map(|pose| {
            let yaw = pose.rotation.euler_angles().2;
            let mut displacement = (inv * pose).translation.vector;
            if displacement.norm() < 1e-15 {
                displacement = Vector3::zeros();
            }
            AgentPose {
                alpha: wrap_angle(yaw - heading),
                displacement,
            }
        })
        .collect::<Vec<_>>();
    let mut geometry = StructureGeometry {
        agent_poses,
        com,
        xs_agent,
        frame,
    };
    // the defining agent lies on +x_s exactly
    geometry.agent_poses[xs_agent].displacement.y = 0.0;
    Ok(geometry)
}

/// Resolves the structure frame the controller works in.
///
/// The origin is the mass-weighted centroid of copters, polygons and rods,
/// plus the payload only when the payload is declared known to the
/// controller.
pub fn resolve_structure_frame(
    spec: &StructureSpec,
    kin: &LatticeKinematics,
) -> Result<StructureGeometry, StructureError> {
    let mut elements = hardware_elements(spec, kin);
    let hardware = frame_at(kin, weighted_centroid(&elements))?;
    match spec.known_payload() {
        Some(payload) => {
            let at = hardware.frame * Point3::from(payload.offset);
            elements.push(MassElement::Point { mass: payload.mass, at });
            frame_at(kin, weighted_centroid(&elements))
        }
        None => Ok(hardware),
    }
}

/// Payload centre of mass in the controller's structure frame.
pub(crate) fn payload_position(
    spec: &StructureSpec,
    kin: &LatticeKinematics,
    geometry: &StructureGeometry,
) -> Option<(f64, Vector3<f64>)> {
    let payload = spec.payload.filter(|p| p.mass > 0.0)?;
    let hardware = hardware_elements(spec, kin);
    let hw_frame = frame_at(kin, weighted_centroid(&hardware)).ok()?;
    let at = hw_frame.frame * Point3::from(payload.offset);
    Some((payload.mass, geometry.to_structure(&at)))
}

pub(crate) fn point_inertia(mass: f64, r: &Vector3<f64>) -> Matrix3<f64> {
    (Matrix3::identity() * r.norm_squared() - r * r.transpose()) * mass
}

/// Uniform slender bar about the origin: parallel-axis on the centroid plus
/// `m L² / 12` about axes normal to the bar.
pub(crate) fn bar_inertia(mass: f64, start: &Vector3<f64>, end: &Vector3<f64>) -> Matrix3<f64> {
    let mid = (start + end) * 0.5;
    let axis = end - start;
    let length = axis.norm();
    let own = if length > 0.0 {
        let u = axis / length;
        (Matrix3::identity() - u * u.transpose()) * (mass * length * length / 12.0)
    } else {
        Matrix3::zeros()
    };
    point_inertia(mass, &mid) + own
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::forward_kinematics;

    const QUAD: &str = include_str!("../../scenarios/quad.lattice");
    const TCOPTER: &str = include_str!("../../scenarios/tcopter.lattice");
    const HEXACOPTER: &str = include_str!("../../scenarios/hexacopter.lattice");

    fn geometry(text: &str) -> (StructureSpec, StructureGeometry) {
        let spec = StructureSpec::parse(text).unwrap();
        let kin = forward_kinematics(&spec);
        let geo = resolve_structure_frame(&spec, &kin).unwrap();
        (spec, geo)
    }

    #[test]
    fn symmetric_quad_frame() {
        let (spec, geo) = geometry(QUAD);
        let r = spec.rods[0].length + spec.polygons[0].circumradius;
        let kin = forward_kinematics(&spec);
        let centre = kin.polygons[0].translation.vector;
        assert!((geo.com - centre).norm() < 1e-12);
        let mut pts: Vec<(f64, f64)> = geo.agent_poses.iter().map(|a| (a.x(), a.y())).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = [(-r, 0.0), (0.0, -r), (0.0, r), (r, 0.0)];
        for (p, e) in pts.iter().zip(expected) {
            assert!((p.0 - e.0).abs() < 1e-12 && (p.1 - e.1).abs() < 1e-12, "{pts:?}");
        }
        assert_eq!(geo.xs_agent, 0);
    }

    #[test]
    fn t_copter_centroid_matches_hand_sum() {
        let (spec, geo) = geometry(TCOPTER);
        let kin = forward_kinematics(&spec);
        // hand-computed mass-weighted mean over point masses, rods at midpoints
        let mut num = Vector3::zeros();
        let mut den = 0.0;
        for (c, pose) in spec.copters.iter().zip(&kin.copters) {
            num += pose.translation.vector * c.mass;
            den += c.mass;
        }
        for (p, pose) in spec.polygons.iter().zip(&kin.polygons) {
            num += pose.translation.vector * p.mass;
            den += p.mass;
        }
        for (r, seg) in spec.rods.iter().zip(&kin.rods) {
            num += seg.midpoint().coords * r.mass;
            den += r.mass;
        }
        assert!((geo.com - num / den).norm() < 1e-14);
        // centroid is displaced from the square centre towards the stem
        let centre = kin.polygons[0].translation.vector;
        assert!((geo.com - centre).norm() > 1e-3);
    }

    #[test]
    fn hexacopter_xs_through_copter_zero() {
        let (_, geo) = geometry(HEXACOPTER);
        assert_eq!(geo.xs_agent, 0);
        let d0 = geo.agent_poses[0].displacement;
        assert!(d0.y.abs() < 1e-15 && d0.x > 0.0);
        for a in &geo.agent_poses[1..] {
            assert!(a.x().hypot(a.y()) < d0.x);
        }
    }

    #[test]
    fn agent_transforms_are_planar_rotations() {
        for text in [QUAD, TCOPTER, HEXACOPTER] {
            let (_, geo) = geometry(text);
            for a in &geo.agent_poses {
                let m = a.homogeneous();
                let rot = m.fixed_view::<3, 3>(0, 0).into_owned();
                assert!((rot.determinant() - 1.0).abs() < 1e-12);
                assert!((m[(2, 2)] - 1.0).abs() < 1e-12);
                assert!(m[(0, 2)].abs() < 1e-15 && m[(2, 0)].abs() < 1e-15);
            }
        }
    }

    #[test]
    fn resolution_is_idempotent() {
        let spec = StructureSpec::parse(HEXACOPTER).unwrap();
        let kin = forward_kinematics(&spec);
        let a = resolve_structure_frame(&spec, &kin).unwrap();
        let b = resolve_structure_frame(&spec, &kin).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_frame() {
        let text = "[polygon]\nfaces=4\nmass=0.007\n\
                    [copter]\nmass=0.033\ntop_of=0\nz_offset=0.05\n";
        let spec = StructureSpec::parse(text).unwrap();
        let kin = forward_kinematics(&spec);
        assert!(matches!(
            resolve_structure_frame(&spec, &kin),
            Err(StructureError::DegenerateFrame)
        ));
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }
}
