use std::f64::consts::PI;

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};

use super::spec::{CopterMount, StructureSpec};

pub type Pose = Isometry3<f64>;

pub fn trans_x(length: f64) -> Pose {
    Isometry3::from_parts(Translation3::new(length, 0.0, 0.0), UnitQuaternion::identity())
}

pub fn trans_z(height: f64) -> Pose {
    Isometry3::from_parts(Translation3::new(0.0, 0.0, height), UnitQuaternion::identity())
}

pub fn rot_z(angle: f64) -> Pose {
    Isometry3::from_parts(
        Translation3::identity(),
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle),
    )
}

/// Angle of face slot `slot` on a polygon with `faces` faces.
pub fn slot_angle(slot: usize, faces: usize) -> f64 {
    slot as f64 * 2.0 * PI / faces as f64
}

/// Straight rod between two points, used for mass and inertia.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RodSegment {
    pub start: Point3<f64>,
    pub end: Point3<f64>,
}

impl RodSegment {
    pub fn midpoint(&self) -> Point3<f64> {
        nalgebra::center(&self.start, &self.end)
    }
}

/// Poses of every copter and polygon relative to `C_0`, plus rod segments in
/// the same frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeKinematics {
    pub copters: Vec<Pose>,
    pub polygons: Vec<Pose>,
    pub rods: Vec<RodSegment>,
}

/// Chains planar rod translations and slot rotations from the root polygon.
///
/// A copter on face slot `j` of polygon `P` with rod `l` sits at
/// `P · Rot(z, j·2π/f) · Trans(x, -(R + l))`, its x axis pointing back along
/// the rod. Child polygons follow the same chain with both circumradii added;
/// top-mounted copters are `P · Trans(z, h)`. All poses are finally expressed
/// relative to copter 0.
pub fn forward_kinematics(spec: &StructureSpec) -> LatticeKinematics {
    let p = spec.polygons.len();
    let mut polygons: Vec<Option<Pose>> = vec![None; p];
    let mut rods = vec![
        RodSegment {
            start: Point3::origin(),
            end: Point3::origin()
        };
        spec.rods.len()
    ];
    polygons[0] = Some(Pose::identity());

    // Polygons are a validated tree, so repeated sweeps resolve every parent.
    let mut remaining = p - 1;
    while remaining > 0 {
        let before = remaining;
        for (k, poly) in spec.polygons.iter().enumerate() {
            let (Some(mount), None) = (poly.mount, polygons[k]) else {
                continue;
            };
            let Some(parent_pose) = polygons[mount.parent] else {
                continue;
            };
            let parent = &spec.polygons[mount.parent];
            let rod = &spec.rods[mount.rod];
            let arm = parent_pose * rot_z(slot_angle(mount.parent_slot, parent.faces));
            let reach = parent.circumradius + rod.length + poly.circumradius;
            let tail = match mount.slot {
                Some(slot) => rot_z(-PI - slot_angle(slot, poly.faces)),
                None => Pose::identity(),
            };
            let pose = arm * trans_x(-reach) * tail;
            rods[mount.rod] = RodSegment {
                start: arm * Point3::new(-parent.circumradius, 0.0, 0.0),
                end: arm * Point3::new(-(parent.circumradius + rod.length), 0.0, 0.0),
            };
            polygons[k] = Some(pose);
            remaining -= 1;
        }
        assert!(remaining < before, "polygon tree was not validated");
    }
    let polygons: Vec<Pose> = polygons.into_iter().map(|p| p.expect("resolved")).collect();

    let copters: Vec<Pose> = spec
        .copters
        .iter()
        .map(|c| match c.mount {
            CopterMount::Slot { polygon, slot, rod } => {
                let poly = &spec.polygons[polygon];
                let arm = polygons[polygon] * rot_z(slot_angle(slot, poly.faces));
                let length = spec.rods[rod].length;
                rods[rod] = RodSegment {
                    start: arm * Point3::new(-poly.circumradius, 0.0, 0.0),
                    end: arm * Point3::new(-(poly.circumradius + length), 0.0, 0.0),
                };
                arm * trans_x(-(poly.circumradius + length))
            }
            CopterMount::Top { polygon, z_offset } => polygons[polygon] * trans_z(z_offset),
        })
        .collect();

    let to_c0 = copters[0].inverse();
    LatticeKinematics {
        copters: copters.iter().map(|c| to_c0 * c).collect(),
        polygons: polygons.iter().map(|q| to_c0 * q).collect(),
        rods: rods
            .iter()
            .map(|r| RodSegment {
                start: to_c0 * r.start,
                end: to_c0 * r.end,
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix4;

    use crate::structure::StructureSpec;

    const HEXACOPTER: &str = include_str!("../../scenarios/hexacopter.lattice");

    fn mat_trans_x(l: f64) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m[(0, 3)] = l;
        m
    }

    fn mat_rot_z(a: f64) -> Matrix4<f64> {
        let (s, c) = a.sin_cos();
        let mut m = Matrix4::identity();
        m[(0, 0)] = c;
        m[(0, 1)] = -s;
        m[(1, 0)] = s;
        m[(1, 1)] = c;
        m
    }

    fn assert_mat_eq(a: &Matrix4<f64>, b: &Matrix4<f64>, tol: f64) {
        let diff = (a - b).abs().max();
        assert!(diff <= tol, "max diff {diff}\n{a}\n{b}");
    }

    #[test]
    fn hexacopter_c1_follows_rod_chain() {
        let spec = StructureSpec::parse(HEXACOPTER).unwrap();
        let kin = forward_kinematics(&spec);
        let r0 = spec.polygons[0].circumradius;
        let l0 = spec.rods[0].length + r0;
        let l1 = spec.rods[1].length + r0;
        let expected = mat_trans_x(l0) * mat_rot_z(PI / 3.0) * mat_trans_x(-l1);
        assert_mat_eq(&kin.copters[1].to_homogeneous(), &expected, 1e-12);
    }

    #[test]
    fn hexacopter_c2_goes_through_the_square() {
        let spec = StructureSpec::parse(HEXACOPTER).unwrap();
        let kin = forward_kinematics(&spec);
        let hex = &spec.polygons[0];
        let sq = &spec.polygons[1];
        let link = spec.polygons[1].mount.unwrap();
        let l0 = spec.rods[0].length + hex.circumradius;
        let l01 = hex.circumradius + spec.rods[link.rod].length + sq.circumradius;
        let CopterMount::Slot { rod, .. } = spec.copters[2].mount else {
            panic!()
        };
        let l2 = spec.rods[rod].length + sq.circumradius;
        let expected = mat_trans_x(l0) * mat_rot_z(2.0 * PI / 3.0) * mat_trans_x(-l01) * mat_trans_x(-l2);
        assert_mat_eq(&kin.copters[2].to_homogeneous(), &expected, 1e-12);
    }

    #[test]
    fn root_polygon_seen_from_copter_zero() {
        let text = "[polygon]\nfaces=4\nmass=0.007\ncircumradius=0.02\n\
                    [rod]\nlength=0.14\nmass=0.0035\ndiameter=0.005\nyoungs_modulus=2.3e9\n\
                    [copter]\nmass=0.033\nrod=0\npolygon=0\nslot=0\n";
        let spec = StructureSpec::parse(text).unwrap();
        let kin = forward_kinematics(&spec);
        assert_mat_eq(&kin.polygons[0].to_homogeneous(), &mat_trans_x(0.16), 1e-15);
        assert_mat_eq(&kin.copters[0].to_homogeneous(), &Matrix4::identity(), 1e-15);
    }

    #[test]
    fn two_polygon_chain_matches_hand_multiplication() {
        // triangle root, pentagon child on slot 1 facing back with its slot 2
        let text = "[polygon]\nfaces=3\nmass=0.01\ncircumradius=0.03\n\
                    [polygon]\nfaces=5\nmass=0.01\ncircumradius=0.025\nparent=0\nparent_slot=1\nrod=1\nslot=2\n\
                    [rod]\nlength=0.1\nmass=0.003\ndiameter=0.005\nyoungs_modulus=2e9\n\
                    [rod]\nlength=0.2\nmass=0.004\ndiameter=0.005\nyoungs_modulus=2e9\n\
                    [rod]\nlength=0.15\nmass=0.003\ndiameter=0.005\nyoungs_modulus=2e9\n\
                    [copter]\nmass=0.03\nrod=0\npolygon=0\nslot=0\n\
                    [copter]\nmass=0.03\nrod=2\npolygon=1\nslot=4\n";
        let spec = StructureSpec::parse(text).unwrap();
        let kin = forward_kinematics(&spec);
        let c0 = mat_rot_z(0.0) * mat_trans_x(-(0.03 + 0.1));
        let p1 = mat_rot_z(2.0 * PI / 3.0) * mat_trans_x(-(0.03 + 0.2 + 0.025)) * mat_rot_z(-PI - 2.0 * 2.0 * PI / 5.0);
        let c1 = p1 * mat_rot_z(4.0 * 2.0 * PI / 5.0) * mat_trans_x(-(0.025 + 0.15));
        let expected = c0.try_inverse().unwrap() * c1;
        assert_mat_eq(&kin.copters[1].to_homogeneous(), &expected, 1e-12);
        // pentagon slot 2 faces the triangle
        let p1_rel = kin.polygons[1];
        let toward_parent = p1_rel * rot_z(slot_angle(2, 5)) * Point3::new(-1.0, 0.0, 0.0) - p1_rel * Point3::origin();
        let to_parent = (kin.polygons[0].translation.vector - p1_rel.translation.vector).normalize();
        assert!((toward_parent.normalize() - to_parent).norm() < 1e-12);
    }

    #[test]
    fn top_mount_is_pure_z_translation() {
        let text = "[polygon]\nfaces=4\nmass=0.007\ncircumradius=0.02\n\
                    [rod]\nlength=0.14\nmass=0.0035\ndiameter=0.005\nyoungs_modulus=2.3e9\n\
                    [copter]\nmass=0.033\nrod=0\npolygon=0\nslot=0\n\
                    [copter]\nmass=0.033\ntop_of=0\nz_offset=0.06\n";
        let spec = StructureSpec::parse(text).unwrap();
        let kin = forward_kinematics(&spec);
        let rel = kin.polygons[0].inverse() * kin.copters[1];
        assert_mat_eq(&rel.to_homogeneous(), &trans_z(0.06).to_homogeneous(), 1e-15);
    }
}
