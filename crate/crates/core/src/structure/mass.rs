use nalgebra::{Matrix3, Rotation3, Vector3};

use super::geometry::{
    bar_inertia, hardware_elements, payload_position, point_inertia, MassElement, StructureGeometry,
};
use super::kinematics::LatticeKinematics;
use super::spec::StructureSpec;
use crate::GRAVITY;

#[derive(Debug, Clone, PartialEq)]
pub struct MassProperties {
    pub total_mass: f64,
    /// Inertia about the `C_s` origin, in `C_s` axes.
    pub inertia: Matrix3<f64>,
    /// Static torque at hover attitude.
    pub static_torque: Vector3<f64>,
    /// Payload centre of mass in `C_s`; zero without a payload.
    pub payload_offset: Vector3<f64>,
    /// `Σ m_k r_k` about the `C_s` origin. Gravity acting on it is the static torque.
    pub first_moment: Vector3<f64>,
}

impl MassProperties {
    /// `τ^s = (Σ m_k r_k) × (Rᵀ · [0, 0, -g])` for body attitude `R`.
    pub fn static_torque_at(&self, r: &Rotation3<f64>) -> Vector3<f64> {
        self.first_moment
            .cross(&(r.transpose() * Vector3::new(0.0, 0.0, -GRAVITY)))
    }

    pub fn inertia_diagonal(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.inertia.diagonal())
    }
}

/// `(mass, point or bar start, bar end)` in the structure frame.
type Element = (f64, Vector3<f64>, Option<Vector3<f64>>);

fn accumulate(elements: &[Element]) -> (f64, Matrix3<f64>, Vector3<f64>) {
    let mut mass = 0.0;
    let mut inertia = Matrix3::zeros();
    let mut first = Vector3::zeros();
    for &(m, a, b) in elements {
        mass += m;
        match b {
            None => {
                inertia += point_inertia(m, &a);
                first += a * m;
            }
            Some(b) => {
                inertia += bar_inertia(m, &a, &b);
                first += (a + b) * (0.5 * m);
            }
        }
    }
    (mass, inertia, first)
}

fn hardware_in_frame(spec: &StructureSpec, kin: &LatticeKinematics, geometry: &StructureGeometry) -> Vec<Element> {
    hardware_elements(spec, kin)
        .into_iter()
        .map(|e| match e {
            MassElement::Point { mass, at } => (mass, geometry.to_structure(&at), None),
            MassElement::Bar { mass, start, end } => {
                (mass, geometry.to_structure(&start), Some(geometry.to_structure(&end)))
            }
        })
        .collect()
}

fn build(
    spec: &StructureSpec,
    kin: &LatticeKinematics,
    geometry: &StructureGeometry,
    include_unknown: bool,
) -> MassProperties {
    let mut elements = hardware_in_frame(spec, kin, geometry);
    let payload = payload_position(spec, kin, geometry);
    let known = spec.known_payload().is_some();
    let mut payload_offset = Vector3::zeros();
    let mut torque_moment = Vector3::zeros();
    if let Some((m_p, r_p)) = payload {
        payload_offset = r_p;
        if known || include_unknown {
            elements.push((m_p, r_p, None));
        } else {
            // the plant still carries it, so the torque it causes is real
            torque_moment = r_p * m_p;
        }
    }
    let (total_mass, mut inertia, first) = accumulate(&elements);
    inertia = (inertia + inertia.transpose()) * 0.5;
    let first_moment = first + torque_moment;
    let hover = first_moment.cross(&Vector3::new(0.0, 0.0, -GRAVITY));
    MassProperties {
        total_mass,
        inertia,
        static_torque: clean(hover),
        payload_offset,
        first_moment: clean(first_moment),
    }
}

/// Drops round-off left over from re-centring so symmetric lattices give
/// exactly zero.
fn clean(v: Vector3<f64>) -> Vector3<f64> {
    v.map(|x| if x.abs() < 1e-14 { 0.0 } else { x })
}

/// Mass properties as the controller sees them: an unknown payload adds
/// neither mass nor inertia, but the static torque it causes is reported so
/// it can be compared against the adaptive estimate.
pub fn mass_properties(spec: &StructureSpec, kin: &LatticeKinematics, geometry: &StructureGeometry) -> MassProperties {
    build(spec, kin, geometry, false)
}

/// Mass properties of the simulated vehicle, payload always included.
pub fn plant_mass_properties(
    spec: &StructureSpec,
    kin: &LatticeKinematics,
    geometry: &StructureGeometry,
) -> MassProperties {
    build(spec, kin, geometry, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::{forward_kinematics, resolve_structure_frame};

    fn props(text: &str) -> (MassProperties, MassProperties) {
        let spec = StructureSpec::parse(text).unwrap();
        let kin = forward_kinematics(&spec);
        let geo = resolve_structure_frame(&spec, &kin).unwrap();
        (
            mass_properties(&spec, &kin, &geo),
            plant_mass_properties(&spec, &kin, &geo),
        )
    }

    const QUAD: &str = include_str!("../../scenarios/quad.lattice");

    #[test]
    fn no_payload_no_static_torque() {
        let (nominal, truth) = props(QUAD);
        assert_eq!(nominal.static_torque, Vector3::zeros());
        assert_eq!(nominal, truth);
    }

    #[test]
    fn point_mass_quad_inertia() {
        // rods and polygon made negligible to leave the point-mass formula
        let mut text = String::from("[polygon]\nfaces=4\nmass=1e-12\n");
        for slot in 0..4 {
            text += "[rod]\nlength=0.2\nmass=1e-12\ndiameter=0.005\nyoungs_modulus=2e9\n";
            text += &format!("[copter]\nmass=0.05\nrod={slot}\npolygon=0\nslot={slot}\n");
        }
        let (p, _) = props(&text);
        let mr2 = 0.05 * 0.2 * 0.2;
        assert!((p.inertia[(2, 2)] - 4.0 * mr2).abs() < 1e-9);
        assert!((p.inertia[(0, 0)] - 2.0 * mr2).abs() < 1e-9);
        assert!((p.inertia[(1, 1)] - 2.0 * mr2).abs() < 1e-9);
    }

    #[test]
    fn unknown_payload_changes_torque_not_model() {
        let text = format!("{QUAD}[payload]\nmass=0.02\noffset=0.05,0,0\nknown=false\n");
        let (nominal, truth) = props(&text);
        let (bare, _) = props(QUAD);
        assert!((nominal.total_mass - bare.total_mass).abs() < 1e-15);
        assert!((truth.total_mass - bare.total_mass - 0.02).abs() < 1e-15);
        // offset along x_s: gravity on it pitches the structure about y
        let expected = Vector3::new(0.05, 0.0, 0.0).cross(&Vector3::new(0.0, 0.0, -0.02 * GRAVITY));
        assert!((nominal.static_torque - expected).norm() < 1e-12);
        assert!(truth.inertia[(1, 1)] > nominal.inertia[(1, 1)]);
    }

    #[test]
    fn known_payload_recentres_frame() {
        let text = format!("{QUAD}[payload]\nmass=0.02\noffset=0.05,0,0\nknown=true\n");
        let (nominal, truth) = props(&text);
        assert_eq!(nominal.static_torque, Vector3::zeros());
        assert!((nominal.inertia - truth.inertia).norm() < 1e-15);
    }
}
