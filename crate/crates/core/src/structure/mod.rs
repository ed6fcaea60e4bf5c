//! Lattice description, kinematics, structure frame and mass properties.

mod geometry;
mod kinematics;
mod mass;
mod spec;

pub use geometry::{resolve_structure_frame, AgentPose, StructureGeometry};
pub use kinematics::{forward_kinematics, rot_z, slot_angle, trans_x, trans_z, LatticeKinematics, Pose, RodSegment};
pub use mass::{mass_properties, plant_mass_properties, MassProperties};
pub use spec::{
    validate_spec, CopterMount, CopterSpec, Interconnection, PayloadSpec, PolygonMount, PolygonSpec, RodSpec,
    StructureSpec,
};

pub(crate) use geometry::wrap_angle;

use crate::config::ConfigError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StructureError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("empty structure: {0}")]
    Empty(&'static str),
    #[error("polygon {polygon} has {faces} faces; at least 3 are required")]
    InvalidFaces { polygon: usize, faces: usize },
    #[error("{what} must be strictly positive, found {value}")]
    NonPositiveDimension { what: String, value: f64 },
    #[error("unknown reference: {0}")]
    UnknownReference(String),
    #[error("disconnected lattice: {0}")]
    DisconnectedGraph(String),
    #[error("polygon graph has {edges} edges over {polygons} polygons; a tree is required")]
    CyclicGraph { edges: usize, polygons: usize },
    #[error("rod {rod} must be used exactly once, used by {users:?}")]
    RodUsage { rod: usize, users: Vec<String> },
    #[error("slot {slot} out of range for polygon {polygon} with {faces} faces")]
    InvalidSlot { polygon: usize, slot: usize, faces: usize },
    #[error("interconnect matrix is {found:?}, expected {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("interconnect row/column {index} sums to {sum}: {detail}")]
    RowSumViolation { index: usize, sum: u32, detail: String },
    #[error("interconnect mismatch: {0}")]
    MountMismatch(String),
    #[error("every copter coincides with the structure centre; x_s is undefined")]
    DegenerateFrame,
}

/// Everything derived from a [`StructureSpec`] that the rest of the crate consumes.
#[derive(Debug, Clone)]
pub struct Structure {
    pub spec: StructureSpec,
    pub kinematics: LatticeKinematics,
    pub geometry: StructureGeometry,
    /// What the controller is told.
    pub nominal: MassProperties,
    /// What the simulated plant actually is.
    pub truth: MassProperties,
}

impl Structure {
    pub fn new(spec: StructureSpec) -> Result<Self, StructureError> {
        let kinematics = forward_kinematics(&spec);
        let geometry = resolve_structure_frame(&spec, &kinematics)?;
        let nominal = mass_properties(&spec, &kinematics, &geometry);
        let truth = plant_mass_properties(&spec, &kinematics, &geometry);
        Ok(Self {
            spec,
            kinematics,
            geometry,
            nominal,
            truth,
        })
    }

    pub fn parse(text: &str) -> Result<Self, StructureError> {
        Self::new(StructureSpec::parse(text)?)
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self, StructureError> {
        Self::new(StructureSpec::from_file(path)?)
    }

    pub fn n_agents(&self) -> usize {
        self.spec.n_copters()
    }
}
