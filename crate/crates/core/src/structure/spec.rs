use std::collections::VecDeque;
use std::path::Path;

use nalgebra::{DMatrix, Vector3};

use crate::config::{ConfigError, Document, Section};

use super::StructureError;

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonSpec {
    /// Number of faces `f_i >= 3`; slot `j` sits at angle `j * 2π / f_i`.
    pub faces: usize,
    pub mass: f64,
    pub circumradius: f64,
    /// `None` for the root polygon `p_0`.
    pub mount: Option<PolygonMount>,
}

/// How a non-root polygon hangs off its parent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolygonMount {
    pub parent: usize,
    pub parent_slot: usize,
    pub rod: usize,
    /// Own slot facing the parent. When absent the child keeps the frame
    /// produced by the rod chain (x axis pointing back at the parent).
    pub slot: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RodSpec {
    pub length: f64,
    pub mass: f64,
    pub diameter: f64,
    pub youngs_modulus: f64,
}

impl RodSpec {
    pub fn linear_density(&self) -> f64 {
        self.mass / self.length
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CopterMount {
    /// On a rod leaving face slot `slot` of `polygon`.
    Slot { polygon: usize, slot: usize, rod: usize },
    /// Directly above the polygon centre, sharing its x axis.
    Top { polygon: usize, z_offset: f64 },
}

impl CopterMount {
    pub fn polygon(&self) -> usize {
        match *self {
            CopterMount::Slot { polygon, .. } | CopterMount::Top { polygon, .. } => polygon,
        }
    }

    pub fn rod(&self) -> Option<usize> {
        match *self {
            CopterMount::Slot { rod, .. } => Some(rod),
            CopterMount::Top { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopterSpec {
    pub mass: f64,
    pub mount: CopterMount,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayloadSpec {
    pub mass: f64,
    /// Offset of the payload centre of mass from the hardware centre of mass,
    /// expressed in the hardware structure frame.
    pub offset: Vector3<f64>,
    /// Whether the controller is told about the payload.
    pub known: bool,
}

/// Interconnection matrix `ℐ` of shape `p × (n + p)`: rows are polygons,
/// the first `n` columns copters and the last `p` columns polygons.
#[derive(Debug, Clone, PartialEq)]
pub struct Interconnection(pub DMatrix<u8>);

impl Interconnection {
    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    /// Matrix implied by the copter and polygon mounts.
    pub fn from_mounts(copters: &[CopterSpec], polygons: &[PolygonSpec]) -> Self {
        let (n, p) = (copters.len(), polygons.len());
        let mut m = DMatrix::zeros(p, n + p);
        for (i, c) in copters.iter().enumerate() {
            let row = c.mount.polygon();
            if row < p {
                m[(row, i)] = 1;
            }
        }
        for (k, poly) in polygons.iter().enumerate() {
            if let Some(mount) = poly.mount {
                if mount.parent < p {
                    m[(mount.parent, n + k)] = 1;
                    m[(k, n + mount.parent)] = 1;
                }
            }
        }
        Self(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureSpec {
    pub copters: Vec<CopterSpec>,
    pub polygons: Vec<PolygonSpec>,
    pub rods: Vec<RodSpec>,
    pub interconnection: Interconnection,
    pub payload: Option<PayloadSpec>,
}

impl StructureSpec {
    pub fn n_copters(&self) -> usize {
        self.copters.len()
    }

    pub fn n_polygons(&self) -> usize {
        self.polygons.len()
    }

    /// Mass of copters, polygons and rods only.
    pub fn hardware_mass(&self) -> f64 {
        self.copters.iter().map(|c| c.mass).sum::<f64>()
            + self.polygons.iter().map(|p| p.mass).sum::<f64>()
            + self.rods.iter().map(|r| r.mass).sum::<f64>()
    }

    pub fn payload_mass(&self) -> f64 {
        self.payload.map_or(0.0, |p| p.mass)
    }

    pub fn known_payload(&self) -> Option<&PayloadSpec> {
        self.payload.as_ref().filter(|p| p.known && p.mass > 0.0)
    }

    pub fn unknown_payload(&self) -> Option<&PayloadSpec> {
        self.payload.as_ref().filter(|p| !p.known && p.mass > 0.0)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, StructureError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| StructureError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Parses the structure config format and validates the result.
    pub fn parse(text: &str) -> Result<Self, StructureError> {
        let doc = Document::parse(text)?;
        doc.expect_sections(&["polygon", "rod", "copter", "interconnect", "payload"])?;

        let polygons = doc
            .sections("polygon")
            .map(parse_polygon)
            .collect::<Result<Vec<_>, _>>()?;
        let rods = doc.sections("rod").map(parse_rod).collect::<Result<Vec<_>, _>>()?;
        let copters = doc
            .sections("copter")
            .map(parse_copter)
            .collect::<Result<Vec<_>, _>>()?;

        let interconnection = match doc.section("interconnect") {
            Some(section) => parse_interconnect(section, copters.len(), polygons.len())?,
            None => Interconnection::from_mounts(&copters, &polygons),
        };

        let payload = doc.section("payload").map(parse_payload).transpose()?;

        let spec = StructureSpec {
            copters,
            polygons,
            rods,
            interconnection,
            payload,
        };
        validate_spec(spec)
    }
}

fn parse_polygon(s: &Section) -> Result<PolygonSpec, ConfigError> {
    s.expect_keys(&["faces", "mass", "circumradius", "parent", "parent_slot", "rod", "slot"])?;
    let mount = match s.optional::<usize>("parent")? {
        Some(parent) => Some(PolygonMount {
            parent,
            parent_slot: s.required("parent_slot")?,
            rod: s.required("rod")?,
            slot: s.optional("slot")?,
        }),
        None => None,
    };
    Ok(PolygonSpec {
        faces: s.required("faces")?,
        mass: s.required("mass")?,
        circumradius: s.or("circumradius", 0.0)?,
        mount,
    })
}

fn parse_rod(s: &Section) -> Result<RodSpec, ConfigError> {
    s.expect_keys(&["length", "mass", "diameter", "youngs_modulus", "linear_density"])?;
    let length: f64 = s.required("length")?;
    let mass = match (s.optional::<f64>("mass")?, s.optional::<f64>("linear_density")?) {
        (Some(m), _) => m,
        (None, Some(rho)) => rho * length,
        (None, None) => s.required("mass")?,
    };
    Ok(RodSpec {
        length,
        mass,
        diameter: s.required("diameter")?,
        youngs_modulus: s.required("youngs_modulus")?,
    })
}

fn parse_copter(s: &Section) -> Result<CopterSpec, ConfigError> {
    s.expect_keys(&["mass", "rod", "polygon", "slot", "top_of", "z_offset"])?;
    let mount = if let Some(polygon) = s.optional::<usize>("top_of")? {
        CopterMount::Top {
            polygon,
            z_offset: s.or("z_offset", 0.0)?,
        }
    } else {
        CopterMount::Slot {
            polygon: s.required("polygon")?,
            slot: s.required("slot")?,
            rod: s.required("rod")?,
        }
    };
    Ok(CopterSpec {
        mass: s.required("mass")?,
        mount,
    })
}

fn parse_interconnect(s: &Section, n: usize, p: usize) -> Result<Interconnection, ConfigError> {
    s.expect_keys(&["row"])?;
    let rows: Vec<_> = s.get_all("row").collect();
    let mut m = DMatrix::zeros(rows.len(), n + p);
    for (i, entry) in rows.iter().enumerate() {
        let values: Vec<u8> = entry.parse_list()?;
        if values.len() != n + p {
            return Err(ConfigError::InvalidValue {
                line: entry.line,
                key: "row".into(),
                message: format!("expected {} entries (n + p), found {}", n + p, values.len()),
            });
        }
        for (j, v) in values.into_iter().enumerate() {
            if v > 1 {
                return Err(ConfigError::InvalidValue {
                    line: entry.line,
                    key: "row".into(),
                    message: format!("entries must be 0 or 1, found {v}"),
                });
            }
            m[(i, j)] = v;
        }
    }
    Ok(Interconnection(m))
}

fn parse_payload(s: &Section) -> Result<PayloadSpec, ConfigError> {
    s.expect_keys(&["mass", "offset", "known"])?;
    let offset = match s.get("offset") {
        Some(e) => Vector3::from(e.parse_vec3()?),
        None => Vector3::zeros(),
    };
    Ok(PayloadSpec {
        mass: s.required("mass")?,
        offset,
        known: s.or("known", false)?,
    })
}

/// Checks every structural invariant; returns the spec unchanged when it holds.
pub fn validate_spec(spec: StructureSpec) -> Result<StructureSpec, StructureError> {
    let n = spec.copters.len();
    let p = spec.polygons.len();
    if n == 0 {
        return Err(StructureError::Empty("at least one copter is required"));
    }
    if p == 0 {
        return Err(StructureError::Empty("at least one polygon is required"));
    }

    for (i, poly) in spec.polygons.iter().enumerate() {
        if poly.faces < 3 {
            return Err(StructureError::InvalidFaces {
                polygon: i,
                faces: poly.faces,
            });
        }
        positive(poly.mass, || format!("polygon {i} mass"))?;
        if !(poly.circumradius >= 0.0 && poly.circumradius.is_finite()) {
            return Err(StructureError::NonPositiveDimension {
                what: format!("polygon {i} circumradius"),
                value: poly.circumradius,
            });
        }
    }
    for (i, rod) in spec.rods.iter().enumerate() {
        positive(rod.length, || format!("rod {i} length"))?;
        positive(rod.mass, || format!("rod {i} mass"))?;
        positive(rod.diameter, || format!("rod {i} diameter"))?;
        positive(rod.youngs_modulus, || format!("rod {i} youngs_modulus"))?;
    }
    for (i, c) in spec.copters.iter().enumerate() {
        positive(c.mass, || format!("copter {i} mass"))?;
    }
    if let Some(payload) = spec.payload {
        if !(payload.mass >= 0.0 && payload.mass.is_finite()) {
            return Err(StructureError::NonPositiveDimension {
                what: "payload mass".into(),
                value: payload.mass,
            });
        }
    }

    // Mount references and slot ranges.
    let mut rod_users: Vec<Vec<String>> = vec![Vec::new(); spec.rods.len()];
    for (i, c) in spec.copters.iter().enumerate() {
        let polygon = c.mount.polygon();
        if polygon >= p {
            return Err(StructureError::UnknownReference(format!(
                "copter {i} references polygon {polygon}"
            )));
        }
        if let CopterMount::Slot { slot, rod, .. } = c.mount {
            check_slot(&spec, polygon, slot)?;
            let users = rod_users
                .get_mut(rod)
                .ok_or_else(|| StructureError::UnknownReference(format!("copter {i} references rod {rod}")))?;
            users.push(format!("copter {i}"));
        }
    }
    for (k, poly) in spec.polygons.iter().enumerate() {
        match (k, poly.mount) {
            (0, Some(_)) => {
                return Err(StructureError::UnknownReference(
                    "the root polygon 0 cannot have a parent".into(),
                ))
            }
            (0, None) => {}
            (_, None) => return Err(StructureError::DisconnectedGraph(format!("polygon {k} has no parent"))),
            (_, Some(mount)) => {
                if mount.parent >= p {
                    return Err(StructureError::UnknownReference(format!(
                        "polygon {k} references parent polygon {}",
                        mount.parent
                    )));
                }
                check_slot(&spec, mount.parent, mount.parent_slot)?;
                if let Some(slot) = mount.slot {
                    check_slot(&spec, k, slot)?;
                }
                let users = rod_users.get_mut(mount.rod).ok_or_else(|| {
                    StructureError::UnknownReference(format!("polygon {k} references rod {}", mount.rod))
                })?;
                users.push(format!("polygon {k}"));
            }
        }
    }
    for (r, users) in rod_users.iter().enumerate() {
        if users.len() != 1 {
            return Err(StructureError::RodUsage {
                rod: r,
                users: users.clone(),
            });
        }
    }

    validate_interconnection(&spec)?;
    Ok(spec)
}

fn positive(value: f64, what: impl FnOnce() -> String) -> Result<(), StructureError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(StructureError::NonPositiveDimension { what: what(), value })
    }
}

fn check_slot(spec: &StructureSpec, polygon: usize, slot: usize) -> Result<(), StructureError> {
    let faces = spec.polygons[polygon].faces;
    if slot >= faces {
        Err(StructureError::InvalidSlot { polygon, slot, faces })
    } else {
        Ok(())
    }
}

/// Each copter column sums to one (one rod to one polygon), no polygon row is
/// empty, the polygon block is a symmetric adjacency describing a tree, and
/// the matrix agrees with the declared mounts.
fn validate_interconnection(spec: &StructureSpec) -> Result<(), StructureError> {
    let n = spec.copters.len();
    let p = spec.polygons.len();
    let m = &spec.interconnection.0;
    if m.nrows() != p || m.ncols() != n + p {
        return Err(StructureError::ShapeMismatch {
            expected: (p, n + p),
            found: (m.nrows(), m.ncols()),
        });
    }
    for i in 0..p {
        let sum: u32 = m.row(i).iter().map(|&v| u32::from(v)).sum();
        if sum == 0 {
            return Err(StructureError::RowSumViolation {
                index: i,
                sum,
                detail: "polygon has no rod entries".into(),
            });
        }
    }
    for j in 0..n {
        let sum: u32 = m.column(j).iter().map(|&v| u32::from(v)).sum();
        if sum != 1 {
            return Err(StructureError::RowSumViolation {
                index: j,
                sum,
                detail: format!("copter {j} must hang from exactly one polygon"),
            });
        }
    }
    for a in 0..p {
        if m[(a, n + a)] != 0 {
            return Err(StructureError::RowSumViolation {
                index: a,
                sum: 1,
                detail: format!("polygon {a} is connected to itself"),
            });
        }
        for b in 0..p {
            if m[(a, n + b)] != m[(b, n + a)] {
                return Err(StructureError::MountMismatch(format!(
                    "polygon block is not symmetric at ({a}, {b})"
                )));
            }
        }
    }

    // Tree check on the polygon adjacency: p - 1 edges and connected.
    let edges: usize = (0..p)
        .flat_map(|a| (a + 1..p).map(move |b| (a, b)))
        .filter(|&(a, b)| m[(a, n + b)] == 1)
        .count();
    let mut seen = vec![false; p];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(a) = queue.pop_front() {
        for b in 0..p {
            if m[(a, n + b)] == 1 && !seen[b] {
                seen[b] = true;
                queue.push_back(b);
            }
        }
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(StructureError::DisconnectedGraph(format!(
            "polygon {k} is not reachable from polygon 0"
        )));
    }
    if edges != p - 1 {
        return Err(StructureError::CyclicGraph { edges, polygons: p });
    }

    let implied = Interconnection::from_mounts(&spec.copters, &spec.polygons);
    if implied != spec.interconnection {
        let (r, c) = (0..p)
            .flat_map(|r| (0..n + p).map(move |c| (r, c)))
            .find(|&(r, c)| implied.0[(r, c)] != m[(r, c)])
            .unwrap_or((0, 0));
        return Err(StructureError::MountMismatch(format!(
            "interconnect entry ({r}, {c}) = {} contradicts the declared mounts",
            m[(r, c)]
        )));
    }
    Ok(())
}
