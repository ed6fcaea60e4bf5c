//! Static Euler–Bernoulli bending of clamped-free rods.
//!
//! The rod is clamped at its polygon and loaded at the free (copter) end by
//! the net force `F = T_i - m_i g`. Only the static solution is used:
//!
//! ```text
//! δ = F l³ / (3 E I)      γ = F l² / (2 E I)
//! ```

use std::f64::consts::PI;

use crate::structure::{CopterMount, StructureSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlexError {
    #[error("rod diameter must be positive, found {0}")]
    NonPositiveDiameter(f64),
    #[error("beam parameter `{name}` must be positive, found {value}")]
    InvalidBeam { name: &'static str, value: f64 },
}

/// Second moment of area of a solid circular section, `π d⁴ / 64`.
pub fn section_inertia_circular(diameter: f64) -> Result<f64, FlexError> {
    if !(diameter > 0.0 && diameter.is_finite()) {
        return Err(FlexError::NonPositiveDiameter(diameter));
    }
    Ok(PI * diameter.powi(4) / 64.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParams {
    pub length: f64,
    pub section_inertia: f64,
    pub youngs_modulus: f64,
    pub tip_mass: f64,
}

impl BeamParams {
    pub fn new(length: f64, diameter: f64, youngs_modulus: f64, tip_mass: f64) -> Result<Self, FlexError> {
        let beam = Self {
            length,
            section_inertia: section_inertia_circular(diameter)?,
            youngs_modulus,
            tip_mass,
        };
        beam.validate()?;
        Ok(beam)
    }

    pub fn validate(&self) -> Result<(), FlexError> {
        for (name, value) in [
            ("length", self.length),
            ("section_inertia", self.section_inertia),
            ("youngs_modulus", self.youngs_modulus),
            ("tip_mass", self.tip_mass),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(FlexError::InvalidBeam { name, value });
            }
        }
        Ok(())
    }

    /// Flexural rigidity `E I`.
    pub fn rigidity(&self) -> f64 {
        self.youngs_modulus * self.section_inertia
    }

    /// Beam for every copter; `None` for top-mounted copters, which sit on
    /// the polygon and do not bend.
    pub fn for_structure(spec: &StructureSpec) -> Vec<Option<BeamParams>> {
        spec.copters
            .iter()
            .map(|c| match c.mount {
                CopterMount::Slot { rod, .. } => {
                    let r = &spec.rods[rod];
                    // validated spec: every dimension is positive
                    BeamParams::new(r.length, r.diameter, r.youngs_modulus, c.mass).ok()
                }
                CopterMount::Top { .. } => None,
            })
            .collect()
    }
}

/// Static tip state of one rod.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FlexEntry {
    /// Bending angle `γ_i`, rad.
    pub gamma: f64,
    /// Tip elevation `δ_i^z`, m.
    pub delta_z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlexState {
    pub agents: Vec<FlexEntry>,
}

impl FlexState {
    pub fn rigid(n: usize) -> Self {
        Self {
            agents: vec![FlexEntry::default(); n],
        }
    }

    pub fn gammas(&self) -> impl Iterator<Item = f64> + '_ {
        self.agents.iter().map(|a| a.gamma)
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// Static state for every agent under `thrusts`.
    pub fn from_thrusts(beams: &[Option<BeamParams>], thrusts: &[f64], g: f64) -> Self {
        Self {
            agents: beams
                .iter()
                .zip(thrusts)
                .map(|(beam, &t)| beam.map_or(FlexEntry::default(), |b| static_deflection(t, &b, g)))
                .collect(),
        }
    }
}

/// Closed-form static tip deflection and slope. A negative net load sags.
pub fn static_deflection(thrust: f64, beam: &BeamParams, g: f64) -> FlexEntry {
    let load = thrust - beam.tip_mass * g;
    let ei = beam.rigidity();
    FlexEntry {
        delta_z: load * beam.length.powi(3) / (3.0 * ei),
        gamma: load * beam.length.powi(2) / (2.0 * ei),
    }
}

/// Net tip load that produces a bending angle `gamma`.
pub fn load_for_gamma(gamma: f64, beam: &BeamParams) -> f64 {
    gamma * 2.0 * beam.rigidity() / beam.length.powi(2)
}

/// Static deflected shape at distance `s ∈ [0, l]` from the clamp:
/// `z(s) = F s² (3l - s) / (6 E I)`, which reaches `δ` with slope `γ` at the tip.
pub fn beam_shape(s: f64, thrust: f64, beam: &BeamParams, g: f64) -> f64 {
    let load = thrust - beam.tip_mass * g;
    let s = s.clamp(0.0, beam.length);
    load * s * s * (3.0 * beam.length - s) / (6.0 * beam.rigidity())
}

/// First-order lag of the bending towards `target` over `dt`, standing in
/// for the unmodelled vibration modes. `tau <= 0` returns `target`.
pub fn lag_towards(previous: &FlexState, target: &FlexState, dt: f64, tau: f64) -> FlexState {
    if tau <= 0.0 || previous.len() != target.len() {
        return target.clone();
    }
    // exact discretisation of ẋ = (u - x) / τ with u held over dt
    let k = 1.0 - (-dt / tau).exp();
    FlexState {
        agents: previous
            .agents
            .iter()
            .zip(&target.agents)
            .map(|(p, t)| FlexEntry {
                gamma: p.gamma + k * (t.gamma - p.gamma),
                delta_z: p.delta_z + k * (t.delta_z - p.delta_z),
            })
            .collect(),
    }
}
