//! Scenario files bundled with the crate.

use std::path::PathBuf;

use super::{HarnessError, Scenario};

/// `(file name, contents)` of every bundled lattice.
const LATTICES: &[(&str, &str)] = &[
    ("quad.lattice", include_str!("../../scenarios/quad.lattice")),
    ("tcopter.lattice", include_str!("../../scenarios/tcopter.lattice")),
    ("hexacopter.lattice", include_str!("../../scenarios/hexacopter.lattice")),
    (
        "pentacopter.lattice",
        include_str!("../../scenarios/pentacopter.lattice"),
    ),
    ("lpayload.lattice", include_str!("../../scenarios/lpayload.lattice")),
    ("flex_t.lattice", include_str!("../../scenarios/flex_t.lattice")),
];

/// `(name, contents)` of every bundled scenario.
pub const SUITE: &[(&str, &str)] = &[
    ("quad", include_str!("../../scenarios/quad.scenario")),
    ("tcopter", include_str!("../../scenarios/tcopter.scenario")),
    ("hexacopter", include_str!("../../scenarios/hexacopter.scenario")),
    ("pentacopter", include_str!("../../scenarios/pentacopter.scenario")),
    (
        "pentacopter_depleted",
        include_str!("../../scenarios/pentacopter_depleted.scenario"),
    ),
    ("lpayload", include_str!("../../scenarios/lpayload.scenario")),
    ("flex_t", include_str!("../../scenarios/flex_t.scenario")),
];

pub fn bundled_lattice(name: &str) -> Option<&'static str> {
    LATTICES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Parses a bundled scenario by name.
pub fn bundled(name: &str) -> Result<Scenario, HarnessError> {
    let text = SUITE
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| HarnessError::Scenario(format!("no bundled scenario `{name}`")))?;
    Scenario::parse_with(text, |file| {
        bundled_lattice(file)
            .map(|t| (PathBuf::from(file), t.to_string()))
            .ok_or_else(|| HarnessError::Scenario(format!("no bundled lattice `{file}`")))
    })
}

/// Every bundled scenario, parsed.
pub fn scenario_suite() -> Result<Vec<Scenario>, HarnessError> {
    SUITE.iter().map(|(name, _)| bundled(name)).collect()
}
