//! Scenarios shipped with the binary.

use crate::scenario::{Scenario, ScenarioError};

/// `(name, JSON text, expected exit code of check)`.
pub const BUILTINS: &[(&str, &str, i32)] = &[
    ("example1", include_str!("../scenarios/example1.json"), 1),
    ("example2", include_str!("../scenarios/example2.json"), 1),
    (
        "disk_rotation",
        include_str!("../scenarios/disk_rotation.json"),
        0,
    ),
    (
        "inward_ball",
        include_str!("../scenarios/inward_ball.json"),
        0,
    ),
    (
        "halfplane_transversal",
        include_str!("../scenarios/halfplane_transversal.json"),
        0,
    ),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|b| b.0)
}

pub fn source(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|b| b.0 == name).map(|b| b.1)
}

pub fn expected_exit(name: &str) -> Option<i32> {
    BUILTINS.iter().find(|b| b.0 == name).map(|b| b.2)
}

pub fn load(name: &str) -> Option<Result<Scenario, ScenarioError>> {
    source(name).map(Scenario::from_json)
}

/// A path on disk wins over a built-in of the same name.
pub fn resolve(arg: &str) -> Result<Scenario, ScenarioError> {
    let path = std::path::Path::new(arg);
    if path.exists() {
        return Scenario::from_path(path);
    }
    let name = arg.strip_prefix("builtin:").unwrap_or(arg);
    load(name).unwrap_or_else(|| {
        Err(ScenarioError::Invalid(format!(
            "no scenario file or built-in named '{}' (built-ins: {})",
            arg,
            names().collect::<Vec<_>>().join(", ")
        )))
    })
}
