//! Scenarios shipped with the binary.

use crate::config::ScenarioConfig;
use crate::error::CliError;

pub const BUNDLED: [(&str, &str); 3] = [
    ("scalar_step", include_str!("../scenarios/scalar_step.json")),
    ("rot_tracking", include_str!("../scenarios/rot_tracking.json")),
    ("mimo_small", include_str!("../scenarios/mimo_small.json")),
];

pub fn names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

pub fn load(name: &str) -> Result<ScenarioConfig, CliError> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| CliError::Config(format!("unknown scenario {name:?}; bundled: {}", names().join(", "))))?;
    ScenarioConfig::from_json(text)
}
