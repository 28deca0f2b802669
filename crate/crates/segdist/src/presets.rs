//! Shipped evaluation configs for the common aerial LiDAR benchmarks.
//!
//! Thresholds follow the spatial structure of each class: continuous
//! layers (ground, low vegetation) get a strict 2 m, large structures
//! (buildings, water, permanent structures) 10 m, and linear or compact
//! objects (vehicles, poles, fences, bridges, power lines) 5 m. The same
//! tables are shipped as TOML files under `configs/`.

use crate::error::ValidationError;
use crate::io::config::EvalConfig;

fn config(entries: &[(&str, f64)]) -> Result<EvalConfig, ValidationError> {
    EvalConfig::from_parts(
        entries.iter().map(|(n, _)| (*n).to_owned()).collect(),
        entries.iter().map(|(_, t)| *t).collect(),
    )
}

/// DALES: eight classes, ids in the dataset's label order.
pub fn dales() -> EvalConfig {
    config(&[
        ("ground", 2.0),
        ("vegetation", 3.0),
        ("cars", 5.0),
        ("trucks", 5.0),
        ("power_lines", 5.0),
        ("fences", 5.0),
        ("poles", 5.0),
        ("buildings", 10.0),
    ])
    .expect("preset is valid")
}

/// FRACTAL: seven classes.
pub fn fractal() -> EvalConfig {
    config(&[
        ("other", 10.0),
        ("ground", 2.0),
        ("vegetation", 3.0),
        ("building", 10.0),
        ("water", 10.0),
        ("bridge", 5.0),
        ("permanent_structure", 10.0),
    ])
    .expect("preset is valid")
}

/// Tracasa-PNA20: five classes.
pub fn tracasa_pna20() -> EvalConfig {
    config(&[
        ("ground", 2.0),
        ("low_vegetation", 2.0),
        ("medium_high_vegetation", 5.0),
        ("building", 10.0),
        ("vehicle", 5.0),
    ])
    .expect("preset is valid")
}

pub fn by_name(name: &str) -> Option<EvalConfig> {
    match name {
        "dales" => Some(dales()),
        "fractal" => Some(fractal()),
        "tracasa-pna20" => Some(tracasa_pna20()),
        _ => None,
    }
}
