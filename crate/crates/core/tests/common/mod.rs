//! Shared fixtures: ensemble files from the repository plus the grid sizes
//! the integration tests standardize on.

use metexit::{parse_ensemble, EnsembleSpec, GridSpec};
use std::path::PathBuf;

/// Loads one of the ensemble description files shipped in `ensembles/`.
pub fn ensemble(name: &str) -> EnsembleSpec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../ensembles")
        .join(format!("{name}.json"));
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    parse_ensemble(&text).expect("shipped ensemble files are valid")
}

/// Coarse grid: fast, resolves thresholds to a couple of percent.
#[allow(dead_code)]
pub fn coarse_grid() -> GridSpec {
    GridSpec::new(18.0, 513).expect("static grid")
}

/// Medium grid: resolves the shipped ensembles' thresholds to well under
/// one percent while staying fast enough for routine test runs.
#[allow(dead_code)]
pub fn medium_grid() -> GridSpec {
    GridSpec::new(25.0, 1025).expect("static grid")
}
