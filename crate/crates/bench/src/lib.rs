//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use dyndtn::coeffs::{preset_oscillating, CoefficientFamily};
use dyndtn::mesh::{generate_disk_mesh, TriMesh};

/// Unit disk with target mesh size `h`.
pub fn disk(h: f64) -> Arc<TriMesh> {
    Arc::new(generate_disk_mesh(1.0, h).expect("valid disk parameters"))
}

/// The time-dependent family used by every benchmark.
pub fn family() -> CoefficientFamily {
    preset_oscillating(-1.0, 0.3, 1.0).expect("valid preset parameters")
}
