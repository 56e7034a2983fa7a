//! Shared inputs for the benchmarks.

use hodgeqi_core::{uniform_mesh, BoundedConfig, BuiltinField, GridField};

/// `ws_full` sampled on the lattice covering `[0, size]^2`.
pub fn wholespace_samples(h: f64, size: f64) -> GridField {
    let (origin, extents) = GridField::lattice_for_box(&[0.0, 0.0], &[size, size], h).expect("valid box");
    GridField::sample(origin, h, extents, |x| BuiltinField::WsFull.value(x)).expect("valid lattice")
}

/// `bd_full` on the unit square with its bounded-domain configuration.
pub fn bounded_samples(h: f64, ell: u32) -> (BoundedConfig, GridField) {
    let cfg = BoundedConfig::unit_square(h, ell, ell, 0.05);
    let (origin, extents) = cfg.lattice().expect("valid lattice");
    let data = GridField::sample(origin, h, extents, |x| BuiltinField::BdFull.value(x)).expect("valid lattice");
    (cfg, data)
}

/// `m x m` points on the centred unit square `[c - 1/2, c + 1/2]^2`.
pub fn centred_mesh(c: f64, m: usize) -> Vec<Vec<f64>> {
    uniform_mesh(&[c - 0.5, c - 0.5], &[c + 0.5, c + 0.5], m)
}
