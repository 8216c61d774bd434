//! Shared fixtures for the benchmarks.

use damd_core::mdist::StatParams;
use damd_core::physics::{KField, PhysicsConfig};
use damd_core::Grid2D;

/// Standard grid with the deterministic model at `k = 1`.
pub fn standard_setup() -> (Grid2D, PhysicsConfig) {
    let grid = Grid2D::standard();
    let cfg = PhysicsConfig::standard(0.4, 0.5, KField::constant(1.0, &grid));
    (grid, cfg)
}

pub fn prior() -> StatParams {
    StatParams::k_only(2.0, 0.2, Some(0.2))
}
