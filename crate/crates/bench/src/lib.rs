//! Fixtures shared by the benchmarks.

use logconvex_core::domain_spectral::{build_interval_basis, Field, Grid};
use logconvex_core::heat_engine::HeatModel;
use std::sync::Arc;

pub fn interval_model(cells: usize, modes: usize) -> HeatModel {
    let grid = Arc::new(Grid::interval(1.0, cells).expect("valid grid"));
    let basis = Arc::new(build_interval_basis(1.0, modes).expect("valid basis"));
    HeatModel::new(basis, grid).expect("matching model")
}

/// Smooth bump supported in (0.3, 0.9).
pub fn bump(cells: usize) -> Field {
    let grid = Arc::new(Grid::interval(1.0, cells).expect("valid grid"));
    grid.sample(|x| {
        let s = (x[0] - 0.6) / 0.3;
        if s.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - s * s)).exp()
        }
    })
}
