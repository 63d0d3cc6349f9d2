//! Spectral-element discretisation of linear DDEs and stability sweeps.

pub(crate) mod grid;
pub mod mesh;
mod monodromy;

pub use grid::{
    linspace, stability_cell, stability_grid, CellStatus, StabilityCell, StabilityGrid,
    StabilityOptions, GRID_CSV_HEADER,
};
pub use mesh::SpectralMesh;
pub use monodromy::{
    build_monodromy, build_monodromy_with, classify, MonodromyResult, Stability, StabilityVerdict,
    MARGINAL_TOL, TRIVIAL_TOL,
};
