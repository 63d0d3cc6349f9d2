//! Delay-differential models of protein synthesis under a shared, limited
//! resource.
//!
//! - [`model`]: single- and three-protein models, equilibria, linearisation.
//! - [`ddesim`]: fixed-step simulation from the starved-cell history.
//! - [`spectral`]: monodromy matrices, Floquet multipliers, stability grids.
//! - [`features`]: amplitude, period and phase of simulated responses.
//! - [`bvp`]: periodic orbits by spectral-element collocation.
//! - [`fitting`]: boundary extraction and polynomial fits.
//!
//! ```
//! use ribodelay::model::{EquilibriumKind, ModelParams, SingleProteinParams};
//! use ribodelay::spectral::{build_monodromy, SpectralMesh};
//!
//! let params: ModelParams = SingleProteinParams::new(12.0, 50.0).into();
//! let set = params.equilibria().unwrap();
//! let sys = params.linearize(set.get(EquilibriumKind::Top).unwrap()).unwrap();
//! let res = build_monodromy(&sys, 12.0, &SpectralMesh::default()).unwrap();
//! assert!(res.dominant.norm() < 1.0);
//! ```

// NaN must fail validation, so negated comparisons are deliberate. Index
// loops mirror the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bvp;
pub mod ddesim;
pub mod error;
pub mod export;
pub mod features;
pub mod fitting;
pub mod linalg;
pub mod model;
pub mod spectral;

pub use error::{Error, Result};

// The guide's code blocks run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/stability.md")]
    mod stability {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/periodic.md")]
    mod periodic {}
    #[doc = include_str!("../../../book/src/boundaries.md")]
    mod boundaries {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
