//! The single- and three-protein resource-sharing models.
//!
//! Both models share one structure. Each protein is produced from a
//! sequestration flux that started one delay earlier and decays linearly,
//! while the free resource `R` changes by the flux returning from completed
//! production minus the flux entering sequestration now:
//!
//! ```text
//! dR/dt = A * (sum_k mu_k(x(t - tau_k)) - sum_k mu_k(x(t)))
//! ```
//!
//! The [`DelayModel`] trait exposes that structure to the simulator, the
//! periodic-orbit solver and the linearisation.

mod hill;
mod linear;
mod params;
pub mod poly;
mod single;
mod three;

pub use hill::{hill, hill_derivative, HillParams};
pub use linear::{DelayedTerm, LinearDDE, DELAY_MERGE_TOL};
pub use params::{ModelParams, SingleProteinParams, State, ThreeProteinParams};
pub use single::{
    equilibria_single, equilibria_single_by_isolation, linearize_single, rhs_single,
    saddle_node_boundary_single,
};
pub use three::{equilibria_three, equilibria_three_with, linearize_three, rhs_three, StartGrid};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::Matrix;

/// Which fixed point of the model a state is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    /// No production, all resource free.
    Trivial,
    /// The nontrivial point with the smaller production vector.
    Middle,
    /// The nontrivial point with the largest production vector (l2 norm).
    Top,
}

/// A fixed point of either model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    #[serde(flatten)]
    pub state: State,
    pub kind: EquilibriumKind,
    /// Set when middle and top coincide (fold); the point is reported once as `Top`.
    #[serde(default)]
    pub degenerate: bool,
}

/// All equilibria found for a parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub points: Vec<Equilibrium>,
    /// The root search may have missed solutions.
    pub incomplete: bool,
}

impl EquilibriumSet {
    pub fn get(&self, kind: EquilibriumKind) -> Option<&Equilibrium> {
        self.points.iter().find(|e| e.kind == kind)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nontrivial(&self) -> impl Iterator<Item = &Equilibrium> {
        self.points
            .iter()
            .filter(|e| e.kind != EquilibriumKind::Trivial)
    }
}

/// A constant-delay model in flat state layout `[p_1, .., p_k, R]`.
pub trait DelayModel: Sync {
    /// State dimension (proteins plus resource).
    fn dim(&self) -> usize;

    /// One delay per delayed argument; entries may repeat.
    fn delays(&self) -> &[f64];

    fn total_resource(&self) -> f64;

    /// Sequestration rate `A`.
    fn sequestration(&self) -> f64;

    /// Writes the right-hand side; `delayed[k]` is the state at `t - delays()[k]`.
    fn eval(&self, now: &[f64], delayed: &[&[f64]], out: &mut [f64]);

    /// Jacobians with respect to the current state and each delayed state.
    fn jacobians(&self, now: &[f64], delayed: &[&[f64]]) -> (Matrix, Vec<Matrix>);

    /// Sequestration flux `mu_k(x)` that returns after `delays()[k]`.
    fn flux(&self, k: usize, x: &[f64]) -> f64;

    /// Gradient of [`DelayModel::flux`] with respect to the state.
    fn flux_gradient(&self, k: usize, x: &[f64], out: &mut [f64]);

    fn max_delay(&self) -> f64 {
        self.delays().iter().copied().fold(0.0, f64::max)
    }

    /// `R + A * sum_k (flux_k * delay_k)` for a constant state; equals the
    /// total resource at an equilibrium.
    fn constant_state_total(&self, x: &[f64]) -> f64 {
        let a = self.sequestration();
        x[self.dim() - 1]
            + a * self
                .delays()
                .iter()
                .enumerate()
                .map(|(k, &d)| self.flux(k, x) * d)
                .sum::<f64>()
    }
}

impl DelayModel for ModelParams {
    fn dim(&self) -> usize {
        match self {
            Self::Single(p) => p.dim(),
            Self::Three(p) => p.dim(),
        }
    }

    fn delays(&self) -> &[f64] {
        match self {
            Self::Single(p) => DelayModel::delays(p),
            Self::Three(p) => DelayModel::delays(p),
        }
    }

    fn total_resource(&self) -> f64 {
        ModelParams::total_resource(self)
    }

    fn sequestration(&self) -> f64 {
        match self {
            Self::Single(p) => p.sequestration,
            Self::Three(p) => p.sequestration,
        }
    }

    fn eval(&self, now: &[f64], delayed: &[&[f64]], out: &mut [f64]) {
        match self {
            Self::Single(p) => p.eval(now, delayed, out),
            Self::Three(p) => p.eval(now, delayed, out),
        }
    }

    fn jacobians(&self, now: &[f64], delayed: &[&[f64]]) -> (Matrix, Vec<Matrix>) {
        match self {
            Self::Single(p) => p.jacobians(now, delayed),
            Self::Three(p) => p.jacobians(now, delayed),
        }
    }

    fn flux(&self, k: usize, x: &[f64]) -> f64 {
        match self {
            Self::Single(p) => p.flux(k, x),
            Self::Three(p) => p.flux(k, x),
        }
    }

    fn flux_gradient(&self, k: usize, x: &[f64], out: &mut [f64]) {
        match self {
            Self::Single(p) => p.flux_gradient(k, x, out),
            Self::Three(p) => p.flux_gradient(k, x, out),
        }
    }
}

impl ModelParams {
    /// Equilibria of whichever model this is.
    pub fn equilibria(&self) -> Result<EquilibriumSet> {
        match self {
            Self::Single(p) => equilibria_single(p),
            Self::Three(p) => equilibria_three(p),
        }
    }

    /// Linearisation about one of this model's equilibria.
    pub fn linearize(&self, eq: &Equilibrium) -> Result<LinearDDE> {
        match self {
            Self::Single(p) => linearize_single(eq, p),
            Self::Three(p) => linearize_three(eq, p),
        }
    }
}
