use serde::{Deserialize, Serialize};

use super::hill::HillParams;
use crate::error::{invalid, Error, Result};

/// Rate constants of the single-protein model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleProteinParams {
    #[serde(default)]
    pub hill: HillParams,
    /// Sequestration rate `A`.
    pub sequestration: f64,
    /// Maximal growth rate `B`.
    pub max_growth: f64,
    /// Decay rate `D`.
    pub decay: f64,
    /// Production delay.
    pub delay: f64,
    /// Total resource `R_T`.
    pub total_resource: f64,
}

impl SingleProteinParams {
    /// Model with the reference constants `kappa = 0.5, n = 2, A = 1, B = 2, D = 10`.
    pub fn new(delay: f64, total_resource: f64) -> Self {
        Self {
            hill: HillParams::default(),
            sequestration: 1.0,
            max_growth: 2.0,
            decay: 10.0,
            delay,
            total_resource,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hill.validate()?;
        positive("sequestration", self.sequestration)?;
        positive("max_growth", self.max_growth)?;
        positive("decay", self.decay)?;
        nonnegative("delay", self.delay)?;
        nonnegative("total_resource", self.total_resource)
    }
}

/// Rate constants of the three-protein model with a shared resource pool.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreeProteinParams {
    #[serde(default)]
    pub hill: HillParams,
    pub sequestration: f64,
    pub max_growth: [f64; 3],
    pub decay: [f64; 3],
    pub delays: [f64; 3],
    pub total_resource: f64,
}

impl ThreeProteinParams {
    /// Reference constants with every protein sharing `delay`.
    pub fn new(delay: f64, total_resource: f64) -> Self {
        Self {
            hill: HillParams::default(),
            sequestration: 1.0,
            max_growth: [2.0; 3],
            decay: [10.0; 3],
            delays: [delay; 3],
            total_resource,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hill.validate()?;
        positive("sequestration", self.sequestration)?;
        for i in 0..3 {
            positive("max_growth", self.max_growth[i])?;
            positive("decay", self.decay[i])?;
            nonnegative("delays", self.delays[i])?;
        }
        nonnegative("total_resource", self.total_resource)
    }

    /// Proteins 2 and 3 are interchangeable.
    pub fn is_symmetric(&self) -> bool {
        self.max_growth[1] == self.max_growth[2]
            && self.decay[1] == self.decay[2]
            && self.delays[1] == self.delays[2]
    }

    /// All three production delays coincide (to 1e-12).
    pub fn has_equal_delays(&self) -> bool {
        let d = self.delays;
        (d[0] - d[1]).abs() <= 1e-12 && (d[0] - d[2]).abs() <= 1e-12
    }

    pub fn max_delay(&self) -> f64 {
        self.delays.iter().copied().fold(0.0, f64::max)
    }
}

/// Either model variant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    Single(SingleProteinParams),
    Three(ThreeProteinParams),
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Single(p) => p.validate(),
            Self::Three(p) => p.validate(),
        }
    }

    pub fn num_proteins(&self) -> usize {
        match self {
            Self::Single(_) => 1,
            Self::Three(_) => 3,
        }
    }

    pub fn total_resource(&self) -> f64 {
        match self {
            Self::Single(p) => p.total_resource,
            Self::Three(p) => p.total_resource,
        }
    }

    pub fn max_delay(&self) -> f64 {
        match self {
            Self::Single(p) => p.delay,
            Self::Three(p) => p.max_delay(),
        }
    }

    /// Same model with every delay set to `delay` and the given total resource.
    pub fn with_delay_and_resource(&self, delay: f64, total_resource: f64) -> Self {
        match *self {
            Self::Single(p) => Self::Single(SingleProteinParams {
                delay,
                total_resource,
                ..p
            }),
            Self::Three(p) => Self::Three(ThreeProteinParams {
                delays: [delay; 3],
                total_resource,
                ..p
            }),
        }
    }

    pub fn with_total_resource(&self, total_resource: f64) -> Self {
        match *self {
            Self::Single(p) => Self::Single(SingleProteinParams {
                total_resource,
                ..p
            }),
            Self::Three(p) => Self::Three(ThreeProteinParams {
                total_resource,
                ..p
            }),
        }
    }
}

impl From<SingleProteinParams> for ModelParams {
    fn from(p: SingleProteinParams) -> Self {
        Self::Single(p)
    }
}

impl From<ThreeProteinParams> for ModelParams {
    fn from(p: ThreeProteinParams) -> Self {
        Self::Three(p)
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {v}")))
    }
}

fn nonnegative(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be non-negative and finite, got {v}")))
    }
}

/// Production rates and free resource at one instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct State {
    pub proteins: Vec<f64>,
    pub resource: f64,
}

impl State {
    pub fn new(proteins: Vec<f64>, resource: f64) -> Self {
        Self {
            proteins,
            resource,
        }
    }

    pub fn single(p: f64, r: f64) -> Self {
        Self::new(vec![p], r)
    }

    pub fn dim(&self) -> usize {
        self.proteins.len() + 1
    }

    /// Flat layout `[p_1, .., p_k, R]` used by the solvers.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.proteins.clone();
        v.push(self.resource);
        v
    }

    pub fn from_slice(x: &[f64]) -> Self {
        let (r, p) = x.split_last().expect("state needs at least the resource");
        Self::new(p.to_vec(), *r)
    }

    pub(crate) fn expect_dim(&self, dim: usize, what: &str) -> Result<()> {
        if self.dim() == dim {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "{what}: expected state dimension {dim}, got {}",
                self.dim()
            )))
        }
    }
}
