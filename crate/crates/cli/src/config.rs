//! Run configuration: a TOML file whose values command-line flags override.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use ribodelay::bvp::PhaseCondition;
use ribodelay::features::FeatureAxis;
use ribodelay::fitting::BoundaryCriterion;
use ribodelay::model::{EquilibriumKind, HillParams, ModelParams, SingleProteinParams, ThreeProteinParams};
use ribodelay::spectral::linspace;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Single,
    Three,
}

/// Equilibrium a stability grid follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EqChoice {
    Top,
    Middle,
}

impl From<EqChoice> for EquilibriumKind {
    fn from(e: EqChoice) -> Self {
        match e {
            EqChoice::Top => EquilibriumKind::Top,
            EqChoice::Middle => EquilibriumKind::Middle,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerProtein {
    One(f64),
    Three([f64; 3]),
}

impl PerProtein {
    fn single(self, key: &str) -> Result<f64> {
        match self {
            Self::One(v) => Ok(v),
            Self::Three(_) => bail!("params.{key}: the single-protein model takes one value"),
        }
    }

    fn three(self) -> [f64; 3] {
        match self {
            Self::One(v) => [v; 3],
            Self::Three(v) => v,
        }
    }
}

/// `[params]`: model constants. Unset values take the reference constants.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub tau: Option<f64>,
    /// Per-protein delays of the three-protein model.
    pub taus: Option<[f64; 3]>,
    pub rt: Option<f64>,
    pub kappa: Option<f64>,
    pub n: Option<u32>,
    pub a: Option<f64>,
    pub b: Option<PerProtein>,
    pub d: Option<PerProtein>,
}

impl ParamsConfig {
    /// Model parameters; `tau` and `rt` fall back to `defaults` when unset.
    pub fn build(&self, kind: ModelKind, defaults: Option<(f64, f64)>) -> Result<ModelParams> {
        let (tau, rt) = match defaults {
            Some((dt, dr)) => (self.tau.unwrap_or(dt), self.rt.unwrap_or(dr)),
            None => {
                let tau = match (self.tau, self.taus) {
                    (Some(t), _) => t,
                    (None, Some(_)) => 0.0,
                    (None, None) => bail!("params.tau is required"),
                };
                (tau, self.rt.ok_or_else(|| anyhow!("params.rt is required"))?)
            }
        };
        let hill = HillParams {
            kappa: self.kappa.unwrap_or(HillParams::default().kappa),
            n: self.n.unwrap_or(HillParams::default().n),
        };
        let params = match kind {
            ModelKind::Single => {
                if self.taus.is_some() {
                    bail!("params.taus: only the three-protein model has per-protein delays");
                }
                let mut p = SingleProteinParams::new(tau, rt);
                p.hill = hill;
                if let Some(a) = self.a {
                    p.sequestration = a;
                }
                if let Some(b) = self.b {
                    p.max_growth = b.single("b")?;
                }
                if let Some(d) = self.d {
                    p.decay = d.single("d")?;
                }
                ModelParams::Single(p)
            }
            ModelKind::Three => {
                let mut p = ThreeProteinParams::new(tau, rt);
                p.hill = hill;
                if let Some(taus) = self.taus {
                    if self.tau.is_some() {
                        bail!("params: set either tau or taus, not both");
                    }
                    p.delays = taus;
                }
                if let Some(a) = self.a {
                    p.sequestration = a;
                }
                if let Some(b) = self.b {
                    p.max_growth = b.three();
                }
                if let Some(d) = self.d {
                    p.decay = d.three();
                }
                ModelParams::Three(p)
            }
        };
        params.validate()?;
        Ok(params)
    }
}

/// Evenly spaced values `min..=max`, written `min:max:n` on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl AxisRange {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.min, self.max, self.n)
    }
}

impl FromStr for AxisRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts[..] else {
            return Err(format!("expected MIN:MAX:N, got `{s}`"));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
        Ok(Self {
            min: num(lo)?,
            max: num(hi)?,
            n: n.trim().parse().map_err(|e| format!("`{n}`: {e}"))?,
        })
    }
}

/// A feature-map axis: parameter name plus range, `param:min:max:n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureAxisConfig {
    pub param: FeatureAxis,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl FeatureAxisConfig {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.min, self.max, self.n)
    }
}

pub fn parse_feature_axis_name(s: &str) -> std::result::Result<FeatureAxis, String> {
    match s {
        "p0" | "initial_protein" => Ok(FeatureAxis::InitialProtein),
        "tau" | "delay" => Ok(FeatureAxis::Delay),
        "rt" | "R_T" | "total_resource" => Ok(FeatureAxis::TotalResource),
        _ => Err(format!("unknown axis `{s}` (expected p0, tau or rt)")),
    }
}

impl FromStr for FeatureAxisConfig {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (name, range) = s
            .split_once(':')
            .ok_or_else(|| format!("expected PARAM:MIN:MAX:N, got `{s}`"))?;
        let r: AxisRange = range.parse()?;
        Ok(Self {
            param: parse_feature_axis_name(name)?,
            min: r.min,
            max: r.max,
            n: r.n,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub p0: Option<f64>,
    pub t_end: Option<f64>,
    pub record_from: Option<f64>,
    pub max_step: Option<f64>,
    pub steps_per_delay: Option<usize>,
    /// Maximum number of CSV rows.
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub tau: Option<AxisRange>,
    pub rt: Option<AxisRange>,
    pub eq: Option<EqChoice>,
    pub elements: Option<usize>,
    pub order: Option<usize>,
    /// Pixels per cell in the heatmap.
    pub scale: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturesConfig {
    pub x: Option<FeatureAxisConfig>,
    pub y: Option<FeatureAxisConfig>,
    pub p0: Option<f64>,
    pub horizon_delays: Option<f64>,
    pub window_delays: Option<f64>,
    pub max_step: Option<f64>,
    pub scale: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BvpConfig {
    pub p0: Option<f64>,
    pub elements: Option<usize>,
    pub order: Option<usize>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub phase: Option<PhaseCondition>,
    pub horizon_delays: Option<f64>,
    pub window_delays: Option<f64>,
    pub periods_back: Option<f64>,
    /// Rows of the resampled solution CSV.
    pub samples: Option<usize>,
    /// Production below this counts as shut down in the dwell fraction.
    pub dwell_threshold: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    /// Stability grid CSV to scan.
    pub input: Option<PathBuf>,
    pub criterion: Option<BoundaryCriterion>,
    pub degree: Option<usize>,
    pub min_tau: Option<f64>,
    pub first_only: Option<bool>,
}

/// Contents of a configuration file. Every section is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelKind>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub stability: StabilityConfig,
    #[serde(default)]
    pub features: FeaturesConfig,
    #[serde(default)]
    pub bvp: BvpConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).map_err(|e| anyhow!("{}: {}", path.display(), e.to_string().trim_end()))
    }

    pub fn model_kind(&self) -> ModelKind {
        self.model.unwrap_or(ModelKind::Single)
    }
}

/// Sets `slot` when the flag was given.
pub fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_named() {
        let err = toml::from_str::<RunConfig>("[params]\ntua = 3\n").unwrap_err();
        assert!(err.to_string().contains("tua"));
    }

    #[test]
    fn per_protein_values() {
        let c: RunConfig = toml::from_str("model = \"three\"\n[params]\ntau = 5.7\nrt = 100\nb = [2, 3, 3]\n").unwrap();
        let ModelParams::Three(p) = c.params.build(c.model_kind(), None).unwrap() else {
            panic!("expected the three-protein model");
        };
        assert_eq!(p.max_growth, [2.0, 3.0, 3.0]);
        assert_eq!(p.delays, [5.7; 3]);
    }

    #[test]
    fn axis_strings() {
        let a: AxisRange = "0:20:81".parse().unwrap();
        assert_eq!(a.values()[1], 0.25);
        assert!("0:20".parse::<AxisRange>().is_err());
        let f: FeatureAxisConfig = "rt:0:50:51".parse().unwrap();
        assert_eq!(f.param, FeatureAxis::TotalResource);
    }

    #[test]
    fn point_commands_need_tau_and_rt() {
        let p = ParamsConfig::default();
        assert!(p.build(ModelKind::Single, None).is_err());
        assert!(p.build(ModelKind::Single, Some((0.0, 0.0))).is_ok());
    }
}
