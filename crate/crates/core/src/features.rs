//! Scalar features of asymptotic responses and parameter-plane feature maps.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ddesim::{simulate, HistorySpec, SimOptions, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::export::{write_heatmap, Pixel};
use crate::model::{ModelParams, State};
use crate::spectral::grid::check_axis;

/// Amplitudes above this count as oscillating.
pub const OSCILLATION_THRESHOLD: f64 = 1e-2;

/// Whether an amplitude feature indicates a sustained oscillation.
pub fn is_oscillating(amplitude: f64) -> bool {
    amplitude > OSCILLATION_THRESHOLD
}

/// Sum over the protein components of half their peak-to-peak range over
/// the samples in `[t0, t1]`. The resource column is not included.
pub fn amplitude_feature(traj: &Trajectory, t0: f64, t1: f64) -> Result<f64> {
    let w = traj.window(t0, t1)?;
    let mut total = 0.0;
    for c in 0..w.num_proteins() {
        let (lo, hi) = w
            .component(c)
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        total += 0.5 * (hi - lo);
    }
    Ok(total)
}

/// Number of uniform samples used for period and peak estimates.
const PHASE_SAMPLES: usize = 16384;
/// Autocorrelation below this at the period lag means "not periodic".
const PERIODIC_CORRELATION: f64 = 0.5;

/// Period of `x` (uniform spacing `dt`) from its autocorrelation.
///
/// The period is the first local maximum, past the first minimum, that
/// reaches 90% of the highest peak; refined by a parabola through three lags.
fn autocorrelation_period(x: &[f64], dt: f64) -> Result<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let y: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let var = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if !(var > 1e-24 * (1.0 + mean * mean)) {
        return Err(Error::NotPeriodic("signal is constant".into()));
    }
    let max_lag = n / 2;
    let r: Vec<f64> = (0..=max_lag)
        .map(|k| {
            let s: f64 = y[..n - k].iter().zip(&y[k..]).map(|(a, b)| a * b).sum();
            s / (n - k) as f64 / var
        })
        .collect();
    let Some(first_min) = (1..max_lag).find(|&k| r[k] <= r[k - 1] && r[k] <= r[k + 1]) else {
        return Err(Error::NotPeriodic("autocorrelation has no minimum".into()));
    };
    let is_peak = |k: usize| r[k] >= r[k - 1] && r[k] > r[k + 1];
    let best = (first_min..max_lag)
        .filter(|&k| is_peak(k))
        .map(|k| r[k])
        .fold(f64::NEG_INFINITY, f64::max);
    if !(best >= PERIODIC_CORRELATION) {
        return Err(Error::NotPeriodic(format!(
            "autocorrelation peak {best:.3} below {PERIODIC_CORRELATION}"
        )));
    }
    let k = (first_min..max_lag)
        .find(|&k| is_peak(k) && r[k] >= 0.9 * best)
        .expect("the best peak qualifies");
    Ok((k as f64 + parabolic_offset(r[k - 1], r[k], r[k + 1])) * dt)
}

/// Vertex of the parabola through `(-1, a), (0, b), (1, c)`.
fn parabolic_offset(a: f64, b: f64, c: f64) -> f64 {
    let den = a - 2.0 * b + c;
    if den.abs() < 1e-300 {
        0.0
    } else {
        (0.5 * (a - c) / den).clamp(-0.5, 0.5)
    }
}

/// Period of `p1` over `[t0, t1]` from its autocorrelation.
pub fn estimate_period(traj: &Trajectory, t0: f64, t1: f64) -> Result<f64> {
    let (cols, dt) = uniform_proteins(traj, t0, t1)?;
    autocorrelation_period(&cols[0], dt)
}

/// Protein columns resampled at [`PHASE_SAMPLES`] uniform times.
fn uniform_proteins(traj: &Trajectory, t0: f64, t1: f64) -> Result<(Vec<Vec<f64>>, f64)> {
    if !(t1 > t0) {
        return Err(Error::Domain(format!("empty window [{t0}, {t1}]")));
    }
    let t0 = t0.max(traj.start());
    let t1 = t1.min(traj.end());
    if !(t1 > t0) {
        return Err(Error::Domain("window outside the trajectory".into()));
    }
    let n = PHASE_SAMPLES;
    let dt = (t1 - t0) / (n - 1) as f64;
    let mut cols = vec![Vec::with_capacity(n); traj.num_proteins()];
    for i in 0..n {
        let x = traj.eval(t0 + i as f64 * dt)?;
        for (c, col) in cols.iter_mut().enumerate() {
            col.push(x[c]);
        }
    }
    Ok((cols, dt))
}

/// Peak-time offsets of each protein relative to `p1`, as fractions of the
/// period estimated from the autocorrelation of `p1` over `[t0, t1]`.
///
/// Peaks are located in the last full period of the window. Offsets are
/// wrapped to `[-0.5, 0.5)`, so in-phase signals give values near zero
/// whichever side of `p1` they peak on. The first entry is always zero.
pub fn peak_phase_offsets(traj: &Trajectory, t0: f64, t1: f64) -> Result<Vec<f64>> {
    let (cols, dt) = uniform_proteins(traj, t0, t1)?;
    let n = PHASE_SAMPLES;
    let period = autocorrelation_period(&cols[0], dt)?;
    let span = ((period / dt).round() as usize).clamp(3, n);
    let start = n - span;
    let peak_time = |col: &[f64]| -> f64 {
        let seg = &col[start..];
        let (j, _) = seg
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (j, &v)| if v > best.1 { (j, v) } else { best });
        let frac = if j > 0 && j + 1 < seg.len() {
            parabolic_offset(seg[j - 1], seg[j], seg[j + 1])
        } else {
            0.0
        };
        (start + j) as f64 + frac
    };
    let base = peak_time(&cols[0]);
    Ok(cols
        .iter()
        .map(|col| {
            let d = (peak_time(col) - base) * dt / period;
            d - (d + 0.5).floor()
        })
        .collect())
}

/// Simulation length and measuring window, in units of `max(tau_max, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureOptions {
    /// Simulated time span.
    pub horizon_delays: f64,
    /// Trailing part of the span the feature is measured over.
    pub window_delays: f64,
    pub sim: SimOptions,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self {
            horizon_delays: 1100.0,
            window_delays: 100.0,
            sim: SimOptions::default(),
        }
    }
}

impl FeatureOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_delays > 0.0 && self.horizon_delays >= self.window_delays) {
            return Err(invalid(
                "window_delays",
                "need 0 < window_delays <= horizon_delays",
            ));
        }
        Ok(())
    }

    /// `(t_end, window start)` for a model with longest delay `tau_max`.
    pub fn window_for(&self, tau_max: f64) -> (f64, f64) {
        let unit = tau_max.max(1.0);
        let end = self.horizon_delays * unit;
        (end, end - self.window_delays * unit)
    }
}

/// Feature of one simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureCell {
    pub axis1: f64,
    pub axis2: f64,
    /// Amplitude feature; `None` when the simulation failed.
    pub value: Option<f64>,
    pub final_state: Option<State>,
    pub error: Option<String>,
}

impl FeatureCell {
    pub fn status(&self) -> &'static str {
        if self.value.is_some() {
            "ok"
        } else {
            "failed"
        }
    }
}

/// Simulates `params` from the starvation history with initial production
/// `p0` and measures the amplitude feature over the trailing window.
pub fn feature_cell(params: &ModelParams, p0: &[f64], opts: &FeatureOptions) -> FeatureCell {
    let (t_end, t_win) = opts.window_for(params.max_delay());
    let sim = SimOptions {
        record_from: t_win,
        ..opts.sim
    };
    let run = || -> Result<(f64, State)> {
        let traj = simulate(params, &HistorySpec::starvation(p0.to_vec()), t_end, &sim)?;
        Ok((amplitude_feature(&traj, t_win, t_end)?, traj.final_state()))
    };
    match run() {
        Ok((v, s)) => FeatureCell {
            axis1: f64::NAN,
            axis2: f64::NAN,
            value: Some(v),
            final_state: Some(s),
            error: None,
        },
        Err(e) => FeatureCell {
            axis1: f64::NAN,
            axis2: f64::NAN,
            value: None,
            final_state: None,
            error: Some(e.to_string()),
        },
    }
}

/// A parameter varied along one axis of a feature map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureAxis {
    /// Initial production rate, shared by every protein.
    InitialProtein,
    /// Delay, shared by every protein.
    Delay,
    TotalResource,
}

impl FeatureAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::InitialProtein => "p0",
            Self::Delay => "tau",
            Self::TotalResource => "R_T",
        }
    }
}

/// Run metadata kept alongside a feature map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub params: ModelParams,
    /// Initial production used when `p0` is not an axis.
    pub p0: f64,
    pub options: FeatureOptions,
}

/// Amplitude features over a two-parameter grid, row-major with the first
/// axis fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureGrid {
    pub axis1: FeatureAxis,
    pub values1: Vec<f64>,
    pub axis2: FeatureAxis,
    pub values2: Vec<f64>,
    pub cells: Vec<FeatureCell>,
    pub meta: FeatureMeta,
}

/// Runs [`feature_cell`] at every grid point in parallel. Parameters not on
/// an axis come from `base`, and the initial production from `p0`.
pub fn feature_grid(
    base: &ModelParams,
    p0: f64,
    axis1: (FeatureAxis, &[f64]),
    axis2: (FeatureAxis, &[f64]),
    opts: &FeatureOptions,
) -> Result<FeatureGrid> {
    base.validate()?;
    opts.validate()?;
    if axis1.0 == axis2.0 {
        return Err(invalid("axis2", "the two axes must differ"));
    }
    check_axis(axis1.0.name(), axis1.1)?;
    check_axis(axis2.0.name(), axis2.1)?;
    if !(p0 >= 0.0 && p0.is_finite()) {
        return Err(invalid("p0", "must be finite and >= 0"));
    }
    let n1 = axis1.1.len();
    let cells = (0..n1 * axis2.1.len())
        .into_par_iter()
        .map(|idx| {
            let (a, b) = (axis1.1[idx % n1], axis2.1[idx / n1]);
            let mut params = *base;
            let mut init = p0;
            for (axis, v) in [(axis1.0, a), (axis2.0, b)] {
                match axis {
                    FeatureAxis::InitialProtein => init = v,
                    FeatureAxis::Delay => {
                        params = params.with_delay_and_resource(v, params.total_resource())
                    }
                    FeatureAxis::TotalResource => params = params.with_total_resource(v),
                }
            }
            let mut cell = feature_cell(&params, &vec![init; params.num_proteins()], opts);
            cell.axis1 = a;
            cell.axis2 = b;
            cell
        })
        .collect();
    Ok(FeatureGrid {
        axis1: axis1.0,
        values1: axis1.1.to_vec(),
        axis2: axis2.0,
        values2: axis2.1.to_vec(),
        cells,
        meta: FeatureMeta {
            params: *base,
            p0,
            options: *opts,
        },
    })
}

pub const FEATURE_CSV_HEADER: &str = "axis1,axis2,feature,status";

impl FeatureGrid {
    pub fn cell(&self, i1: usize, i2: usize) -> &FeatureCell {
        &self.cells[i2 * self.values1.len() + i1]
    }

    /// Rows `axis1,axis2,feature,status`; failed cells carry `NaN`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{FEATURE_CSV_HEADER}")?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{}",
                c.axis1,
                c.axis2,
                c.value.unwrap_or(f64::NAN),
                c.status()
            )?;
        }
        Ok(())
    }

    /// Heatmap of the feature over `[0, hi]`, `hi` being the largest value.
    pub fn write_ppm<W: Write>(&self, w: W, scale: usize) -> io::Result<()> {
        let hi = self
            .cells
            .iter()
            .filter_map(|c| c.value)
            .fold(0.0, f64::max);
        let px: Vec<Pixel> = self
            .cells
            .iter()
            .map(|c| c.value.map_or(Pixel::Failed, Pixel::Value))
            .collect();
        write_heatmap(w, &px, self.values1.len(), self.values2.len(), 0.0, hi, scale)
    }
}
