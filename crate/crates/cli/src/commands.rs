//! Command bodies. Each takes fully resolved settings, writes its files
//! through [`Outputs`] and reports how the run ended.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ribodelay::bvp::{bvp_residual, solve_from_simulation, BvpOptions, GuessOptions};
use ribodelay::ddesim::{simulate, HistorySpec, SimOptions};
use ribodelay::features::{amplitude_feature, estimate_period, feature_grid, is_oscillating, FeatureOptions};
use ribodelay::fitting::{boundary_points, extract_boundary, fit_polynomial, BoundaryCriterion};
use ribodelay::model::{DelayModel, EquilibriumKind, ModelParams, State};
use ribodelay::spectral::{
    build_monodromy, classify, stability_grid, CellStatus, SpectralMesh, StabilityGrid, StabilityOptions,
};
use serde::Serialize;

use crate::config::{AxisRange, EqChoice, FeatureAxisConfig};
use crate::output::{sha256_hex, Outputs};

/// How a command finished when it produced its files.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    /// Some cells or roots may be missing.
    Incomplete,
    NotConverged,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Self::Ok => 0,
            Self::Incomplete => 3,
            Self::NotConverged => 4,
        }
    }

    pub fn worst(self, other: Self) -> Self {
        if other.exit_code() > self.exit_code() {
            other
        } else {
            self
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EquilibriaRun {
    pub params: ModelParams,
    pub mesh: SpectralMesh,
}

#[derive(Serialize)]
struct EquilibriumReport {
    kind: EquilibriumKind,
    proteins: Vec<f64>,
    resource: f64,
    degenerate: bool,
    stability: Option<String>,
    dominant_multiplier: Option<[f64; 2]>,
    modulus: Option<f64>,
}

pub fn equilibria(run: &EquilibriaRun, dir: &Path) -> Result<(Outcome, Vec<PathBuf>)> {
    let set = run.params.equilibria()?;
    let mut reports = Vec::new();
    for eq in &set.points {
        let verdict = run.params.linearize(eq).and_then(|sys| {
            let period = if sys.max_delay() > 0.0 { sys.max_delay() } else { 1.0 };
            build_monodromy(&sys, period, &run.mesh).map(|res| classify(&res, ribodelay::spectral::MARGINAL_TOL))
        });
        let verdict = verdict.ok();
        reports.push(EquilibriumReport {
            kind: eq.kind,
            proteins: eq.state.proteins.clone(),
            resource: eq.state.resource,
            degenerate: eq.degenerate,
            stability: verdict.map(|v| v.kind.as_str().to_string()),
            dominant_multiplier: verdict.map(|v| [v.dominant.re, v.dominant.im]),
            modulus: verdict.map(|v| v.dominant_modulus),
        });
    }
    let doc = serde_json::json!({
        "params": run.params,
        "incomplete": set.incomplete,
        "equilibria": reports,
    });
    let mut out = Outputs::new(dir, "equilibria", run)?;
    out.write_json("equilibria.json", &doc)?;
    let outcome = if set.incomplete { Outcome::Incomplete } else { Outcome::Ok };
    Ok((outcome, out.written().to_vec()))
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulateRun {
    pub params: ModelParams,
    pub p0: f64,
    pub t_end: f64,
    pub sim: SimOptions,
    /// Upper bound on CSV rows; samples are thinned evenly to fit.
    pub samples: usize,
}

pub fn simulate_cmd(run: &SimulateRun, dir: &Path) -> Result<(Outcome, Vec<PathBuf>)> {
    let p0 = vec![run.p0; run.params.num_proteins()];
    let traj = simulate(&run.params, &HistorySpec::starvation(p0), run.t_end, &run.sim)?;
    let stride = traj.len().div_ceil(run.samples.max(1)).max(1);
    let mut csv = String::from("t");
    for i in 1..traj.dim() {
        csv.push_str(&format!(",p{i}"));
    }
    csv.push_str(",R\n");
    let times = traj.times();
    let mut rows: Vec<usize> = (0..traj.len()).step_by(stride).collect();
    if rows.last() != Some(&(traj.len() - 1)) {
        rows.push(traj.len() - 1);
    }
    for i in rows {
        csv.push_str(&times[i].to_string());
        for x in traj.sample(i) {
            csv.push(',');
            csv.push_str(&x.to_string());
        }
        csv.push('\n');
    }
    // Measured over the trailing part of the run, past the transient.
    let t1 = traj.end();
    let t0 = (t1 - 100.0 * run.params.max_delay().max(1.0)).max(0.5 * (traj.start() + t1));
    let amplitude = amplitude_feature(&traj, t0, t1)?;
    let period = if is_oscillating(amplitude) {
        estimate_period(&traj, t0, t1).ok()
    } else {
        None
    };
    let summary = serde_json::json!({
        "window": [t0, t1],
        "amplitude": amplitude,
        "oscillating": is_oscillating(amplitude),
        "period": period,
        "final_state": traj.final_state(),
    });
    let mut out = Outputs::new(dir, "simulate", run)?;
    out.write("simulation.csv", csv.as_bytes())?;
    out.write_json("simulation.json", &summary)?;
    Ok((Outcome::Ok, out.written().to_vec()))
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityRun {
    pub base: ModelParams,
    pub tau: AxisRange,
    pub rt: AxisRange,
    pub eq: EqChoice,
    pub options: StabilityOptions,
    pub scale: usize,
}

impl StabilityRun {
    fn stem(&self) -> String {
        let eq = match self.eq {
            EqChoice::Top => "top",
            EqChoice::Middle => "middle",
        };
        format!("stability_{eq}")
    }
}

pub fn stability(run: &StabilityRun, dir: &Path, resume: bool) -> Result<(Outcome, Vec<PathBuf>)> {
    let stem = run.stem();
    let names = [format!("{stem}.csv"), format!("{stem}.ppm"), format!("{stem}.json")];
    let mut out = Outputs::new(dir, "stability-grid", run)?;
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    if resume && out.up_to_date(&refs) {
        log::info!("{} is up to date", out.path(&names[0]).display());
        let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.path(&names[2]))?)?;
        let count = |v: &serde_json::Value| v.as_u64().unwrap_or(0) as usize;
        let outcome = grid_outcome(count(&summary["counts"]["failed"]), count(&summary["incomplete_cells"]));
        return Ok((outcome, names.iter().map(|n| out.path(n)).collect()));
    }
    let grid = stability_grid(&run.base, &run.tau.values(), &run.rt.values(), run.eq.into(), &run.options)?;
    let mut csv = Vec::new();
    grid.write_csv(&mut csv)?;
    let mut ppm = Vec::new();
    grid.write_ppm(&mut ppm, run.scale)?;
    let counts: serde_json::Map<String, serde_json::Value> = [
        CellStatus::Stable,
        CellStatus::Unstable,
        CellStatus::Marginal,
        CellStatus::Absent,
        CellStatus::Failed,
    ]
    .iter()
    .map(|s| (s.as_str().to_string(), grid.count(*s).into()))
    .collect();
    let errors: Vec<_> = grid
        .cells
        .iter()
        .filter_map(|c| c.error.as_ref().map(|e| serde_json::json!({"tau": c.tau, "R_T": c.total_resource, "error": e})))
        .collect();
    let summary = serde_json::json!({
        "counts": counts,
        "incomplete_cells": grid.incomplete_cells(),
        "errors": errors,
    });
    out.write(&names[0], &csv)?;
    out.write(&names[1], &ppm)?;
    out.write_json(&names[2], &summary)?;
    let outcome = grid_outcome(grid.count(CellStatus::Failed), grid.incomplete_cells());
    Ok((outcome, out.written().to_vec()))
}

fn grid_outcome(failed: usize, incomplete: usize) -> Outcome {
    if failed + incomplete > 0 {
        Outcome::Incomplete
    } else {
        Outcome::Ok
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FeatureRun {
    pub base: ModelParams,
    pub p0: f64,
    pub x: FeatureAxisConfig,
    pub y: FeatureAxisConfig,
    pub options: FeatureOptions,
    pub scale: usize,
}

pub fn features(run: &FeatureRun, dir: &Path, resume: bool) -> Result<(Outcome, Vec<PathBuf>)> {
    let names = ["features.csv", "features.ppm", "features.json"];
    let mut out = Outputs::new(dir, "feature-grid", run)?;
    if resume && out.up_to_date(&names) {
        log::info!("{} is up to date", out.path(names[0]).display());
        let text = std::fs::read_to_string(out.path(names[0]))?;
        let failed = text.lines().filter(|l| l.ends_with(",failed")).count();
        return Ok((grid_outcome(failed, 0), names.iter().map(|n| out.path(n)).collect()));
    }
    let grid = feature_grid(
        &run.base,
        run.p0,
        (run.x.param, &run.x.values()),
        (run.y.param, &run.y.values()),
        &run.options,
    )?;
    let mut csv = Vec::new();
    grid.write_csv(&mut csv)?;
    let mut ppm = Vec::new();
    grid.write_ppm(&mut ppm, run.scale)?;
    out.write(names[0], &csv)?;
    out.write(names[1], &ppm)?;
    out.write_json(names[2], &grid)?;
    let failed = grid.cells.iter().filter(|c| c.value.is_none()).count();
    Ok((grid_outcome(failed, 0), out.written().to_vec()))
}

#[derive(Clone, Debug, Serialize)]
pub struct BvpRun {
    pub params: ModelParams,
    pub guess: GuessOptions,
    pub options: BvpOptions,
    pub samples: usize,
    /// Production below this counts as shut down for the dwell fraction.
    pub dwell_threshold: f64,
}

pub fn bvp(run: &BvpRun, dir: &Path) -> Result<(Outcome, Vec<PathBuf>)> {
    let sol = solve_from_simulation(&run.params, &run.guess, &run.options)?;
    let eq = run.params.equilibria().ok();
    let top = eq
        .as_ref()
        .and_then(|s| s.get(EquilibriumKind::Top))
        .map(|e| e.state.clone());
    let summary = serde_json::json!({
        "params": run.params,
        "converged": sol.converged,
        "degenerate": sol.degenerate,
        "period": sol.period,
        "delays": run.params.delays(),
        "relative_period_offset": (sol.period - run.params.max_delay()) / run.params.max_delay(),
        "beta": sol.beta,
        "residual_norm": sol.residual_norm,
        "independent_residual": bvp_residual(&sol, &run.params),
        "iterations": sol.iterations,
        "residual_history": sol.residual_history,
        "dwell_fraction": sol.dwell_fraction(run.dwell_threshold),
        "peak_offsets": sol.peak_offsets(),
        "top_equilibrium": top.map(|s: State| s.to_vec()),
        "mesh": sol.mesh,
        "nodes": sol.nodes,
        "states": sol.states,
    });
    let mut csv = Vec::new();
    sol.write_csv(&mut csv, run.samples)?;
    let mut out = Outputs::new(dir, "bvp", run)?;
    out.write_json("periodic.json", &summary)?;
    out.write("periodic.csv", &csv)?;
    let outcome = if sol.converged { Outcome::Ok } else { Outcome::NotConverged };
    Ok((outcome, out.written().to_vec()))
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryRun {
    pub input: PathBuf,
    pub input_sha256: String,
    pub criterion: BoundaryCriterion,
    pub degree: usize,
    pub min_tau: f64,
    pub first_only: bool,
}

impl BoundaryRun {
    pub fn new(
        input: PathBuf,
        criterion: BoundaryCriterion,
        degree: usize,
        min_tau: f64,
        first_only: bool,
    ) -> Result<Self> {
        let data = std::fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
        Ok(Self {
            input,
            input_sha256: sha256_hex(&data),
            criterion,
            degree,
            min_tau,
            first_only,
        })
    }
}

pub fn boundary(run: &BoundaryRun, dir: &Path) -> Result<(Outcome, Vec<PathBuf>)> {
    let grid = StabilityGrid::read_csv(BufReader::new(File::open(&run.input)?))
        .with_context(|| format!("parsing {}", run.input.display()))?;
    let crossings = extract_boundary(&grid, run.criterion);
    let mut csv = String::from("tau,R_T,index\n");
    for c in &crossings {
        csv.push_str(&format!("{},{},{}\n", c.tau, c.total_resource, c.index));
    }
    let points = boundary_points(&crossings, run.min_tau, run.first_only);
    let fit = fit_polynomial(&points, run.degree)?;
    let mut out = Outputs::new(dir, "boundary-fit", run)?;
    out.write("boundary.csv", csv.as_bytes())?;
    out.write_json("boundary.json", &fit)?;
    let outcome = if grid.count(CellStatus::Failed) > 0 {
        Outcome::Incomplete
    } else {
        Outcome::Ok
    };
    Ok((outcome, out.written().to_vec()))
}
