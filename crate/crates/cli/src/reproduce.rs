//! Bundled runs behind the published figures.
//!
//! Each figure writes into its own subdirectory. Model constants come from
//! the `[params]` section of the configuration (reference values when
//! absent); delays, resources and grid ranges are those of the figure.

use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use ribodelay::bvp::GuessOptions;
use ribodelay::ddesim::SimOptions;
use ribodelay::features::{FeatureAxis, FeatureOptions};
use ribodelay::fitting::BoundaryCriterion;
use ribodelay::model::{saddle_node_boundary_single, ModelParams};
use ribodelay::spectral::StabilityOptions;

use crate::commands::{self, BoundaryRun, EquilibriaRun, FeatureRun, Outcome, SimulateRun, StabilityRun};
use crate::config::{AxisRange, EqChoice, FeatureAxisConfig, ModelKind, RunConfig};
use crate::output::Outputs;

pub const FIGURES: &[&str] = &[
    "fig1", "fig2", "fig3", "fig4a", "fig4b", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11",
    "fig12", "fig13", "all",
];

pub fn is_known(figure: &str) -> bool {
    FIGURES.contains(&figure)
}

type Produced = (Outcome, Vec<PathBuf>);

fn params(cfg: &RunConfig, kind: ModelKind, tau: f64, rt: f64) -> Result<ModelParams> {
    let mut p = cfg.params.clone();
    p.tau = Some(tau);
    p.taus = None;
    p.rt = Some(rt);
    p.build(kind, None)
}

fn merge(acc: &mut Produced, next: Produced) {
    acc.0 = acc.0.worst(next.0);
    acc.1.extend(next.1);
}

pub fn run(figure: &str, res: usize, resume: bool, cfg: &RunConfig, dir: &Path) -> Result<Produced> {
    if figure == "all" {
        let mut acc = (Outcome::Ok, Vec::new());
        for fig in FIGURES.iter().filter(|f| **f != "all") {
            log::info!("reproducing {fig}");
            merge(&mut acc, run(fig, res, resume, cfg, dir)?);
        }
        return Ok(acc);
    }
    let out = dir.join(figure);
    match figure {
        "fig1" => stability(cfg, ModelKind::Single, EqChoice::Middle, (50.0, 50.0), res, resume, &out),
        "fig2" => stability(cfg, ModelKind::Single, EqChoice::Top, (50.0, 50.0), res, resume, &out),
        "fig3" => single_boundaries(cfg, res, resume, &out),
        "fig4a" => features(
            cfg,
            ModelKind::Single,
            axis(FeatureAxis::InitialProtein, 10.0, res),
            axis(FeatureAxis::TotalResource, 50.0, res),
            resume,
            &out,
        ),
        "fig4b" => features(
            cfg,
            ModelKind::Single,
            axis(FeatureAxis::Delay, 50.0, res),
            axis(FeatureAxis::TotalResource, 50.0, res),
            resume,
            &out,
        ),
        "fig5" => periodic(cfg, ModelKind::Single, 12.0, 50.0, &out),
        "fig6" => periodic(cfg, ModelKind::Single, 10.0, 20.0, &out),
        "fig7" => periodic(cfg, ModelKind::Single, 45.0, 15.0, &out),
        "fig8" => response(cfg, 45.0, 5.0, &out),
        "fig9" => response(cfg, 5.0, 50.0, &out),
        "fig10" => three_stability(cfg, EqChoice::Middle, res, resume, &out),
        "fig11" => three_stability(cfg, EqChoice::Top, res, resume, &out),
        "fig12" => features(
            cfg,
            ModelKind::Three,
            axis(FeatureAxis::Delay, 50.0, res),
            axis(FeatureAxis::TotalResource, 100.0, res),
            resume,
            &out,
        ),
        "fig13" => {
            let mut acc = (Outcome::Ok, Vec::new());
            for (tau, rt) in [(25.0, 11.8), (5.7, 100.0), (25.0, 50.0)] {
                let sub = out.join(format!("tau{tau}_rt{rt}"));
                merge(&mut acc, periodic(cfg, ModelKind::Three, tau, rt, &sub)?);
            }
            Ok(acc)
        }
        _ => bail!("unknown figure `{figure}`"),
    }
}

fn axis(param: FeatureAxis, max: f64, n: usize) -> FeatureAxisConfig {
    FeatureAxisConfig {
        param,
        min: 0.0,
        max,
        n,
    }
}

fn stability_run(
    cfg: &RunConfig,
    kind: ModelKind,
    eq: EqChoice,
    (tau_max, rt_max): (f64, f64),
    res: usize,
) -> Result<StabilityRun> {
    Ok(StabilityRun {
        base: params(cfg, kind, 0.0, 0.0)?,
        tau: AxisRange {
            min: 0.0,
            max: tau_max,
            n: res,
        },
        rt: AxisRange {
            min: 0.0,
            max: rt_max,
            n: res,
        },
        eq,
        options: StabilityOptions::default(),
        scale: 4,
    })
}

fn stability(
    cfg: &RunConfig,
    kind: ModelKind,
    eq: EqChoice,
    ranges: (f64, f64),
    res: usize,
    resume: bool,
    out: &Path,
) -> Result<Produced> {
    commands::stability(&stability_run(cfg, kind, eq, ranges, res)?, out, resume)
}

/// Grid plus polynomial fits `(criterion, degree, min_tau)` of its boundaries.
fn fitted(
    run: &StabilityRun,
    fits: &[(BoundaryCriterion, usize, f64)],
    resume: bool,
    out: &Path,
) -> Result<Produced> {
    let mut acc = commands::stability(run, out, resume)?;
    let csv = acc
        .1
        .iter()
        .find(|p| p.extension().is_some_and(|e| e == "csv"))
        .cloned()
        .expect("stability writes a CSV");
    for &(criterion, degree, min_tau) in fits {
        let fit_dir = out.join(match criterion {
            BoundaryCriterion::ModulusCrossesOne => "hopf",
            BoundaryCriterion::EquilibriumCountChange => "saddle_node",
        });
        let boundary = BoundaryRun::new(csv.clone(), criterion, degree, min_tau, true)?;
        match commands::boundary(&boundary, &fit_dir) {
            Ok(done) => merge(&mut acc, done),
            Err(e) => {
                log::warn!("{}: no boundary fit: {e:#}", fit_dir.display());
                acc.0 = acc.0.worst(Outcome::Incomplete);
            }
        }
    }
    Ok(acc)
}

/// Hopf line and saddle-node curve of the single-protein model.
fn single_boundaries(cfg: &RunConfig, res: usize, resume: bool, out: &Path) -> Result<Produced> {
    let run = stability_run(cfg, ModelKind::Single, EqChoice::Top, (20.0, 60.0), res)?;
    let fits = [
        (BoundaryCriterion::ModulusCrossesOne, 1, 0.75),
        (BoundaryCriterion::EquilibriumCountChange, 3, 0.75),
    ];
    let mut acc = fitted(&run, &fits, resume, out)?;
    let ModelParams::Single(base) = run.base else {
        unreachable!("single-protein run");
    };
    let mut csv = String::from("tau,R_T\n");
    for tau in run.tau.values() {
        let rt = saddle_node_boundary_single(tau, &base)?;
        csv.push_str(&format!("{tau},{rt}\n"));
    }
    let mut files = Outputs::new(out, "reproduce fig3", &run)?;
    files.write("saddle_node_closed_form.csv", csv.as_bytes())?;
    merge(&mut acc, (Outcome::Ok, files.written().to_vec()));
    Ok(acc)
}

fn three_stability(cfg: &RunConfig, eq: EqChoice, res: usize, resume: bool, out: &Path) -> Result<Produced> {
    let run = stability_run(cfg, ModelKind::Three, eq, (50.0, 100.0), res)?;
    match eq {
        EqChoice::Middle => fitted(&run, &[(BoundaryCriterion::EquilibriumCountChange, 3, 0.625)], resume, out),
        EqChoice::Top => fitted(&run, &[(BoundaryCriterion::ModulusCrossesOne, 1, 0.75)], resume, out),
    }
}

fn features(
    cfg: &RunConfig,
    kind: ModelKind,
    x: FeatureAxisConfig,
    y: FeatureAxisConfig,
    resume: bool,
    out: &Path,
) -> Result<Produced> {
    let run = FeatureRun {
        base: params(cfg, kind, 10.0, 50.0)?,
        p0: 10.0,
        x,
        y,
        options: FeatureOptions::default(),
        scale: 4,
    };
    commands::features(&run, out, resume)
}

fn periodic(cfg: &RunConfig, kind: ModelKind, tau: f64, rt: f64, out: &Path) -> Result<Produced> {
    let mut local = cfg.clone();
    local.model = Some(kind);
    local.params.tau = Some(tau);
    local.params.taus = None;
    local.params.rt = Some(rt);
    let mut run = crate::bvp_run(&local)?;
    run.guess = GuessOptions {
        p0: 10.0,
        ..run.guess
    };
    commands::bvp(&run, out)
}

/// Approach to an equilibrium, with the equilibria for comparison.
fn response(cfg: &RunConfig, tau: f64, rt: f64, out: &Path) -> Result<Produced> {
    let p = params(cfg, ModelKind::Single, tau, rt)?;
    let sim = SimulateRun {
        params: p,
        p0: 10.0,
        t_end: 100.0 * tau.max(1.0),
        sim: SimOptions::default(),
        samples: 20_000,
    };
    let mut acc = commands::simulate_cmd(&sim, out)?;
    let eq = EquilibriaRun {
        params: p,
        mesh: StabilityOptions::default().mesh,
    };
    merge(&mut acc, commands::equilibria(&eq, out)?);
    Ok(acc)
}
