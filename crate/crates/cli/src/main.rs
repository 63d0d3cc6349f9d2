//! `ribodelay` command-line front end.

mod commands;
mod config;
mod output;
mod reproduce;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ribodelay::bvp::{BvpOptions, GuessOptions, PhaseCondition};
use ribodelay::ddesim::SimOptions;
use ribodelay::features::{FeatureAxis, FeatureOptions};
use ribodelay::fitting::BoundaryCriterion;
use ribodelay::spectral::{SpectralMesh, StabilityOptions};

use commands::{BoundaryRun, BvpRun, EquilibriaRun, FeatureRun, Outcome, SimulateRun, StabilityRun};
use config::{set, AxisRange, EqChoice, FeatureAxisConfig, ModelKind, RunConfig};

/// Default output directory when neither flag, config nor environment sets one.
const DEFAULT_OUT: &str = "ribodelay-out";
const OUT_ENV: &str = "RIBODELAY_OUT";

#[derive(Parser, Debug)]
#[command(name = "ribodelay", version, about = "Delay models of resource-limited protein synthesis")]
struct Cli {
    /// TOML run configuration; command-line flags override its values.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: config `output_dir`, then $RIBODELAY_OUT, then ./ribodelay-out].
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for grid commands [default: all cores].
    #[arg(long, short, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct PointArgs {
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    /// Delay (every protein).
    #[arg(long)]
    tau: Option<f64>,
    /// Total resource.
    #[arg(long)]
    rt: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PhaseArg {
    Anchored,
    Literal,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CriterionArg {
    /// Dominant multiplier modulus crosses one.
    Modulus,
    /// Number of equilibria changes.
    Count,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Equilibria and their stability at one parameter point.
    Equilibria {
        #[command(flatten)]
        point: PointArgs,
    },
    /// Simulates from the starvation history.
    Simulate {
        #[command(flatten)]
        point: PointArgs,
        /// Initial production of every protein.
        #[arg(long)]
        p0: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        /// Samples before this time are not written.
        #[arg(long)]
        record_from: Option<f64>,
        #[arg(long)]
        max_step: Option<f64>,
        /// Maximum number of CSV rows.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Dominant multiplier of one equilibrium over a (tau, R_T) grid.
    StabilityGrid {
        #[arg(long, value_enum)]
        model: Option<ModelKind>,
        /// Delay axis, MIN:MAX:N.
        #[arg(long)]
        tau: Option<AxisRange>,
        /// Total resource axis, MIN:MAX:N.
        #[arg(long)]
        rt: Option<AxisRange>,
        #[arg(long, value_enum)]
        eq: Option<EqChoice>,
        /// Spectral elements per delay.
        #[arg(long)]
        elements: Option<usize>,
        /// Polynomial order per element.
        #[arg(long)]
        order: Option<usize>,
        /// Heatmap pixels per cell.
        #[arg(long)]
        scale: Option<usize>,
        /// Skip the run when outputs for the same configuration exist.
        #[arg(long)]
        resume: bool,
    },
    /// Amplitude feature of long simulations over a two-parameter grid.
    FeatureGrid {
        #[command(flatten)]
        point: PointArgs,
        /// First axis, PARAM:MIN:MAX:N with PARAM one of p0, tau, rt.
        #[arg(long)]
        x: Option<FeatureAxisConfig>,
        /// Second axis, same form.
        #[arg(long)]
        y: Option<FeatureAxisConfig>,
        #[arg(long)]
        p0: Option<f64>,
        /// Simulated span in units of max(tau, 1).
        #[arg(long)]
        horizon_delays: Option<f64>,
        /// Measuring window in the same units.
        #[arg(long)]
        window_delays: Option<f64>,
        #[arg(long)]
        scale: Option<usize>,
        #[arg(long)]
        resume: bool,
    },
    /// Periodic orbit from a simulation guess.
    Bvp {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long)]
        p0: Option<f64>,
        #[arg(long)]
        elements: Option<usize>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long, value_enum)]
        phase: Option<PhaseArg>,
        /// Rows of the resampled solution CSV.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Extracts a boundary from a stability-grid CSV and fits a polynomial.
    BoundaryFit {
        /// Stability grid CSV.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        criterion: Option<CriterionArg>,
        #[arg(long)]
        degree: Option<usize>,
        /// Ignore crossings at smaller delays.
        #[arg(long)]
        min_tau: Option<f64>,
        /// Keep every crossing of a column, not only the first.
        #[arg(long)]
        all_crossings: bool,
    },
    /// Regenerates the data behind one of the published figures.
    Reproduce {
        figure: String,
        /// Points per grid axis.
        #[arg(long, default_value_t = 80)]
        res: usize,
        #[arg(long)]
        resume: bool,
    },
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn config_error(error: anyhow::Error) -> Failure {
    Failure { code: 2, error }
}

fn runtime_error(error: anyhow::Error) -> Failure {
    use ribodelay::Error as E;
    let code = match error.downcast_ref::<E>() {
        Some(E::InvalidParameter { .. } | E::Configuration(_)) => 2,
        Some(E::FoldOrSymmetry { .. } | E::NotPeriodic(_)) => 4,
        Some(_) => 3,
        None => 1,
    };
    Failure { code, error }
}

fn output_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn apply_point(cfg: &mut RunConfig, point: &PointArgs) {
    set(&mut cfg.model, point.model);
    set(&mut cfg.params.tau, point.tau);
    set(&mut cfg.params.rt, point.rt);
}

fn mesh(elements: Option<usize>, order: Option<usize>, default: SpectralMesh) -> SpectralMesh {
    SpectralMesh {
        num_elements: elements.unwrap_or(default.num_elements),
        order: order.unwrap_or(default.order),
    }
}

/// A command with its settings resolved and ready to run.
enum Job {
    Equilibria(EquilibriaRun),
    Simulate(SimulateRun),
    Stability(StabilityRun, bool),
    Features(FeatureRun, bool),
    Bvp(BvpRun),
    Boundary(BoundaryRun),
    Reproduce(String, usize, bool),
}

fn resolve(command: Command, mut cfg: RunConfig) -> Result<(Job, RunConfig)> {
    let job = match command {
        Command::Equilibria { point } => {
            apply_point(&mut cfg, &point);
            Job::Equilibria(EquilibriaRun {
                params: cfg.params.build(cfg.model_kind(), None)?,
                mesh: StabilityOptions::default().mesh,
            })
        }
        Command::Simulate {
            point,
            p0,
            t_end,
            record_from,
            max_step,
            samples,
        } => {
            apply_point(&mut cfg, &point);
            let s = &mut cfg.simulate;
            set(&mut s.p0, p0);
            set(&mut s.t_end, t_end);
            set(&mut s.record_from, record_from);
            set(&mut s.max_step, max_step);
            set(&mut s.samples, samples);
            let params = cfg.params.build(cfg.model_kind(), None)?;
            let s = &cfg.simulate;
            let defaults = SimOptions::default();
            let t_end = s.t_end.unwrap_or(100.0 * params.max_delay().max(1.0));
            Job::Simulate(SimulateRun {
                params,
                p0: s.p0.unwrap_or(10.0),
                t_end,
                sim: SimOptions {
                    steps_per_delay: s.steps_per_delay.unwrap_or(defaults.steps_per_delay),
                    max_step: s.max_step.unwrap_or(defaults.max_step),
                    record_from: s.record_from.unwrap_or(0.0),
                },
                samples: s.samples.unwrap_or(20_000),
            })
        }
        Command::StabilityGrid {
            model,
            tau,
            rt,
            eq,
            elements,
            order,
            scale,
            resume,
        } => {
            set(&mut cfg.model, model);
            let s = &mut cfg.stability;
            set(&mut s.tau, tau);
            set(&mut s.rt, rt);
            set(&mut s.eq, eq);
            set(&mut s.elements, elements);
            set(&mut s.order, order);
            set(&mut s.scale, scale);
            let kind = cfg.model_kind();
            let s = &cfg.stability;
            let rt_max = if kind == ModelKind::Three { 100.0 } else { 50.0 };
            let options = StabilityOptions {
                mesh: mesh(s.elements, s.order, StabilityOptions::default().mesh),
                ..StabilityOptions::default()
            };
            Job::Stability(
                StabilityRun {
                    base: cfg.params.build(kind, Some((0.0, 0.0)))?,
                    tau: s.tau.unwrap_or(AxisRange { min: 0.0, max: 50.0, n: 80 }),
                    rt: s.rt.unwrap_or(AxisRange { min: 0.0, max: rt_max, n: 80 }),
                    eq: s.eq.unwrap_or(EqChoice::Top),
                    options,
                    scale: s.scale.unwrap_or(4),
                },
                resume,
            )
        }
        Command::FeatureGrid {
            point,
            x,
            y,
            p0,
            horizon_delays,
            window_delays,
            scale,
            resume,
        } => {
            apply_point(&mut cfg, &point);
            let f = &mut cfg.features;
            set(&mut f.x, x);
            set(&mut f.y, y);
            set(&mut f.p0, p0);
            set(&mut f.horizon_delays, horizon_delays);
            set(&mut f.window_delays, window_delays);
            set(&mut f.scale, scale);
            let kind = cfg.model_kind();
            let f = &cfg.features;
            let defaults = FeatureOptions::default();
            let rt_max = if kind == ModelKind::Three { 100.0 } else { 50.0 };
            let options = FeatureOptions {
                horizon_delays: f.horizon_delays.unwrap_or(defaults.horizon_delays),
                window_delays: f.window_delays.unwrap_or(defaults.window_delays),
                sim: SimOptions {
                    max_step: f.max_step.unwrap_or(defaults.sim.max_step),
                    ..defaults.sim
                },
            };
            Job::Features(
                FeatureRun {
                    base: cfg.params.build(kind, Some((10.0, 50.0)))?,
                    p0: f.p0.unwrap_or(10.0),
                    x: f.x.unwrap_or(FeatureAxisConfig {
                        param: FeatureAxis::Delay,
                        min: 0.0,
                        max: 50.0,
                        n: 51,
                    }),
                    y: f.y.unwrap_or(FeatureAxisConfig {
                        param: FeatureAxis::TotalResource,
                        min: 0.0,
                        max: rt_max,
                        n: 51,
                    }),
                    options,
                    scale: f.scale.unwrap_or(4),
                },
                resume,
            )
        }
        Command::Bvp {
            point,
            p0,
            elements,
            order,
            tol,
            max_iters,
            phase,
            samples,
        } => {
            apply_point(&mut cfg, &point);
            let b = &mut cfg.bvp;
            set(&mut b.p0, p0);
            set(&mut b.elements, elements);
            set(&mut b.order, order);
            set(&mut b.tol, tol);
            set(&mut b.max_iters, max_iters);
            set(
                &mut b.phase,
                phase.map(|p| match p {
                    PhaseArg::Anchored => PhaseCondition::Anchored,
                    PhaseArg::Literal => PhaseCondition::Literal,
                }),
            );
            set(&mut b.samples, samples);
            Job::Bvp(bvp_run(&cfg)?)
        }
        Command::BoundaryFit {
            input,
            criterion,
            degree,
            min_tau,
            all_crossings,
        } => {
            let b = &mut cfg.boundary;
            set(&mut b.input, input);
            set(
                &mut b.criterion,
                criterion.map(|c| match c {
                    CriterionArg::Modulus => BoundaryCriterion::ModulusCrossesOne,
                    CriterionArg::Count => BoundaryCriterion::EquilibriumCountChange,
                }),
            );
            set(&mut b.degree, degree);
            set(&mut b.min_tau, min_tau);
            if all_crossings {
                b.first_only = Some(false);
            }
            let b = &cfg.boundary;
            let input = b
                .input
                .clone()
                .ok_or_else(|| anyhow!("boundary.input is required (or pass --input)"))?;
            Job::Boundary(BoundaryRun::new(
                input,
                b.criterion.unwrap_or(BoundaryCriterion::ModulusCrossesOne),
                b.degree.unwrap_or(1),
                b.min_tau.unwrap_or(0.0),
                b.first_only.unwrap_or(true),
            )?)
        }
        Command::Reproduce { figure, res, resume } => {
            if !reproduce::is_known(&figure) {
                return Err(anyhow!(
                    "unknown figure `{figure}`; known: {}",
                    reproduce::FIGURES.join(", ")
                ));
            }
            if res < 2 {
                return Err(anyhow!("--res must be at least 2"));
            }
            Job::Reproduce(figure, res, resume)
        }
    };
    Ok((job, cfg))
}

/// BVP settings from the `[bvp]` section and `[params]`.
fn bvp_run(cfg: &RunConfig) -> Result<BvpRun> {
    let b = &cfg.bvp;
    let defaults = BvpOptions::default();
    let guess = GuessOptions::default();
    Ok(BvpRun {
        params: cfg.params.build(cfg.model_kind(), None)?,
        guess: GuessOptions {
            p0: b.p0.unwrap_or(guess.p0),
            horizon_delays: b.horizon_delays.unwrap_or(guess.horizon_delays),
            window_delays: b.window_delays.unwrap_or(guess.window_delays),
            periods_back: b.periods_back.unwrap_or(guess.periods_back),
            sim: guess.sim,
        },
        options: BvpOptions {
            mesh: mesh(b.elements, b.order, defaults.mesh),
            tol: b.tol.unwrap_or(defaults.tol),
            max_iters: b.max_iters.unwrap_or(defaults.max_iters),
            phase: b.phase.unwrap_or(defaults.phase),
            ..defaults
        },
        samples: b.samples.unwrap_or(1001),
        dwell_threshold: b.dwell_threshold.unwrap_or(1e-3),
    })
}

fn execute(job: Job, cfg: &RunConfig, dir: &Path) -> Result<(Outcome, Vec<PathBuf>)> {
    match job {
        Job::Equilibria(run) => commands::equilibria(&run, dir),
        Job::Simulate(run) => commands::simulate_cmd(&run, dir),
        Job::Stability(run, resume) => commands::stability(&run, dir, resume),
        Job::Features(run, resume) => commands::features(&run, dir, resume),
        Job::Bvp(run) => commands::bvp(&run, dir),
        Job::Boundary(run) => commands::boundary(&run, dir),
        Job::Reproduce(figure, res, resume) => reproduce::run(&figure, res, resume, cfg, dir),
    }
}

fn run(cli: Cli) -> std::result::Result<Outcome, Failure> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(config_error)?,
        None => RunConfig::default(),
    };
    let dir = output_dir(cli.out, &cfg);
    let (job, cfg) = resolve(cli.command, cfg).map_err(config_error)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(config_error(anyhow!("--jobs must be at least 1")));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| runtime_error(e.into()))?;
    let (outcome, files) = pool.install(|| execute(job, &cfg, &dir)).map_err(runtime_error)?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            match outcome {
                Outcome::Ok => {}
                Outcome::Incomplete => eprintln!("warning: results are numerically incomplete"),
                Outcome::NotConverged => eprintln!("warning: the solver did not converge"),
            }
            ExitCode::from(outcome.exit_code())
        }
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
