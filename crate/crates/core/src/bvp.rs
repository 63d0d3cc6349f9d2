//! Periodic orbits of the delay models as a boundary value problem.
//!
//! Time is rescaled to `s = t / T` so one period is `[0, 1]` and the model
//! reads `x'(s) = T g(x(s), x(s - tau/T))`. The solution is a continuous
//! piecewise polynomial on a spectral-element mesh; node `M` is identified
//! with node `0`, which makes the orbit periodic and lets delayed arguments
//! wrap around. Collocation fixes the shape, a phase condition fixes the
//! shift, and the conserved total resource picks one orbit out of the family.
//! An unfolding parameter `beta` added to the resource equation keeps the
//! square system regular; it vanishes at a true orbit.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::ddesim::{simulate, HistorySpec, SimOptions, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::features::estimate_period;
use crate::linalg::{Lu, Matrix};
use crate::model::{DelayModel, State};
use crate::spectral::mesh::{
    barycentric_weights, cgl_nodes, clenshaw_curtis_weights, differentiation_matrix,
    lagrange_derivative_row, lagrange_row,
};
use crate::spectral::SpectralMesh;

/// How the free time shift of the orbit is fixed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseCondition {
    /// `<xdot_guess(0), x(0) - x_guess(0)> = 0`.
    #[default]
    Anchored,
    /// `<x(0), xdot(0)> = 0`.
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BvpOptions {
    pub mesh: SpectralMesh,
    /// Max-norm residual at which Newton stops.
    pub tol: f64,
    pub max_iters: usize,
    pub max_halvings: usize,
    pub phase: PhaseCondition,
}

impl Default for BvpOptions {
    fn default() -> Self {
        Self {
            mesh: SpectralMesh {
                num_elements: 16,
                order: 12,
            },
            tol: 1e-9,
            max_iters: 50,
            max_halvings: 8,
            phase: PhaseCondition::Anchored,
        }
    }
}

impl BvpOptions {
    pub fn validate(&self) -> Result<()> {
        self.mesh.validate()?;
        if self.mesh.order < 8 {
            return Err(invalid("order", "periodic solutions need order >= 8"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be at least 1"));
        }
        Ok(())
    }
}

/// Guess state and unit guess velocity at `s = 0`, used by the anchored
/// phase condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseAnchor {
    pub state: Vec<f64>,
    pub velocity: Vec<f64>,
}

/// A periodic orbit on the normalised interval `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSolution {
    pub mesh: SpectralMesh,
    /// Mesh nodes in normalised time, `0` and `1` included.
    pub nodes: Vec<f64>,
    /// State at each node; the last equals the first.
    pub states: Vec<State>,
    pub period: f64,
    /// Unfolding parameter; zero up to the tolerance at a true orbit.
    pub beta: f64,
    pub delays: Vec<f64>,
    pub total_resource: f64,
    pub phase: PhaseCondition,
    pub anchor: PhaseAnchor,
    pub residual_norm: f64,
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// The orbit is a constant state, so its period is arbitrary.
    pub degenerate: bool,
}

/// Global node indices of a mesh wrapped onto a circle of `m` nodes.
struct Periodic {
    mesh: SpectralMesh,
    dim: usize,
    m: usize,
    nodes: Vec<f64>,
    ref_nodes: Vec<f64>,
    bary: Vec<f64>,
    dref: Matrix,
    cc: Vec<f64>,
}

impl Periodic {
    fn new(mesh: SpectralMesh, dim: usize) -> Self {
        let n = mesh.order;
        let e = mesh.num_elements as f64;
        Self {
            mesh,
            dim,
            m: mesh.num_elements * n,
            nodes: mesh.nodes(0.0, 1.0),
            ref_nodes: cgl_nodes(n),
            bary: barycentric_weights(n),
            dref: differentiation_matrix(n).scaled(2.0 * e),
            cc: clenshaw_curtis_weights(n),
        }
    }

    fn wrap(&self, g: usize) -> usize {
        g % self.m
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        self.mesh.locate(s.rem_euclid(1.0), 0.0, 1.0)
    }

    /// Interpolation weights at `s` (taken mod 1) on wrapped global nodes.
    fn interp(&self, s: f64) -> (usize, Vec<f64>) {
        let (e, x) = self.locate(s);
        (e * self.mesh.order, lagrange_row(x, &self.ref_nodes, &self.bary))
    }

    fn interp_deriv(&self, s: f64) -> (usize, Vec<f64>) {
        let (e, x) = self.locate(s);
        let scale = 2.0 * self.mesh.num_elements as f64;
        let row = lagrange_derivative_row(x, &self.ref_nodes, &self.bary)
            .into_iter()
            .map(|v| v * scale)
            .collect();
        (e * self.mesh.order, row)
    }

    /// Quadrature weights on the wrapped nodes for `int_{-c}^{0} f ds` of
    /// the interpolant of node values of a periodic `f`.
    fn integral_weights(&self, c: f64) -> Vec<f64> {
        let n = self.mesh.order;
        let ne = self.mesh.num_elements;
        let h = 1.0 / ne as f64;
        let full = c.floor();
        let frac = c - full;
        let mut w = vec![0.0; self.m];
        for e in 0..ne {
            for j in 0..=n {
                w[self.wrap(e * n + j)] += full * 0.5 * h * self.cc[j];
            }
        }
        if frac > 0.0 {
            let a = 1.0 - frac;
            let (e0, x0) = self.mesh.locate(a, 0.0, 1.0);
            // Part of the element holding `a`, from `x0` to its right end,
            // by Clenshaw-Curtis on the sub-interval.
            let half = 0.5 * (1.0 - x0);
            for (q, xq) in self.ref_nodes.iter().enumerate() {
                let x = x0 + (xq + 1.0) * half;
                let row = lagrange_row(x, &self.ref_nodes, &self.bary);
                let wq = self.cc[q] * half * 0.5 * h;
                for (j, r) in row.iter().enumerate() {
                    w[self.wrap(e0 * n + j)] += wq * r;
                }
            }
            for e in e0 + 1..ne {
                for j in 0..=n {
                    w[self.wrap(e * n + j)] += 0.5 * h * self.cc[j];
                }
            }
        }
        w
    }

    fn value(&self, x: &[f64], first: usize, row: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out.fill(0.0);
        for (j, r) in row.iter().enumerate() {
            let g = self.wrap(first + j);
            for c in 0..d {
                out[c] += r * x[g * d + c];
            }
        }
    }
}

struct Problem<'a, M: DelayModel + ?Sized> {
    model: &'a M,
    grid: Periodic,
    phase: PhaseCondition,
    anchor: PhaseAnchor,
}

impl<M: DelayModel + ?Sized> Problem<'_, M> {
    fn size(&self) -> usize {
        self.grid.m * self.grid.dim + 2
    }

    /// Residual and, when asked, its Jacobian at `z = [x nodes, T, beta]`.
    fn assemble(&self, z: &[f64], want_jac: bool) -> (Vec<f64>, Option<Matrix>) {
        let g = &self.grid;
        let d = g.dim;
        let m = g.m;
        let n = g.mesh.order;
        let ri = d - 1;
        let (x, period, beta) = (&z[..m * d], z[m * d], z[m * d + 1]);
        let (it, ib) = (m * d, m * d + 1);
        let delays = self.model.delays();
        let nk = delays.len();
        let lags: Vec<f64> = delays.iter().map(|tau| tau / period).collect();
        let mut f = vec![0.0; self.size()];
        let mut jac = want_jac.then(|| Matrix::zeros(self.size(), self.size()));

        let mut delayed = vec![vec![0.0; d]; nk];
        let mut slope = vec![vec![0.0; d]; nk];
        let mut rhs = vec![0.0; d];
        for e in 0..g.mesh.num_elements {
            for i in 1..=n {
                let gi = g.wrap(e * n + i);
                let row = gi * d;
                let s = g.nodes[e * n + i];
                let now = &x[gi * d..(gi + 1) * d];
                let mut rows = Vec::with_capacity(nk);
                for k in 0..nk {
                    let (first, w) = g.interp(s - lags[k]);
                    g.value(x, first, &w, &mut delayed[k]);
                    rows.push((first, w));
                }
                let refs: Vec<&[f64]> = delayed.iter().map(|v| v.as_slice()).collect();
                self.model.eval(now, &refs, &mut rhs);
                for c in 0..d {
                    let mut dx = 0.0;
                    for j in 0..=n {
                        dx += g.dref[(i, j)] * x[g.wrap(e * n + j) * d + c];
                    }
                    f[row + c] = dx - period * rhs[c];
                }
                f[row + ri] -= period * beta;
                let Some(jm) = jac.as_mut() else { continue };
                for j in 0..=n {
                    jm.add_identity_block(row, g.wrap(e * n + j) * d, d, g.dref[(i, j)]);
                }
                let (j0, jd) = self.model.jacobians(now, &refs);
                jm.add_block(row, gi * d, &j0, -period);
                for k in 0..nk {
                    let (first, w) = &rows[k];
                    for (j, wj) in w.iter().enumerate() {
                        if *wj != 0.0 {
                            jm.add_block(row, g.wrap(first + j) * d, &jd[k], -period * wj);
                        }
                    }
                    let (fd, wd) = g.interp_deriv(s - lags[k]);
                    g.value(x, fd, &wd, &mut slope[k]);
                }
                for c in 0..d {
                    let mut col = -rhs[c];
                    for k in 0..nk {
                        let chain: f64 = (0..d).map(|q| jd[k][(c, q)] * slope[k][q]).sum();
                        col -= chain * lags[k];
                    }
                    jm[(row + c, it)] = col;
                }
                jm[(row + ri, it)] -= beta;
                jm[(row + ri, ib)] = -period;
            }
        }

        // Phase condition.
        let x0 = &x[..d];
        match self.phase {
            PhaseCondition::Anchored => {
                f[it] = (0..d)
                    .map(|c| self.anchor.velocity[c] * (x0[c] - self.anchor.state[c]))
                    .sum();
                if let Some(jm) = jac.as_mut() {
                    for c in 0..d {
                        jm[(it, c)] = self.anchor.velocity[c];
                    }
                }
            }
            PhaseCondition::Literal => {
                let mut v = vec![0.0; d];
                for j in 0..=n {
                    for c in 0..d {
                        v[c] += g.dref[(0, j)] * x[j * d + c];
                    }
                }
                f[it] = (0..d).map(|c| x0[c] * v[c]).sum();
                if let Some(jm) = jac.as_mut() {
                    for j in 0..=n {
                        for c in 0..d {
                            jm[(it, j * d + c)] += g.dref[(0, j)] * x0[c];
                        }
                    }
                    for c in 0..d {
                        jm[(it, c)] += v[c];
                    }
                }
            }
        }

        // Conserved total resource over the delay window ending at s = 0.
        let a = self.model.sequestration();
        let mut total = x0[ri] - self.model.total_resource();
        let mut grad = vec![0.0; d];
        for k in 0..nk {
            let w = g.integral_weights(lags[k]);
            let mu: Vec<f64> = (0..m).map(|j| self.model.flux(k, &x[j * d..(j + 1) * d])).collect();
            let integral: f64 = w.iter().zip(&mu).map(|(w, u)| w * u).sum();
            total += a * period * integral;
            if let Some(jm) = jac.as_mut() {
                for j in 0..m {
                    if w[j] != 0.0 {
                        self.model.flux_gradient(k, &x[j * d..(j + 1) * d], &mut grad);
                        for c in 0..d {
                            jm[(ib, j * d + c)] += a * period * w[j] * grad[c];
                        }
                    }
                }
                let (first, row) = g.interp(-lags[k]);
                let edge: f64 = row
                    .iter()
                    .enumerate()
                    .map(|(j, r)| r * mu[g.wrap(first + j)])
                    .sum();
                jm[(ib, it)] += a * (integral - lags[k] * edge);
            }
        }
        f[ib] = total;
        if let Some(jm) = jac.as_mut() {
            jm[(ib, ri)] += 1.0;
        }
        (f, jac)
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Simulates from the starvation history with initial production `p0` up to
/// `t_end`, keeping the last `keep` time units as a guess for
/// [`solve_periodic`].
pub fn simulation_guess<M: DelayModel + ?Sized>(
    model: &M,
    p0: &[f64],
    t_end: f64,
    keep: f64,
    sim: &SimOptions,
) -> Result<Trajectory> {
    let opts = SimOptions {
        record_from: (t_end - keep).max(0.0),
        ..*sim
    };
    simulate(model, &HistorySpec::starvation(p0.to_vec()), t_end, &opts)
}

/// How [`solve_from_simulation`] builds its starting guess.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuessOptions {
    /// Initial production of every protein.
    pub p0: f64,
    /// Simulated span in units of `max(tau_max, 1)`.
    pub horizon_delays: f64,
    /// Trailing window the period is estimated over, same units.
    pub window_delays: f64,
    /// The guess segment starts this many estimated periods before the end.
    pub periods_back: f64,
    pub sim: SimOptions,
}

impl Default for GuessOptions {
    fn default() -> Self {
        Self {
            p0: 10.0,
            horizon_delays: 1100.0,
            window_delays: 100.0,
            periods_back: 2.0,
            sim: SimOptions::default(),
        }
    }
}

/// Simulates the model, estimates the period from the autocorrelation of
/// `p1` over the trailing window and hands the segment to [`solve_periodic`].
pub fn solve_from_simulation<M: DelayModel + ?Sized>(
    model: &M,
    guess: &GuessOptions,
    opts: &BvpOptions,
) -> Result<PeriodicSolution> {
    if !(guess.window_delays > 0.0 && guess.horizon_delays >= guess.window_delays) {
        return Err(invalid("window_delays", "need 0 < window_delays <= horizon_delays"));
    }
    if !(guess.periods_back >= 1.0) {
        return Err(invalid("periods_back", "must be at least 1"));
    }
    let unit = model.max_delay().max(1.0);
    let t_end = guess.horizon_delays * unit;
    let keep = guess.window_delays * unit;
    let p0 = vec![guess.p0; model.dim() - 1];
    let traj = simulation_guess(model, &p0, t_end, keep, &guess.sim)?;
    let period = estimate_period(&traj, t_end - keep, t_end)?;
    let back = (guess.periods_back * period).min(keep);
    solve_periodic(model, &traj, t_end - back, period, opts)
}

/// Newton solve for a periodic orbit near the segment of `guess` on
/// `[t_start, t_start + period_guess]`.
///
/// The period is an unknown starting from `period_guess`. A singular
/// Jacobian is reported as [`Error::FoldOrSymmetry`]; running out of
/// iterations returns the last iterate with `converged = false`.
pub fn solve_periodic<M: DelayModel + ?Sized>(
    model: &M,
    guess: &Trajectory,
    t_start: f64,
    period_guess: f64,
    opts: &BvpOptions,
) -> Result<PeriodicSolution> {
    opts.validate()?;
    if !(period_guess > 0.0 && period_guess.is_finite()) {
        return Err(invalid("period", "must be positive"));
    }
    let d = model.dim();
    if guess.dim() != d {
        return Err(invalid("guess", "dimension does not match the model"));
    }
    let span = guess.end() - guess.start();
    let slack = 1e-9 * guess.end().abs().max(1.0);
    if t_start < guess.start() - slack || t_start + period_guess > guess.end() + slack || span <= 0.0 {
        return Err(Error::Domain(format!(
            "guess covers [{}, {}], need [{t_start}, {}]",
            guess.start(),
            guess.end(),
            t_start + period_guess
        )));
    }
    let grid = Periodic::new(opts.mesh, d);
    let m = grid.m;
    let mut z = vec![0.0; m * d + 2];
    for j in 0..m {
        let t = (t_start + grid.nodes[j] * period_guess).clamp(guess.start(), guess.end());
        let v = guess.eval(t)?;
        for c in 0..d {
            z[j * d + c] = if v[c].abs() < 1e-12 { 0.0 } else { v[c] };
        }
    }
    z[m * d] = period_guess;

    let mut velocity = vec![0.0; d];
    for j in 0..=opts.mesh.order {
        for c in 0..d {
            velocity[c] += grid.dref[(0, j)] * z[j * d + c];
        }
    }
    let norm = velocity.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        velocity.iter_mut().for_each(|v| *v /= norm);
    }
    let anchor = PhaseAnchor {
        state: z[..d].to_vec(),
        velocity,
    };
    let problem = Problem {
        model,
        grid,
        phase: opts.phase,
        anchor,
    };

    let (mut f, _) = problem.assemble(&z, false);
    let mut r = max_norm(&f);
    let mut history = vec![r];
    let mut iterations = 0;
    while r > opts.tol && iterations < opts.max_iters {
        iterations += 1;
        let (_, jac) = problem.assemble(&z, true);
        let lu = Lu::factor(&jac.expect("jacobian requested")).map_err(|e| match e {
            Error::Singular { .. } => Error::FoldOrSymmetry {
                iteration: iterations,
            },
            other => other,
        })?;
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        let step = lu.solve(&neg);
        // Damping uses the natural monotonicity test: the simplified Newton
        // correction at the trial point must be shorter than the step.
        // Residual norms are badly scaled between rows and often rise on
        // the way to a solution.
        let step_norm = l2(&step);
        let mut lambda = 1.0;
        let mut halvings = 0;
        loop {
            let trial: Vec<f64> = z.iter().zip(&step).map(|(a, b)| a + lambda * b).collect();
            let (ft, _) = problem.assemble(&trial, false);
            let rt = max_norm(&ft);
            let ok = trial[m * d] > 0.0 && rt.is_finite();
            let shorter = ok && {
                let neg: Vec<f64> = ft.iter().map(|v| -v).collect();
                l2(&lu.solve(&neg)) < (1.0 - 0.25 * lambda) * step_norm || rt <= opts.tol
            };
            if ok && (shorter || halvings >= opts.max_halvings) {
                z = trial;
                f = ft;
                r = rt;
                break;
            }
            if halvings >= opts.max_halvings {
                // Non-finite or non-positive period even for the smallest
                // step: keep the current iterate.
                break;
            }
            lambda *= 0.5;
            halvings += 1;
        }
        history.push(r);
        log::debug!("newton {iterations}: residual {r:.3e}, step {lambda}");
    }

    let states: Vec<State> = (0..=m)
        .map(|j| State::from_slice(&z[(j % m) * d..(j % m + 1) * d]))
        .collect();
    let degenerate = is_constant(&z[..m * d], d);
    Ok(PeriodicSolution {
        mesh: opts.mesh,
        nodes: problem.grid.nodes.clone(),
        states,
        period: z[m * d],
        beta: z[m * d + 1],
        delays: model.delays().to_vec(),
        total_resource: model.total_resource(),
        phase: opts.phase,
        anchor: problem.anchor,
        residual_norm: r,
        residual_history: history,
        iterations,
        converged: r <= opts.tol,
        degenerate,
    })
}

fn is_constant(x: &[f64], d: usize) -> bool {
    (0..d).all(|c| {
        let col = x.iter().skip(c).step_by(d);
        let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi - lo <= 1e-8 * (1.0 + hi.abs())
    })
}

/// Max-norm of the collocation, periodicity, phase and resource rows of a
/// candidate orbit, evaluated from its node values alone.
pub fn bvp_residual<M: DelayModel + ?Sized>(sol: &PeriodicSolution, model: &M) -> f64 {
    let mesh = sol.mesh;
    let d = model.dim();
    let n = mesh.order;
    let m = mesh.num_elements * n;
    let t = sol.period;
    let x: Vec<Vec<f64>> = sol.states.iter().map(State::to_vec).collect();
    if x.len() != m + 1 || x[0].len() != d {
        return f64::INFINITY;
    }
    let eval = |s: f64| -> Vec<f64> {
        let (first, row) = mesh.interpolation_row(s.rem_euclid(1.0), 0.0, 1.0);
        let mut out = vec![0.0; d];
        for (j, r) in row.iter().enumerate() {
            for c in 0..d {
                out[c] += r * x[first + j][c];
            }
        }
        out
    };
    let mut worst: f64 = (0..d).map(|c| (x[m][c] - x[0][c]).abs()).fold(0.0, f64::max);
    let mut rhs = vec![0.0; d];
    for (gi, &s) in sol.nodes.iter().enumerate().skip(1) {
        // The derivative at an element end is taken from the element to its
        // left, the same side the node is collocated on.
        let (e, _) = mesh.locate(s, 0.0, 1.0);
        let e = if gi % n == 0 { gi / n - 1 } else { e };
        let local = 2.0 * (s * mesh.num_elements as f64 - e as f64) - 1.0;
        let ref_nodes = cgl_nodes(n);
        let row = lagrange_derivative_row(local.clamp(-1.0, 1.0), &ref_nodes, &barycentric_weights(n));
        let scale = 2.0 * mesh.num_elements as f64;
        let delayed: Vec<Vec<f64>> = model.delays().iter().map(|tau| eval(s - tau / t)).collect();
        let refs: Vec<&[f64]> = delayed.iter().map(|v| v.as_slice()).collect();
        model.eval(&x[gi], &refs, &mut rhs);
        for c in 0..d {
            let dx: f64 = row.iter().enumerate().map(|(j, r)| r * scale * x[e * n + j][c]).sum();
            let extra = if c == d - 1 { sol.beta } else { 0.0 };
            worst = worst.max((dx - t * (rhs[c] + extra)).abs());
        }
    }
    let phase = match sol.phase {
        PhaseCondition::Anchored => (0..d)
            .map(|c| sol.anchor.velocity[c] * (x[0][c] - sol.anchor.state[c]))
            .sum::<f64>(),
        PhaseCondition::Literal => {
            let (first, row) = mesh.derivative_row(0.0, 0.0, 1.0);
            (0..d)
                .map(|c| {
                    let v: f64 = row.iter().enumerate().map(|(j, r)| r * x[first + j][c]).sum();
                    x[0][c] * v
                })
                .sum::<f64>()
        }
    };
    worst = worst.max(phase.abs());

    // Resource row, with the quadrature the solver uses.
    let grid = Periodic::new(mesh, d);
    let a = model.sequestration();
    let mut total = x[0][d - 1] - model.total_resource();
    for (k, tau) in model.delays().iter().enumerate() {
        let w = grid.integral_weights(tau / t);
        let integral: f64 = w.iter().zip(&x).map(|(wg, v)| wg * model.flux(k, v)).sum();
        total += a * t * integral;
    }
    worst.max(total.abs())
}

impl PeriodicSolution {
    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    /// State at normalised time `s`, taken mod 1.
    pub fn eval(&self, s: f64) -> Vec<f64> {
        let (first, row) = self.mesh.interpolation_row(s.rem_euclid(1.0), 0.0, 1.0);
        let d = self.dim();
        let mut out = vec![0.0; d];
        for (j, r) in row.iter().enumerate() {
            let x = self.states[first + j].to_vec();
            for c in 0..d {
                out[c] += r * x[c];
            }
        }
        out
    }

    /// `count` uniform samples over one period in physical time.
    pub fn resample(&self, count: usize) -> Vec<(f64, Vec<f64>)> {
        (0..count)
            .map(|i| {
                let s = i as f64 / count as f64;
                (s * self.period, self.eval(s))
            })
            .collect()
    }

    /// Fraction of the period during which every protein is below `threshold`.
    pub fn dwell_fraction(&self, threshold: f64) -> f64 {
        const SAMPLES: usize = 4096;
        let d = self.dim();
        let low = self
            .resample(SAMPLES)
            .iter()
            .filter(|(_, x)| x[..d - 1].iter().all(|&p| p < threshold))
            .count();
        low as f64 / SAMPLES as f64
    }

    /// Time of each protein's maximum minus that of `p1`, as a fraction of
    /// the period wrapped to `[-0.5, 0.5)`.
    pub fn peak_offsets(&self) -> Vec<f64> {
        const SAMPLES: usize = 8192;
        let samples = self.resample(SAMPLES);
        let peak = |c: usize| {
            let (i, _) = samples
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, (_, x))| if x[c] > best.1 { (i, x[c]) } else { best });
            i as f64 / SAMPLES as f64
        };
        let base = peak(0);
        (0..self.dim() - 1)
            .map(|c| {
                let d = peak(c) - base;
                d - (d + 0.5).floor()
            })
            .collect()
    }

    /// The same orbit interpolated onto another mesh.
    pub fn remeshed(&self, mesh: SpectralMesh) -> Result<Self> {
        mesh.validate()?;
        let nodes = mesh.nodes(0.0, 1.0);
        let mut states: Vec<State> = nodes.iter().map(|&s| State::from_slice(&self.eval(s))).collect();
        let last = states.len() - 1;
        states[last] = states[0].clone();
        Ok(Self {
            mesh,
            nodes,
            states,
            ..self.clone()
        })
    }

    /// `t,p1..,R` rows for `count` uniform points over one period.
    pub fn write_csv<W: Write>(&self, mut w: W, count: usize) -> io::Result<()> {
        let d = self.dim();
        let mut header = String::from("t");
        for i in 1..d {
            header.push_str(&format!(",p{i}"));
        }
        header.push_str(",R");
        writeln!(w, "{header}")?;
        for (t, x) in self.resample(count) {
            write!(w, "{t}")?;
            for v in x {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EquilibriumKind, SingleProteinParams};

    #[test]
    fn integral_weights_integrate_periodic_functions() {
        let g = Periodic::new(SpectralMesh::new(4, 12).unwrap(), 1);
        let f: Vec<f64> = g.nodes[..g.m]
            .iter()
            .map(|s| 2.0 + (2.0 * std::f64::consts::PI * s).sin())
            .collect();
        for c in [0.3, 1.0, 1.7, 0.999] {
            let w = g.integral_weights(c);
            let got: f64 = w.iter().zip(&f).map(|(a, b)| a * b).sum();
            let tp = 2.0 * std::f64::consts::PI;
            // int_{-c}^0 (2 + sin(2 pi s)) ds
            let exact = 2.0 * c + ((-tp * c).cos() - 1.0) / tp;
            assert!((got - exact).abs() < 1e-9, "c = {c}: {got} vs {exact}");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let params = SingleProteinParams::new(10.0, 20.0);
        let grid = Periodic::new(SpectralMesh::new(2, 8).unwrap(), 2);
        let m = grid.m;
        for phase in [PhaseCondition::Anchored, PhaseCondition::Literal] {
            let problem = Problem {
                model: &params,
                grid: Periodic::new(SpectralMesh::new(2, 8).unwrap(), 2),
                phase,
                anchor: PhaseAnchor {
                    state: vec![0.5, 5.0],
                    velocity: vec![0.6, 0.8],
                },
            };
            let mut z: Vec<f64> = Vec::new();
            for j in 0..m {
                let s = grid.nodes[j];
                let a = 2.0 * std::f64::consts::PI * s;
                z.push(0.6 + 0.3 * a.sin());
                z.push(6.0 + a.cos());
            }
            z.push(9.3);
            z.push(0.01);
            let (_, jac) = problem.assemble(&z, true);
            let jac = jac.unwrap();
            let h = 1e-6;
            for col in 0..z.len() {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[col] += h;
                zm[col] -= h;
                let (fp, _) = problem.assemble(&zp, false);
                let (fm, _) = problem.assemble(&zm, false);
                for row in 0..z.len() {
                    let fd = (fp[row] - fm[row]) / (2.0 * h);
                    let err = (fd - jac[(row, col)]).abs();
                    assert!(err < 1e-6 * (1.0 + fd.abs()), "{phase:?} ({row},{col}): {fd} vs {}", jac[(row, col)]);
                }
            }
        }
    }

    #[test]
    fn equilibrium_guess_is_a_degenerate_solution() {
        let params = SingleProteinParams::new(12.0, 50.0);
        let set = crate::model::equilibria_single(&params).unwrap();
        let top = set.get(EquilibriumKind::Top).unwrap().state.clone();
        let traj = crate::ddesim::simulate(
            &params,
            &HistorySpec::constant(top.clone()),
            24.0,
            &SimOptions::default(),
        )
        .unwrap();
        let sol = solve_periodic(&params, &traj, 5.0, 12.0, &BvpOptions::default()).unwrap();
        assert!(sol.converged && sol.degenerate);
        assert_eq!(sol.iterations, 0);
        assert!(sol.residual_norm < 1e-10);
        assert!(bvp_residual(&sol, &params) < 1e-12);
    }

    #[test]
    fn bad_inputs() {
        let params = SingleProteinParams::new(1.0, 20.0);
        let traj = crate::ddesim::simulate(
            &params,
            &HistorySpec::starvation(vec![1.0]),
            3.0,
            &SimOptions::default(),
        )
        .unwrap();
        let low = BvpOptions {
            mesh: SpectralMesh::new(4, 6).unwrap(),
            ..Default::default()
        };
        assert!(solve_periodic(&params, &traj, 0.0, 1.0, &low).is_err());
        assert!(solve_periodic(&params, &traj, 2.5, 1.0, &BvpOptions::default()).is_err());
        assert!(solve_periodic(&params, &traj, 0.0, -1.0, &BvpOptions::default()).is_err());
    }
}
