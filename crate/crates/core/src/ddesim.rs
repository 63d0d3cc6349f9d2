//! Fixed-step method-of-steps integration of the delay models.
//!
//! The step `h` divides every delay, so delayed arguments of the classical
//! RK4 stages land on stored nodes or step midpoints. Midpoints come from the
//! cubic Hermite interpolant of the step they fall in. Each step keeps its
//! own endpoint derivatives, so the jump of the history at `t = 0` is seen
//! exactly by every later step.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{DelayModel, State, DELAY_MERGE_TOL};

/// Initial data on `[-tau_max, 0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HistorySpec {
    /// Zero production and zero free resource before `t = 0`, then a jump to
    /// `(p0, R_T)`.
    StarvationJump { p0: Vec<f64> },
    /// The same state on the whole history interval and at `t = 0`.
    Constant { state: State },
}

impl HistorySpec {
    pub fn starvation(p0: Vec<f64>) -> Self {
        Self::StarvationJump { p0 }
    }

    pub fn constant(state: State) -> Self {
        Self::Constant { state }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Self::StarvationJump { p0 } => {
                if p0.len() + 1 != dim {
                    return Err(invalid(
                        "p0",
                        format!("expected {} production rates, got {}", dim - 1, p0.len()),
                    ));
                }
                if p0.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                    return Err(invalid("p0", "production rates must be finite and >= 0"));
                }
            }
            Self::Constant { state } => state.expect_dim(dim, "constant history")?,
        }
        Ok(())
    }

    /// State at `t = 0`.
    pub fn initial_state(&self, total_resource: f64) -> State {
        match self {
            Self::StarvationJump { p0 } => State::new(p0.clone(), total_resource),
            Self::Constant { state } => state.clone(),
        }
    }

    fn fill(&self, out: &mut [f64]) {
        match self {
            Self::StarvationJump { .. } => out.fill(0.0),
            Self::Constant { state } => {
                let n = state.proteins.len();
                out[..n].copy_from_slice(&state.proteins);
                out[n] = state.resource;
            }
        }
    }
}

/// History state at `theta < 0`.
pub fn history_value(spec: &HistorySpec, theta: f64) -> Result<State> {
    if !(theta < 0.0) {
        return Err(Error::Domain(format!(
            "history is defined for theta < 0, got {theta}"
        )));
    }
    Ok(match spec {
        HistorySpec::StarvationJump { p0 } => State::new(vec![0.0; p0.len()], 0.0),
        HistorySpec::Constant { state } => state.clone(),
    })
}

/// Integration settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOptions {
    /// Steps per common divisor of the delays (at least 20).
    pub steps_per_delay: usize,
    /// Upper bound on the step; the step count is raised to respect it.
    pub max_step: f64,
    /// Samples before this time are integrated but not stored.
    pub record_from: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            steps_per_delay: 100,
            max_step: 0.005,
            record_from: 0.0,
        }
    }
}

/// Samples of a solution with a cubic Hermite interpolant between them.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    /// Derivative at the left and right end of each interval.
    left: Vec<f64>,
    right: Vec<f64>,
}

impl Trajectory {
    /// Builds a trajectory from samples and the derivative at each sample.
    pub fn from_samples(times: Vec<f64>, states: &[State], derivatives: &[State]) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() || states.len() != derivatives.len() {
            return Err(Error::Domain(
                "times, states and derivatives must be nonempty and equally long".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("sample times must be strictly increasing".into()));
        }
        let dim = states[0].dim();
        let flat = |v: &[State]| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(v.len() * dim);
            for s in v {
                s.expect_dim(dim, "trajectory sample")?;
                out.extend(s.to_vec());
            }
            Ok(out)
        };
        let d = flat(derivatives)?;
        let n = times.len();
        Ok(Self {
            dim,
            states: flat(states)?,
            left: d[..(n - 1) * dim].to_vec(),
            right: d[dim..].to_vec(),
            times,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_proteins(&self) -> usize {
        self.dim - 1
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Flat state at sample `i`.
    pub fn sample(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn state(&self, i: usize) -> State {
        State::from_slice(self.sample(i))
    }

    pub fn final_state(&self) -> State {
        self.state(self.len() - 1)
    }

    /// Component `c` at every sample.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.states.iter().skip(c).step_by(self.dim).copied().collect()
    }

    /// Dense evaluation at any `t` in `[start, end]`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let (t0, t1) = (self.start(), self.end());
        let slack = 1e-12 * t1.abs().max(1.0);
        if !(t >= t0 - slack && t <= t1 + slack) {
            return Err(Error::Domain(format!(
                "t = {t} outside trajectory range [{t0}, {t1}]"
            )));
        }
        let mut out = vec![0.0; self.dim];
        if self.len() == 1 {
            out.copy_from_slice(self.sample(0));
            return Ok(out);
        }
        let i = self.times.partition_point(|&s| s <= t).clamp(1, self.len() - 1) - 1;
        self.hermite(i, t, &mut out);
        Ok(out)
    }

    fn hermite(&self, i: usize, t: f64, out: &mut [f64]) {
        let (ta, tb) = (self.times[i], self.times[i + 1]);
        let h = tb - ta;
        let s = ((t - ta) / h).clamp(0.0, 1.0);
        let d = self.dim;
        hermite_into(
            s,
            h,
            &self.states[i * d..(i + 1) * d],
            &self.states[(i + 1) * d..(i + 2) * d],
            &self.left[i * d..(i + 1) * d],
            &self.right[i * d..(i + 1) * d],
            out,
        );
    }

    /// Writes `t,p1[,p2,p3],R` rows with shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = String::from("t");
        for i in 1..self.dim {
            header.push_str(&format!(",p{i}"));
        }
        header.push_str(",R");
        writeln!(w, "{header}")?;
        for (i, t) in self.times.iter().enumerate() {
            write!(w, "{t}")?;
            for x in self.sample(i) {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Copy restricted to samples in `[t0, t1]`.
    pub fn window(&self, t0: f64, t1: f64) -> Result<Trajectory> {
        let a = self.times.partition_point(|&s| s < t0);
        let b = self.times.partition_point(|&s| s <= t1);
        if b <= a {
            return Err(Error::Domain(format!("no samples in [{t0}, {t1}]")));
        }
        let d = self.dim;
        let iv = b - a - 1;
        Ok(Self {
            dim: d,
            times: self.times[a..b].to_vec(),
            states: self.states[a * d..b * d].to_vec(),
            left: self.left[a * d..(a + iv) * d].to_vec(),
            right: self.right[a * d..(a + iv) * d].to_vec(),
        })
    }
}

#[inline]
fn hermite_into(s: f64, h: f64, xa: &[f64], xb: &[f64], fa: &[f64], fb: &[f64], out: &mut [f64]) {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    for k in 0..out.len() {
        out[k] = h00 * xa[k] + h10 * h * fa[k] + h01 * xb[k] + h11 * h * fb[k];
    }
}

/// Where a delayed argument falls.
#[derive(Clone, Copy, Debug)]
enum Lag {
    /// Exactly this many steps back; zero means the current stage state.
    Steps(usize),
    /// Not a multiple of the step.
    Offgrid(f64),
}

/// Step size and per-delay lags. Delays are rationalised against the
/// smallest positive one with denominators up to 64.
fn plan_steps(delays: &[f64], opts: &SimOptions) -> (f64, Vec<Lag>) {
    let positive: Vec<f64> = delays.iter().copied().filter(|&d| d > DELAY_MERGE_TOL).collect();
    let Some(base) = positive.iter().copied().reduce(f64::min) else {
        return (opts.max_step, vec![Lag::Steps(0); delays.len()]);
    };
    let mut lcm: u64 = 1;
    let mut commensurate = true;
    for &d in &positive {
        let r = d / base;
        match (1..=64u64).find(|&q| {
            let x = r * q as f64;
            (x - x.round()).abs() <= 1e-9 * x
        }) {
            Some(q) => lcm = lcm / gcd(lcm, q) * q,
            None => commensurate = false,
        }
        if lcm > 64 {
            commensurate = false;
        }
    }
    let unit = if commensurate { base / lcm as f64 } else { base };
    let per_unit = opts
        .steps_per_delay
        .max((unit / opts.max_step - 1e-9).ceil() as usize);
    let h = unit / per_unit as f64;
    if !commensurate {
        log::warn!("delays {delays:?} are not commensurate; delayed states are interpolated off-grid");
    }
    let lags = delays
        .iter()
        .map(|&d| {
            if d <= DELAY_MERGE_TOL {
                Lag::Steps(0)
            } else if commensurate {
                Lag::Steps((d / h).round() as usize)
            } else {
                Lag::Offgrid(d)
            }
        })
        .collect();
    (h, lags)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Position inside a step: start, midpoint or end.
#[derive(Clone, Copy, PartialEq)]
enum Stage {
    Start,
    Mid,
    End,
}

impl Stage {
    fn offset(self) -> f64 {
        match self {
            Stage::Start => 0.0,
            Stage::Mid => 0.5,
            Stage::End => 1.0,
        }
    }
}

/// Rolling store of the last few steps: nodes plus the endpoint derivatives
/// of each step.
struct Integrator<'a, M: DelayModel + ?Sized> {
    model: &'a M,
    hist: &'a HistorySpec,
    dim: usize,
    h: f64,
    lags: Vec<Lag>,
    cap: usize,
    nodes: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
    /// One delayed state per delay.
    delayed: Vec<f64>,
}

impl<M: DelayModel + ?Sized> Integrator<'_, M> {
    fn slot(&self, j: usize) -> std::ops::Range<usize> {
        let i = j % self.cap;
        i * self.dim..(i + 1) * self.dim
    }

    /// Value of step `j` of the solution at fraction `s`, or the history
    /// when `j` is negative.
    fn past(&self, j: isize, s: f64, out: &mut [f64]) {
        if j < 0 {
            self.hist.fill(out);
            return;
        }
        let j = j as usize;
        if s == 0.0 {
            out.copy_from_slice(&self.nodes[self.slot(j)]);
        } else if s == 1.0 {
            out.copy_from_slice(&self.nodes[self.slot(j + 1)]);
        } else {
            hermite_into(
                s,
                self.h,
                &self.nodes[self.slot(j)],
                &self.nodes[self.slot(j + 1)],
                &self.left[self.slot(j)],
                &self.right[self.slot(j)],
                out,
            );
        }
    }

    /// Right-hand side at `y` for stage `stage` of step `k`.
    fn rhs(&mut self, k: usize, stage: Stage, y: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let mut buf = std::mem::take(&mut self.delayed);
        for (i, lag) in self.lags.iter().enumerate() {
            let slot = &mut buf[i * d..(i + 1) * d];
            match *lag {
                Lag::Steps(0) => slot.copy_from_slice(y),
                Lag::Steps(m) => self.past(k as isize - m as isize, stage.offset(), slot),
                Lag::Offgrid(delay) => {
                    let pos = (k as f64 + stage.offset()) - delay / self.h;
                    let j = pos.floor();
                    self.past(j as isize, pos - j, slot);
                }
            }
        }
        let refs: Vec<&[f64]> = buf.chunks(d).collect();
        self.model.eval(y, &refs, out);
        self.delayed = buf;
    }

    /// Step `next` starts on the history jump for some delay.
    fn crosses_origin(&self, next: usize) -> bool {
        self.lags
            .iter()
            .any(|lag| matches!(*lag, Lag::Steps(m) if m > 0 && m == next))
    }
}

/// Integrates `model` from `hist` up to `t_end`.
///
/// The step is `h = unit / max(steps_per_delay, unit / max_step)` where
/// `unit` is the largest common divisor of the delays (the delay itself when
/// they are equal). Only samples from `record_from` on are kept.
pub fn simulate<M: DelayModel + ?Sized>(
    model: &M,
    hist: &HistorySpec,
    t_end: f64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let dim = model.dim();
    hist.validate(dim)?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(invalid("t_end", format!("must be positive, got {t_end}")));
    }
    if opts.steps_per_delay < 20 {
        return Err(invalid("steps_per_delay", "must be at least 20"));
    }
    if !(opts.max_step > 0.0) {
        return Err(invalid("max_step", "must be positive"));
    }
    let (h, lags) = plan_steps(model.delays(), opts);
    let n_steps = (t_end / h - 1e-9).ceil() as usize;
    let first_record = (((opts.record_from / h) - 1e-9).ceil().max(0.0) as usize).min(n_steps);
    let reach = lags
        .iter()
        .map(|lag| match *lag {
            Lag::Steps(m) => m,
            Lag::Offgrid(d) => (d / h).ceil() as usize + 1,
        })
        .max()
        .unwrap_or(0);
    let cap = reach + 2;

    let mut it = Integrator {
        model,
        hist,
        dim,
        h,
        delayed: vec![0.0; lags.len() * dim],
        lags,
        cap,
        nodes: vec![0.0; cap * dim],
        left: vec![0.0; cap * dim],
        right: vec![0.0; cap * dim],
    };
    let kept = n_steps + 1 - first_record;
    let mut times = Vec::with_capacity(kept);
    let mut states = Vec::with_capacity(kept * dim);
    let mut left_out = Vec::with_capacity(kept.saturating_sub(1) * dim);
    let mut right_out = Vec::with_capacity(kept.saturating_sub(1) * dim);

    let mut x = hist.initial_state(model.total_resource()).to_vec();
    let r0 = it.slot(0);
    it.nodes[r0].copy_from_slice(&x);
    if first_record == 0 {
        times.push(0.0);
        states.extend_from_slice(&x);
    }
    let mut k1 = vec![0.0; dim];
    let (mut k2, mut k3, mut k4) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let mut end = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    it.rhs(0, Stage::Start, &x, &mut k1);
    for k in 0..n_steps {
        for i in 0..dim {
            y[i] = x[i] + 0.5 * h * k1[i];
        }
        it.rhs(k, Stage::Mid, &y, &mut k2);
        for i in 0..dim {
            y[i] = x[i] + 0.5 * h * k2[i];
        }
        it.rhs(k, Stage::Mid, &y, &mut k3);
        for i in 0..dim {
            y[i] = x[i] + h * k3[i];
        }
        it.rhs(k, Stage::End, &y, &mut k4);
        for i in 0..dim {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Blowup {
                t: (k + 1) as f64 * h,
            });
        }
        let (sk, sn) = (it.slot(k), it.slot(k + 1));
        it.nodes[sn].copy_from_slice(&x);
        it.left[sk.clone()].copy_from_slice(&k1);
        it.rhs(k, Stage::End, &x, &mut end);
        it.right[sk].copy_from_slice(&end);
        if k + 1 >= first_record {
            if k >= first_record {
                left_out.extend_from_slice(&k1);
                right_out.extend_from_slice(&end);
            }
            times.push((k + 1) as f64 * h);
            states.extend_from_slice(&x);
        }
        if it.crosses_origin(k + 1) {
            it.rhs(k + 1, Stage::Start, &x, &mut k1);
        } else {
            k1.copy_from_slice(&end);
        }
    }

    Ok(Trajectory {
        dim,
        times,
        states,
        left: left_out,
        right: right_out,
    })
}

/// `R_T - R(t) - A sum_k int_{t - tau_k}^t mu_k` at every sample whose
/// integration window lies inside the trajectory, as `(t, residual)` pairs.
///
/// The integrals use Simpson's rule on each sample interval, with the
/// interval midpoint taken from the Hermite interpolant.
pub fn resource_residual<M: DelayModel + ?Sized>(traj: &Trajectory, model: &M) -> Vec<(f64, f64)> {
    let d = traj.dim;
    let n = traj.len();
    let delays = model.delays();
    let a = model.sequestration();
    let rt = model.total_resource();
    let mut mid = vec![0.0; d];
    let mut prefix = vec![vec![0.0; n]; delays.len()];
    for i in 0..n.saturating_sub(1) {
        let (ta, tb) = (traj.times[i], traj.times[i + 1]);
        traj.hermite(i, 0.5 * (ta + tb), &mut mid);
        for (k, p) in prefix.iter_mut().enumerate() {
            let s = (tb - ta) / 6.0
                * (model.flux(k, traj.sample(i))
                    + 4.0 * model.flux(k, &mid)
                    + model.flux(k, traj.sample(i + 1)));
            p[i + 1] = p[i] + s;
        }
    }
    let t0 = traj.start();
    let slack = 1e-9 * traj.end().abs().max(1.0);
    let mut out = Vec::new();
    for i in 0..n {
        let t = traj.times[i];
        if t - model.max_delay() < t0 - slack {
            continue;
        }
        let mut integral = 0.0;
        for (k, &delay) in delays.iter().enumerate() {
            integral += window_integral(traj, model, k, &prefix[k], i, t - delay);
        }
        out.push((t, rt - traj.sample(i)[d - 1] - a * integral));
    }
    out
}

/// `int_{s}^{t_i} mu_k` from the prefix sums plus a Simpson correction for
/// the partial interval containing `s`.
fn window_integral<M: DelayModel + ?Sized>(
    traj: &Trajectory,
    model: &M,
    k: usize,
    prefix: &[f64],
    i: usize,
    s: f64,
) -> f64 {
    let s = s.max(traj.start());
    let j = traj.times.partition_point(|&x| x <= s);
    // Node j is the first sample strictly after s.
    if j == 0 || j > i {
        return 0.0;
    }
    let full = prefix[i] - prefix[j];
    let tj = traj.times[j];
    if tj - s <= 1e-12 * tj.abs().max(1.0) {
        return full;
    }
    if (s - traj.times[j - 1]).abs() <= 1e-12 * s.abs().max(1.0) {
        return prefix[i] - prefix[j - 1];
    }
    let mut xs = vec![0.0; traj.dim];
    let mut xm = vec![0.0; traj.dim];
    traj.hermite(j - 1, s, &mut xs);
    traj.hermite(j - 1, 0.5 * (s + tj), &mut xm);
    let part = (tj - s) / 6.0
        * (model.flux(k, &xs) + 4.0 * model.flux(k, &xm) + model.flux(k, traj.sample(j)));
    full + part
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, SingleProteinParams, ThreeProteinParams};

    fn single(tau: f64, rt: f64) -> ModelParams {
        SingleProteinParams::new(tau, rt).into()
    }

    #[test]
    fn history_is_zero_before_the_jump() {
        let h = HistorySpec::starvation(vec![10.0]);
        assert_eq!(history_value(&h, -1.0).unwrap(), State::single(0.0, 0.0));
        assert!(history_value(&h, 0.0).is_err());
        assert_eq!(h.initial_state(50.0), State::single(10.0, 50.0));
        let h3 = HistorySpec::starvation(vec![1.0, 2.0, 3.0]);
        assert_eq!(history_value(&h3, -2.85).unwrap().to_vec(), vec![0.0; 4]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = single(5.0, 50.0);
        let h = HistorySpec::starvation(vec![10.0]);
        assert!(simulate(&m, &h, 0.0, &SimOptions::default()).is_err());
        let opts = SimOptions {
            steps_per_delay: 10,
            ..SimOptions::default()
        };
        assert!(simulate(&m, &h, 10.0, &opts).is_err());
        let bad = HistorySpec::starvation(vec![1.0, 2.0]);
        assert!(simulate(&m, &bad, 10.0, &SimOptions::default()).is_err());
    }

    #[test]
    fn step_plan_respects_delay_ratios() {
        let opts = SimOptions {
            max_step: 1.0,
            ..SimOptions::default()
        };
        let (h, lags) = plan_steps(&[2.0, 3.0, 3.0], &opts);
        assert!((h - 0.01).abs() < 1e-15);
        assert!(matches!(lags[0], Lag::Steps(200)));
        assert!(matches!(lags[1], Lag::Steps(300)));
        let (h, _) = plan_steps(&[45.0], &SimOptions::default());
        assert!(h <= 0.005 + 1e-15);
        let (_, lags) = plan_steps(&[1.0, std::f64::consts::PI], &opts);
        assert!(matches!(lags[1], Lag::Offgrid(_)));
    }

    #[test]
    fn first_delay_interval_is_pure_decay() {
        // For t < tau the delayed terms read the zero history: p = p0 e^{-Dt}.
        let m = single(5.0, 50.0);
        let h = HistorySpec::starvation(vec![10.0]);
        let tr = simulate(&m, &h, 4.0, &SimOptions::default()).unwrap();
        let x = tr.eval(2.0).unwrap();
        let exact = 10.0 * (-20.0_f64).exp();
        assert!((x[0] / exact - 1.0).abs() < 0.02);
        // R only loses what enters sequestration.
        assert!(x[1] < 50.0 && x[1] > 0.0);
    }

    #[test]
    fn dense_output_reproduces_samples() {
        let m = single(10.0, 20.0);
        let tr = simulate(&m, &HistorySpec::starvation(vec![10.0]), 30.0, &SimOptions::default())
            .unwrap();
        for i in (0..tr.len()).step_by(37) {
            let x = tr.eval(tr.times()[i]).unwrap();
            for (a, b) in x.iter().zip(tr.sample(i)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!(tr.eval(31.0).is_err());
    }

    #[test]
    fn record_from_keeps_only_the_tail() {
        let m = single(10.0, 20.0);
        let h = HistorySpec::starvation(vec![10.0]);
        let full = simulate(&m, &h, 50.0, &SimOptions::default()).unwrap();
        let opts = SimOptions {
            record_from: 30.0,
            ..SimOptions::default()
        };
        let tail = simulate(&m, &h, 50.0, &opts).unwrap();
        assert!((tail.start() - 30.0).abs() < 1e-9);
        assert_eq!(tail.final_state(), full.final_state());
    }

    #[test]
    fn equilibrium_is_frozen() {
        let p = SingleProteinParams::new(12.0, 50.0);
        let m: ModelParams = p.into();
        for e in m.equilibria().unwrap().points {
            let tr = simulate(&m, &HistorySpec::constant(e.state.clone()), 120.0, &SimOptions::default())
                .unwrap();
            let drift = (0..tr.len())
                .map(|i| {
                    tr.sample(i)
                        .iter()
                        .zip(e.state.to_vec())
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            assert!(drift < 1e-8, "{:?} drift {drift}", e.kind);
        }
    }

    #[test]
    fn resource_is_conserved() {
        let m = single(10.0, 20.0);
        let tr = simulate(&m, &HistorySpec::starvation(vec![10.0]), 1000.0, &SimOptions::default())
            .unwrap();
        let r = resource_residual(&tr, &m);
        let worst = r
            .iter()
            .filter(|x| x.0 >= 100.0)
            .map(|x| x.1.abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn halving_the_step_shrinks_the_error_eightfold() {
        let m = single(5.0, 50.0);
        let h = HistorySpec::starvation(vec![10.0]);
        let run = |spd| {
            let o = SimOptions {
                steps_per_delay: spd,
                max_step: 1.0,
                record_from: 0.0,
            };
            simulate(&m, &h, 40.0, &o).unwrap().final_state().to_vec()
        };
        let exact = run(1600);
        let err = |x: Vec<f64>| {
            x.iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(run(100)), err(run(200)));
        assert!(e1 / e2 >= 8.0, "{e1:e} {e2:e}");
    }

    #[test]
    fn three_protein_resource_is_conserved_with_distinct_delays() {
        let mut p = ThreeProteinParams::new(2.0, 40.0);
        p.delays = [2.0, 3.0, 4.0];
        let m: ModelParams = p.into();
        let tr = simulate(&m, &HistorySpec::starvation(vec![1.0, 1.0, 1.0]), 100.0, &SimOptions::default())
            .unwrap();
        let worst = resource_residual(&tr, &m)
            .iter()
            .map(|x| x.1.abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn constant_equilibrium_trajectory_has_no_residual() {
        let p = SingleProteinParams::new(12.0, 50.0);
        let m: ModelParams = p.into();
        let top = m.equilibria().unwrap().points[2].state.clone();
        let times: Vec<f64> = (0..=300).map(|i| i as f64 * 0.1).collect();
        let states = vec![top.clone(); times.len()];
        let zero = vec![State::single(0.0, 0.0); times.len()];
        let tr = Trajectory::from_samples(times, &states, &zero).unwrap();
        let r = resource_residual(&tr, &m);
        assert_eq!(r.len(), 181);
        assert!(r.iter().all(|x| x.1.abs() < 1e-8));
    }

    #[test]
    fn shifted_resource_shows_in_residual() {
        // At the trivial point no flux depends on R, so the shift passes straight through.
        let m = single(10.0, 5.0);
        let times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.1).collect();
        let zero = vec![State::single(0.0, 0.0); times.len()];
        let shifted = vec![State::single(0.0, 6.0); times.len()];
        let tr = Trajectory::from_samples(times, &shifted, &zero).unwrap();
        let r = resource_residual(&tr, &m);
        assert!(r.iter().all(|x| (x.1 + 1.0).abs() < 1e-12));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let m = single(5.0, 50.0);
        let tr = simulate(&m, &HistorySpec::starvation(vec![10.0]), 0.5, &SimOptions::default())
            .unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("t,p1,R"));
        assert_eq!(lines.next(), Some("0,10,50"));
        assert_eq!(s.lines().count(), tr.len() + 1);
    }

    #[test]
    fn positivity_holds() {
        let m = single(45.0, 15.0);
        let tr = simulate(&m, &HistorySpec::starvation(vec![10.0]), 900.0, &SimOptions::default())
            .unwrap();
        assert!(tr.states.iter().all(|&x| x >= -1e-9));
    }
}
