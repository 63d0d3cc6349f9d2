use super::linear::LinearDDE;
use super::params::{State, ThreeProteinParams};
use super::{DelayModel, Equilibrium, EquilibriumKind, EquilibriumSet};
use crate::error::Result;
use crate::linalg::Matrix;

/// Roots closer than this (max norm) are the same root.
const DEDUP_TOL: f64 = 1e-7;
const NEWTON_ITERS: usize = 80;

impl ThreeProteinParams {
    pub(crate) fn dim(&self) -> usize {
        4
    }

    /// Free resource `R*` at constant production rates `p`.
    pub fn resource_at(&self, p: &[f64; 3]) -> f64 {
        let h = &self.hill;
        let (f1, f2, f3) = (h.value(p[0]), h.value(p[1]), h.value(p[2]));
        let d = self.delays;
        self.total_resource / (1.0 + self.sequestration * (f2 * f3 * d[0] + f1 * (d[1] + d[2])))
    }

    /// Equilibrium residual `D_i p_i - B_i (..) R*(p)` with its Jacobian.
    fn reduced(&self, p: &[f64; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
        let h = &self.hill;
        let a = self.sequestration;
        let d = self.delays;
        let (f1, f2, f3) = (h.value(p[0]), h.value(p[1]), h.value(p[2]));
        let (s1, s2, s3) = (h.slope(p[0]), h.slope(p[1]), h.slope(p[2]));
        let den = 1.0 + a * (f2 * f3 * d[0] + f1 * (d[1] + d[2]));
        let r = self.total_resource / den;
        let dden = [a * s1 * (d[1] + d[2]), a * s2 * f3 * d[0], a * f2 * s3 * d[0]];
        let dr = dden.map(|x| -r * x / den);
        let drive = [f2 * f3, f1, f1];
        let ddrive = [[0.0, s2 * f3, f2 * s3], [s1, 0.0, 0.0], [s1, 0.0, 0.0]];
        let mut f = [0.0; 3];
        let mut jac = [[0.0; 3]; 3];
        for i in 0..3 {
            let b = self.max_growth[i];
            f[i] = self.decay[i] * p[i] - b * drive[i] * r;
            for j in 0..3 {
                jac[i][j] = -b * (ddrive[i][j] * r + drive[i] * dr[j]);
            }
            jac[i][i] += self.decay[i];
        }
        (f, jac)
    }
}

/// Right-hand side of the three-protein model. `delayed[k]` is the state at
/// `t - tau_{k+1}`.
pub fn rhs_three(now: &State, delayed: [&State; 3], params: &ThreeProteinParams) -> Result<State> {
    now.expect_dim(4, "rhs_three current state")?;
    for d in delayed {
        d.expect_dim(4, "rhs_three delayed state")?;
    }
    let d: Vec<Vec<f64>> = delayed.iter().map(|s| s.to_vec()).collect();
    let mut out = [0.0; 4];
    params.eval(&now.to_vec(), &[&d[0], &d[1], &d[2]], &mut out);
    Ok(State::from_slice(&out))
}

impl DelayModel for ThreeProteinParams {
    fn dim(&self) -> usize {
        4
    }

    fn delays(&self) -> &[f64] {
        &self.delays
    }

    fn total_resource(&self) -> f64 {
        self.total_resource
    }

    fn sequestration(&self) -> f64 {
        self.sequestration
    }

    fn eval(&self, now: &[f64], delayed: &[&[f64]], out: &mut [f64]) {
        let h = &self.hill;
        let (b, d) = (self.max_growth, self.decay);
        let m1 = self.flux(0, delayed[0]);
        let m2 = self.flux(1, delayed[1]);
        let m3 = self.flux(2, delayed[2]);
        out[0] = b[0] * m1 - d[0] * now[0];
        out[1] = b[1] * m2 - d[1] * now[1];
        out[2] = b[2] * m3 - d[2] * now[2];
        let mu1 = h.value(now[1]) * h.value(now[2]) * now[3];
        let mu2 = h.value(now[0]) * now[3];
        out[3] = self.sequestration * (m1 + m2 + m3 - mu1 - 2.0 * mu2);
    }

    fn jacobians(&self, now: &[f64], delayed: &[&[f64]]) -> (Matrix, Vec<Matrix>) {
        let a = self.sequestration;
        let mut g0 = Matrix::zeros(4, 4);
        let mut grad = [0.0; 4];
        for i in 0..3 {
            g0[(i, i)] = -self.decay[i];
        }
        self.flux_gradient(0, now, &mut grad);
        for j in 0..4 {
            g0[(3, j)] -= a * grad[j];
        }
        self.flux_gradient(1, now, &mut grad);
        for j in 0..4 {
            g0[(3, j)] -= 2.0 * a * grad[j];
        }
        let delayed_mats = (0..3)
            .map(|k| {
                let mut g = Matrix::zeros(4, 4);
                self.flux_gradient(k, delayed[k], &mut grad);
                for j in 0..4 {
                    g[(k, j)] = self.max_growth[k] * grad[j];
                    g[(3, j)] = a * grad[j];
                }
                g
            })
            .collect();
        (g0, delayed_mats)
    }

    fn flux(&self, k: usize, x: &[f64]) -> f64 {
        let h = &self.hill;
        match k {
            0 => h.value(x[1]) * h.value(x[2]) * x[3],
            _ => h.value(x[0]) * x[3],
        }
    }

    fn flux_gradient(&self, k: usize, x: &[f64], out: &mut [f64]) {
        let h = &self.hill;
        out.fill(0.0);
        match k {
            0 => {
                let (f2, f3) = (h.value(x[1]), h.value(x[2]));
                out[1] = h.slope(x[1]) * f3 * x[3];
                out[2] = f2 * h.slope(x[2]) * x[3];
                out[3] = f2 * f3;
            }
            _ => {
                out[0] = h.slope(x[0]) * x[3];
                out[3] = h.value(x[0]);
            }
        }
    }
}

/// Logarithmic grid of positive Newton starting points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StartGrid {
    /// Points per protein axis.
    pub per_axis: usize,
    pub lo: f64,
    pub hi: f64,
}

impl StartGrid {
    /// 16 points per axis for the symmetric reduction, 12 otherwise, spanning
    /// `1e-3 kappa` up to the largest rate `max(B) R_T / min(D)` plus `kappa`.
    pub fn for_params(params: &ThreeProteinParams) -> Self {
        let kappa = params.hill.kappa;
        let bmax = params.max_growth.iter().copied().fold(0.0, f64::max);
        let dmin = params.decay.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            per_axis: if params.is_symmetric() { 16 } else { 12 },
            lo: 1e-3 * kappa,
            hi: bmax * params.total_resource / dmin + kappa,
        }
    }

    fn values(&self) -> Vec<f64> {
        let n = self.per_axis.max(1);
        if n == 1 {
            return vec![(self.lo * self.hi).sqrt()];
        }
        let (a, b) = (self.lo.ln(), self.hi.ln());
        (0..n)
            .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
            .collect()
    }
}

/// Equilibria of the three-protein model with the default start grid.
pub fn equilibria_three(params: &ThreeProteinParams) -> Result<EquilibriumSet> {
    equilibria_three_with(params, &StartGrid::for_params(params))
}

/// Equilibria by damped Newton from every point of `grid`.
///
/// With `B_2 = B_3`, `D_2 = D_3` and `tau_2 = tau_3` the search runs on the
/// invariant plane `p_2 = p_3`. Roots are deduplicated, polished on the full
/// system and labelled by the l2 norm of the production vector. The set is
/// flagged incomplete when no start converges at all, or when a lone
/// nontrivial root is not a fold.
pub fn equilibria_three_with(
    params: &ThreeProteinParams,
    grid: &StartGrid,
) -> Result<EquilibriumSet> {
    params.validate()?;
    let axis = grid.values();
    let symmetric = params.is_symmetric();
    let mut roots: Vec<[f64; 3]> = Vec::new();
    let mut converged_any = false;
    let mut try_start = |start: [f64; 3]| {
        let found = if symmetric {
            newton_symmetric(params, start[0], start[1]).and_then(|p| newton(params, p))
        } else {
            newton(params, start)
        };
        if let Some(p) = found {
            converged_any = true;
            let tiny = 1e-8 * params.hill.kappa;
            if p.iter().all(|&x| x > tiny)
                && !roots.iter().any(|q| max_dist(q, &p) < DEDUP_TOL * (1.0 + norm(&p)))
            {
                roots.push(p);
            }
        }
    };
    for &a in &axis {
        for &b in &axis {
            if symmetric {
                try_start([a, b, b]);
            } else {
                for &c in &axis {
                    try_start([a, b, c]);
                }
            }
        }
    }
    if symmetric {
        for p in roots.iter_mut() {
            let m = 0.5 * (p[1] + p[2]);
            p[1] = m;
            p[2] = m;
        }
    }
    roots.sort_by(|a, b| norm(a).partial_cmp(&norm(b)).unwrap());

    let mut points = vec![Equilibrium {
        state: State::new(vec![0.0; 3], params.total_resource),
        kind: EquilibriumKind::Trivial,
        degenerate: false,
    }];
    let mut incomplete = !converged_any;
    let point = |p: &[f64; 3], kind, degenerate| Equilibrium {
        state: State::new(p.to_vec(), params.resource_at(p)),
        kind,
        degenerate,
    };
    match roots.len() {
        0 => {}
        1 => {
            let fold = is_fold(params, &roots[0]);
            incomplete |= !fold;
            points.push(point(&roots[0], EquilibriumKind::Top, true));
        }
        k => {
            for (i, r) in roots.iter().enumerate() {
                let kind = if i + 1 == k {
                    EquilibriumKind::Top
                } else {
                    EquilibriumKind::Middle
                };
                points.push(point(r, kind, false));
            }
        }
    }
    if incomplete {
        log::warn!("three-protein equilibrium search may have missed roots");
    }
    Ok(EquilibriumSet { points, incomplete })
}

fn norm(p: &[f64; 3]) -> f64 {
    p.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn max_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn residual_scale(params: &ThreeProteinParams, p: &[f64; 3]) -> f64 {
    (0..3)
        .map(|i| params.decay[i] * p[i].abs())
        .fold(1.0_f64, f64::max)
}

/// Near-singular Jacobian relative to its column norms.
fn is_fold(params: &ThreeProteinParams, p: &[f64; 3]) -> bool {
    let (_, j) = params.reduced(p);
    let m: Vec<Vec<f64>> = j.iter().map(|r| r.to_vec()).collect();
    let det = det3(&j);
    let cols: f64 = (0..3)
        .map(|c| (0..3).map(|r| m[r][c] * m[r][c]).sum::<f64>().sqrt())
        .product();
    det.abs() <= 1e-6 * cols
}

fn det3(a: &[[f64; 3]; 3]) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Gaussian elimination with partial pivoting on a tiny dense system.
fn solve_small<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    let scale = a.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
    for k in 0..N {
        let piv = (k..N)
            .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())
            .unwrap();
        if a[piv][k].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..N {
            let l = a[i][k] / a[k][k];
            for j in k..N {
                a[i][j] -= l * a[k][j];
            }
            b[i] -= l * b[k];
        }
    }
    let mut x = [0.0; N];
    for k in (0..N).rev() {
        let s: f64 = (k + 1..N).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

/// Damped Newton keeping every iterate positive. Returns the root when the
/// residual drops below `1e-12` relative to `D_i p_i`.
fn damped_newton<const N: usize>(
    mut x: [f64; N],
    eval: impl Fn(&[f64; N]) -> ([f64; N], [[f64; N]; N]),
    scale: impl Fn(&[f64; N]) -> f64,
) -> Option<[f64; N]> {
    let (mut f, mut j) = eval(&x);
    for _ in 0..NEWTON_ITERS {
        let fnorm = max_abs(&f);
        if fnorm <= 1e-12 * scale(&x) {
            return Some(x);
        }
        let step = solve_small(j, f)?;
        let mut lambda = 1.0;
        // Stay in the positive orthant.
        for i in 0..N {
            if step[i] > 0.0 && x[i] - lambda * step[i] <= 0.0 {
                lambda = lambda.min(0.9 * x[i] / step[i]);
            }
        }
        let mut accepted = false;
        for _ in 0..30 {
            let mut trial = x;
            for i in 0..N {
                trial[i] -= lambda * step[i];
            }
            let (ft, jt) = eval(&trial);
            if max_abs(&ft) < fnorm || lambda < 1e-6 {
                x = trial;
                f = ft;
                j = jt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted || x.iter().any(|v| !v.is_finite()) {
            return None;
        }
    }
    (max_abs(&f) <= 1e-10 * scale(&x)).then_some(x)
}

fn newton(params: &ThreeProteinParams, start: [f64; 3]) -> Option<[f64; 3]> {
    damped_newton(start, |p| params.reduced(p), |p| residual_scale(params, p))
}

/// Newton on the invariant plane `p_2 = p_3`.
fn newton_symmetric(params: &ThreeProteinParams, p1: f64, p2: f64) -> Option<[f64; 3]> {
    let eval = |q: &[f64; 2]| {
        let (f, j) = params.reduced(&[q[0], q[1], q[1]]);
        (
            [f[0], f[1]],
            [[j[0][0], j[0][1] + j[0][2]], [j[1][0], j[1][1] + j[1][2]]],
        )
    };
    let q = damped_newton([p1, p2], eval, |q| residual_scale(params, &[q[0], q[1], q[1]]))?;
    Some([q[0], q[1], q[1]])
}

/// Linearisation `y' = G1 y + G2 y(t - tau1) + G3 y(t - tau2) + G4 y(t - tau3)`;
/// matrices sharing a delay are summed.
pub fn linearize_three(eq: &Equilibrium, params: &ThreeProteinParams) -> Result<LinearDDE> {
    eq.state.expect_dim(4, "linearize_three")?;
    let q = eq.state.to_vec();
    let (g1, gs) = params.jacobians(&q, &[&q, &q, &q]);
    LinearDDE::new(g1, params.delays.iter().copied().zip(gs).collect())
}
