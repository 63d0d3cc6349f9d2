use super::linear::LinearDDE;
use super::params::{SingleProteinParams, State};
use super::poly::Polynomial;
use super::{DelayModel, Equilibrium, EquilibriumKind, EquilibriumSet};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Middle and top closer than this are reported as one degenerate point.
const FOLD_TOL: f64 = 1e-8;

impl SingleProteinParams {
    pub(crate) fn dim(&self) -> usize {
        2
    }

    /// Free resource at a constant production rate `p`.
    pub fn resource_at(&self, p: f64) -> f64 {
        self.total_resource / (1.0 + self.sequestration * self.delay * self.hill.value(p))
    }
}

/// Right-hand side `(p', R')` of the single-protein model.
pub fn rhs_single(now: &State, delayed: &State, params: &SingleProteinParams) -> Result<State> {
    now.expect_dim(2, "rhs_single current state")?;
    delayed.expect_dim(2, "rhs_single delayed state")?;
    let mut out = [0.0; 2];
    params.eval(&now.to_vec(), &[&delayed.to_vec()], &mut out);
    Ok(State::from_slice(&out))
}

impl DelayModel for SingleProteinParams {
    fn dim(&self) -> usize {
        2
    }

    fn delays(&self) -> &[f64] {
        std::slice::from_ref(&self.delay)
    }

    fn total_resource(&self) -> f64 {
        self.total_resource
    }

    fn sequestration(&self) -> f64 {
        self.sequestration
    }

    fn eval(&self, now: &[f64], delayed: &[&[f64]], out: &mut [f64]) {
        let mu_now = self.flux(0, now);
        let mu_del = self.flux(0, delayed[0]);
        out[0] = self.max_growth * mu_del - self.decay * now[0];
        out[1] = self.sequestration * (mu_del - mu_now);
    }

    fn jacobians(&self, now: &[f64], delayed: &[&[f64]]) -> (Matrix, Vec<Matrix>) {
        let a = self.sequestration;
        let b = self.max_growth;
        let h = &self.hill;
        let (p, r) = (now[0], now[1]);
        let (pd, rd) = (delayed[0][0], delayed[0][1]);
        let g1 = Matrix::from_rows(&[
            vec![-self.decay, 0.0],
            vec![-a * h.slope(p) * r, -a * h.value(p)],
        ]);
        let g2 = Matrix::from_rows(&[
            vec![b * h.slope(pd) * rd, b * h.value(pd)],
            vec![a * h.slope(pd) * rd, a * h.value(pd)],
        ]);
        (g1, vec![g2])
    }

    fn flux(&self, _k: usize, x: &[f64]) -> f64 {
        self.hill.value(x[0]) * x[1]
    }

    fn flux_gradient(&self, _k: usize, x: &[f64], out: &mut [f64]) {
        out[0] = self.hill.slope(x[0]) * x[1];
        out[1] = self.hill.value(x[0]);
    }
}

/// Equilibria of the single-protein model.
///
/// The trivial point `(0, R_T)` is always present. For `n = 2` the nontrivial
/// points come from the quadratic `(1 + A tau) p^2 - (B R_T / D) p + kappa^2 = 0`;
/// other exponents fall back to [`equilibria_single_by_isolation`].
pub fn equilibria_single(params: &SingleProteinParams) -> Result<EquilibriumSet> {
    params.validate()?;
    if params.hill.n != 2 {
        return equilibria_single_by_isolation(params);
    }
    let lead = 1.0 + params.sequestration * params.delay;
    let b = params.max_growth * params.total_resource / params.decay;
    let k2 = params.hill.kappa_pow();
    let disc = b * b - 4.0 * lead * k2;
    let roots = if disc < 0.0 || b <= 0.0 {
        Vec::new()
    } else {
        // Stable form: the middle root follows from the product of the roots.
        let top = (b + disc.sqrt()) / (2.0 * lead);
        let middle = k2 / (lead * top);
        vec![middle, top]
    };
    Ok(assemble(params, roots))
}

/// Equilibria for any integer Hill exponent, by isolating the positive real
/// roots of `(1 + A tau) p^n - (B R_T / D) p^(n-1) + kappa^n` with Sturm
/// sequences.
pub fn equilibria_single_by_isolation(params: &SingleProteinParams) -> Result<EquilibriumSet> {
    params.validate()?;
    let n = params.hill.n as usize;
    let mut coeffs = vec![0.0; n + 1];
    coeffs[0] = params.hill.kappa_pow();
    coeffs[n - 1] -= params.max_growth * params.total_resource / params.decay;
    coeffs[n] += 1.0 + params.sequestration * params.delay;
    let poly = Polynomial::new(coeffs);
    let roots = poly.real_roots_in(0.0, poly.root_bound());
    Ok(assemble(params, roots.into_iter().filter(|&p| p > 0.0).collect()))
}

fn assemble(params: &SingleProteinParams, mut roots: Vec<f64>) -> EquilibriumSet {
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut points = vec![Equilibrium {
        state: State::single(0.0, params.total_resource),
        kind: EquilibriumKind::Trivial,
        degenerate: false,
    }];
    let point = |p: f64, kind, degenerate| Equilibrium {
        state: State::single(p, params.resource_at(p)),
        kind,
        degenerate,
    };
    match roots.as_slice() {
        [] => {}
        [p] => points.push(point(*p, EquilibriumKind::Top, true)),
        [lo, .., hi] if hi - lo < FOLD_TOL => {
            points.push(point(0.5 * (lo + hi), EquilibriumKind::Top, true))
        }
        [lo, .., hi] => {
            points.push(point(*lo, EquilibriumKind::Middle, false));
            points.push(point(*hi, EquilibriumKind::Top, false));
        }
    }
    EquilibriumSet {
        points,
        incomplete: false,
    }
}

/// Smallest total resource for which the nontrivial equilibria exist.
///
/// For `n = 2` this is `sqrt(4 D^2 kappa^2 (1 + A tau) / B^2)`; in general the
/// fold of `(1 + A tau) p^n - (B R_T / D) p^(n-1) + kappa^n`. For `n = 1` the
/// single nontrivial root appears at `R_T = D kappa / B`. The `total_resource`
/// field of `params` is ignored.
pub fn saddle_node_boundary_single(tau: f64, params: &SingleProteinParams) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::Domain(format!("delay must be >= 0, got {tau}")));
    }
    let lead = 1.0 + params.sequestration * tau;
    let kappa = params.hill.kappa;
    let n = params.hill.n;
    let scale = params.decay / params.max_growth;
    if n == 1 {
        return Ok(scale * kappa);
    }
    if n == 2 {
        let d = params.decay;
        let b = params.max_growth;
        return Ok((4.0 * d * d * kappa * kappa * lead / (b * b)).sqrt());
    }
    let nf = f64::from(n);
    let p = kappa * ((nf - 1.0) / lead).powf(1.0 / nf);
    Ok(scale * p * lead * nf / (nf - 1.0))
}

/// Linearisation `y' = G1 y + G2 y(t - tau)` about an equilibrium.
pub fn linearize_single(eq: &Equilibrium, params: &SingleProteinParams) -> Result<LinearDDE> {
    eq.state.expect_dim(2, "linearize_single")?;
    let q = eq.state.to_vec();
    let (g1, g2) = params.jacobians(&q, &[&q]);
    LinearDDE::new(g1, vec![(params.delay, g2[0].clone())])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference(tau: f64, rt: f64) -> SingleProteinParams {
        SingleProteinParams::new(tau, rt)
    }

    fn residual(params: &SingleProteinParams, e: &Equilibrium) -> f64 {
        let d = rhs_single(&e.state, &e.state, params).unwrap();
        let total = params.constant_state_total(&e.state.to_vec());
        d.proteins[0]
            .abs()
            .max(d.resource.abs())
            .max((total - params.total_resource).abs())
    }

    #[test]
    fn rhs_vanishes_at_trivial_point() {
        let p = reference(1.0, 50.0);
        let s = State::single(0.0, 50.0);
        assert_eq!(rhs_single(&s, &s, &p).unwrap(), State::single(0.0, 0.0));
    }

    #[test]
    fn rhs_hand_evaluation() {
        // f(1) = 1/(0.25 + 1) = 0.8; p' = 2*0*0 - 10*1; R' = 1*(0 - 0.8*1)
        let p = reference(1.0, 50.0);
        let d = rhs_single(&State::single(1.0, 1.0), &State::single(0.0, 0.0), &p).unwrap();
        assert!((d.proteins[0] + 10.0).abs() < 1e-15);
        assert!((d.resource + 0.8).abs() < 1e-15);
    }

    #[test]
    fn rhs_near_reported_top_point() {
        let p = reference(12.0, 50.0);
        let s = State::single(0.7434, 5.3982);
        let d = rhs_single(&s, &s, &p).unwrap();
        assert!(d.proteins[0].abs() < 1e-3);
        assert_eq!(d.resource, 0.0);
    }

    #[test]
    fn rhs_rejects_wrong_dimension() {
        let p = reference(1.0, 5.0);
        let s = State::new(vec![0.0, 0.0], 1.0);
        assert!(rhs_single(&s, &s, &p).is_err());
    }

    #[test]
    fn top_equilibria_match_reported_values() {
        let set = equilibria_single(&reference(12.0, 50.0)).unwrap();
        assert_eq!(set.len(), 3);
        let top = set.get(EquilibriumKind::Top).unwrap();
        assert!((top.state.proteins[0] - 0.7434).abs() < 5e-4);
        assert!((top.state.resource - 5.3982).abs() < 5e-4);

        let set = equilibria_single(&reference(5.0, 50.0)).unwrap();
        let top = set.get(EquilibriumKind::Top).unwrap();
        assert!((top.state.proteins[0] - 1.6412).abs() < 5e-4);
        assert!((top.state.resource - 8.968).abs() < 5e-3);
    }

    #[test]
    fn starved_region_has_only_trivial_point() {
        let set = equilibria_single(&reference(45.0, 5.0)).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.points[0].state, State::single(0.0, 5.0));
    }

    #[test]
    fn saddle_node_reference_values() {
        let p = reference(0.0, 0.0);
        assert!((saddle_node_boundary_single(0.0, &p).unwrap() - 5.0).abs() < 1e-14);
        assert!((saddle_node_boundary_single(0.75, &p).unwrap() - 6.614).abs() < 5e-4);
        assert!((saddle_node_boundary_single(3.0, &p).unwrap() - 10.0).abs() < 1e-13);
        assert!(saddle_node_boundary_single(-1.0, &p).is_err());
    }

    #[test]
    fn fold_is_reported_once_and_degenerate() {
        let p = reference(3.0, 10.0);
        let set = equilibria_single(&p).unwrap();
        assert_eq!(set.len(), 2);
        let top = set.get(EquilibriumKind::Top).unwrap();
        assert!(top.degenerate);
        assert!(set.get(EquilibriumKind::Middle).is_none());
    }

    #[test]
    fn general_exponent_saddle_node_matches_root_count() {
        for n in [1, 3, 4] {
            let mut p = reference(2.0, 0.0);
            p.hill.n = n;
            let rt = saddle_node_boundary_single(2.0, &p).unwrap();
            p.total_resource = rt * 0.99;
            let below = equilibria_single(&p).unwrap().len();
            p.total_resource = rt * 1.01;
            let above = equilibria_single(&p).unwrap().len();
            let expect_above = if n == 1 { 2 } else { 3 };
            assert_eq!((below, above), (1, expect_above), "n = {n}");
        }
    }

    #[test]
    fn trivial_linearisation_is_an_ode() {
        let p = reference(12.0, 50.0);
        let set = equilibria_single(&p).unwrap();
        let sys = linearize_single(set.get(EquilibriumKind::Trivial).unwrap(), &p).unwrap();
        assert_eq!(sys.instantaneous(), &Matrix::from_diagonal(&[-10.0, 0.0]));
        assert_eq!(sys.delayed_terms().len(), 1);
        assert_eq!(sys.delayed_terms()[0].matrix.max_abs(), 0.0);
    }

    #[test]
    fn delayed_rows_are_proportional() {
        let p = reference(12.0, 50.0);
        let set = equilibria_single(&p).unwrap();
        let sys = linearize_single(set.get(EquilibriumKind::Top).unwrap(), &p).unwrap();
        let g0 = sys.instantaneous();
        assert_eq!(g0[(0, 1)], 0.0);
        assert_eq!(g0[(0, 0)], -10.0);
        let g = &sys.delayed_terms()[0].matrix;
        for j in 0..2 {
            let ratio = p.sequestration / p.max_growth;
            assert!((g[(1, j)] - ratio * g[(0, j)]).abs() < 1e-14);
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let p = reference(12.0, 50.0);
        let set = equilibria_single(&p).unwrap();
        for e in set.nontrivial() {
            let q = e.state.to_vec();
            let (g1, g2) = p.jacobians(&q, &[&q]);
            let fd = finite_difference(&p, &q);
            for i in 0..2 {
                for j in 0..2 {
                    let scale = 1.0 + g1[(i, j)].abs();
                    assert!((fd.0[(i, j)] - g1[(i, j)]).abs() < 1e-6 * scale);
                    let scale = 1.0 + g2[0][(i, j)].abs();
                    assert!((fd.1[(i, j)] - g2[0][(i, j)]).abs() < 1e-6 * scale);
                }
            }
        }
    }

    fn finite_difference(p: &SingleProteinParams, q: &[f64]) -> (Matrix, Matrix) {
        let h = 1e-6;
        let mut g1 = Matrix::zeros(2, 2);
        let mut g2 = Matrix::zeros(2, 2);
        for j in 0..2 {
            let mut plus = q.to_vec();
            let mut minus = q.to_vec();
            plus[j] += h;
            minus[j] -= h;
            let (mut fp, mut fm) = ([0.0; 2], [0.0; 2]);
            p.eval(&plus, &[q], &mut fp);
            p.eval(&minus, &[q], &mut fm);
            for i in 0..2 {
                g1[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
            p.eval(q, &[&plus], &mut fp);
            p.eval(q, &[&minus], &mut fm);
            for i in 0..2 {
                g2[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        (g1, g2)
    }

    proptest! {
        #[test]
        fn every_equilibrium_is_a_fixed_point(tau in 0.0f64..50.0, rt in 0.0f64..50.0) {
            let p = reference(tau, rt);
            let set = equilibria_single(&p).unwrap();
            prop_assert!(matches!(set.len(), 1 | 3) || set.points.iter().any(|e| e.degenerate));
            for e in &set.points {
                prop_assert!(residual(&p, e) < 1e-10, "{:?}", e);
                if e.kind != EquilibriumKind::Trivial {
                    prop_assert!(e.state.proteins[0] > 0.0);
                }
            }
            if let (Some(m), Some(t)) = (set.get(EquilibriumKind::Middle), set.get(EquilibriumKind::Top)) {
                prop_assert!(t.state.proteins[0] > m.state.proteins[0]);
            }
        }

        #[test]
        fn closed_form_matches_root_isolation(tau in 0.0f64..50.0, rt in 0.0f64..50.0) {
            let p = reference(tau, rt);
            let a = equilibria_single(&p).unwrap();
            let b = equilibria_single_by_isolation(&p).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.points.iter().zip(&b.points) {
                prop_assert!((x.state.proteins[0] - y.state.proteins[0]).abs() < 1e-10);
                prop_assert!((x.state.resource - y.state.resource).abs() < 1e-10);
            }
        }

        #[test]
        fn saddle_node_is_discriminant_zero(tau in 0.0f64..50.0) {
            let p = reference(tau, 0.0);
            let rt = saddle_node_boundary_single(tau, &p).unwrap();
            let lead = 1.0 + tau;
            let disc = (p.max_growth * rt).powi(2) - 4.0 * (p.decay * p.hill.kappa).powi(2) * lead;
            prop_assert!(disc.abs() <= 1e-12 * (p.max_growth * rt).powi(2));
        }

        #[test]
        fn constant_states_conserve_resource(x in 0.0f64..5.0, r in 0.0f64..50.0) {
            let p = reference(3.0, 50.0);
            let s = State::single(x, r);
            prop_assert_eq!(rhs_single(&s, &s, &p).unwrap().resource, 0.0);
        }
    }
}
