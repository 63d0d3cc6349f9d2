use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::mesh::{differentiation_matrix, SpectralMesh};
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, Lu, Matrix};
use crate::model::LinearDDE;

/// Default tolerance for recognising the translation multiplier `+1`.
pub const TRIVIAL_TOL: f64 = 1e-5;
/// Default band around the unit circle reported as marginal.
pub const MARGINAL_TOL: f64 = 1e-4;

/// Discrete monodromy operator and its spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct MonodromyResult {
    /// Maps node values on `[-T, 0]` to node values on `[0, T]`.
    pub u: Matrix,
    /// Eigenvalues of `u`, by descending modulus.
    pub multipliers: Vec<Complex64>,
    /// Largest multiplier after removing the trivial one.
    pub dominant: Complex64,
    /// A multiplier within the trivial tolerance of `+1` was removed.
    pub trivial_found: bool,
}

impl MonodromyResult {
    /// Sorts `multipliers` and removes the one closest to `+1` when it lies
    /// within `trivial_tol`.
    pub fn from_multipliers(u: Matrix, mut multipliers: Vec<Complex64>, trivial_tol: f64) -> Self {
        sort_by_modulus(&mut multipliers);
        let trivial = multipliers
            .iter()
            .enumerate()
            .map(|(i, z)| (i, (z - 1.0).norm()))
            .filter(|&(_, d)| d < trivial_tol)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i);
        if trivial.is_none() {
            log::debug!("no multiplier within {trivial_tol} of 1; using the raw dominant one");
        }
        let dominant = multipliers
            .iter()
            .enumerate()
            .find(|&(i, _)| Some(i) != trivial)
            .map(|(_, z)| *z)
            .unwrap_or(Complex64::new(0.0, 0.0));
        Self {
            u,
            multipliers,
            dominant,
            trivial_found: trivial.is_some(),
        }
    }
}

fn sort_by_modulus(z: &mut [Complex64]) {
    z.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.im.total_cmp(&a.im))
            .then(b.re.total_cmp(&a.re))
    });
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Stable => "stable",
            Self::Unstable => "unstable",
            Self::Marginal => "marginal",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub kind: Stability,
    pub dominant_modulus: f64,
    pub dominant: Complex64,
}

/// Verdict from the dominant nontrivial multiplier against `1 ± marg_tol`.
pub fn classify(res: &MonodromyResult, marg_tol: f64) -> StabilityVerdict {
    let m = res.dominant.norm();
    let kind = if m < 1.0 - marg_tol {
        Stability::Stable
    } else if m > 1.0 + marg_tol {
        Stability::Unstable
    } else {
        Stability::Marginal
    };
    StabilityVerdict {
        kind,
        dominant_modulus: m,
        dominant: res.dominant,
    }
}

/// Spectral-element monodromy matrix of `sys` over one `period`, with the
/// default trivial tolerance.
pub fn build_monodromy(sys: &LinearDDE, period: f64, mesh: &SpectralMesh) -> Result<MonodromyResult> {
    build_monodromy_with(sys, period, mesh, TRIVIAL_TOL)
}

/// Spectral-element monodromy matrix of `sys` over one `period`.
///
/// The unknowns are the node values on `[0, T]`; the data are the node
/// values on `[-T, 0]`. Continuity joins the two at `t = 0`, and every other
/// node carries the collocated equation. A delayed argument that falls in the
/// new segment is interpolated there (left-hand side `H`), otherwise in the
/// old one (right-hand side `P`). Then `U = H^{-1} P`.
pub fn build_monodromy_with(
    sys: &LinearDDE,
    period: f64,
    mesh: &SpectralMesh,
    trivial_tol: f64,
) -> Result<MonodromyResult> {
    mesh.validate()?;
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::Configuration(format!("period must be positive, got {period}")));
    }
    if sys.max_delay() > period * (1.0 + 1e-12) {
        return Err(Error::Configuration(format!(
            "delay {} exceeds the monodromy window {period}",
            sys.max_delay()
        )));
    }
    let d = sys.dim();
    let n = mesh.order;
    let nodes = mesh.nodes(0.0, period);
    let m = nodes.len();
    let size = m * d;
    let mut h = Matrix::zeros(size, size);
    let mut p = Matrix::zeros(size, size);

    h.add_identity_block(0, 0, d, 1.0);
    p.add_identity_block(0, (m - 1) * d, d, 1.0);

    let elem = period / mesh.num_elements as f64;
    let dref = differentiation_matrix(n).scaled(2.0 / elem);
    let g0 = sys.instantaneous();
    for e in 0..mesh.num_elements {
        for i in 1..=n {
            let gi = e * n + i;
            let row = gi * d;
            for j in 0..=n {
                h.add_identity_block(row, (e * n + j) * d, d, dref[(i, j)]);
            }
            h.add_block(row, gi * d, g0, -1.0);
            for term in sys.delayed_terms() {
                let s = nodes[gi] - term.delay;
                let on_new = s >= -1e-12 * period;
                let at = if on_new { s.max(0.0) } else { s + period };
                let (first, weights) = mesh.interpolation_row(at, 0.0, period);
                let (target, sign) = if on_new { (&mut h, -1.0) } else { (&mut p, 1.0) };
                for (j, w) in weights.iter().enumerate() {
                    if *w != 0.0 {
                        target.add_block(row, (first + j) * d, &term.matrix, sign * w);
                    }
                }
            }
        }
    }
    let lu = Lu::factor(&h).map_err(|err| match err {
        Error::Singular { pivot } => Error::SingularMesh {
            element: (pivot / d).saturating_sub(1) / n,
        },
        other => other,
    })?;
    let u = lu.solve_matrix(&p);
    let mu = eigenvalues(&u)?;
    Ok(MonodromyResult::from_multipliers(u, mu, trivial_tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64, tau: f64) -> LinearDDE {
        LinearDDE::new(
            Matrix::from_diagonal(&[a]),
            vec![(tau, Matrix::from_diagonal(&[b]))],
        )
        .unwrap()
    }

    #[test]
    fn exclusion_removes_only_the_closest_to_one() {
        let z = vec![
            Complex64::new(0.93, 0.0),
            Complex64::new(1.000_000_2, 0.0),
            Complex64::new(0.1, 0.0),
        ];
        let r = MonodromyResult::from_multipliers(Matrix::zeros(1, 1), z, TRIVIAL_TOL);
        assert!(r.trivial_found);
        assert_eq!(r.dominant, Complex64::new(0.93, 0.0));
        assert_eq!(classify(&r, MARGINAL_TOL).kind, Stability::Stable);
        assert_eq!(r.multipliers[0], Complex64::new(1.000_000_2, 0.0));
    }

    #[test]
    fn without_a_trivial_multiplier_the_raw_dominant_is_used() {
        let z = vec![Complex64::new(0.5, 0.0), Complex64::new(-1.2, 0.0)];
        let r = MonodromyResult::from_multipliers(Matrix::zeros(1, 1), z, TRIVIAL_TOL);
        assert!(!r.trivial_found);
        assert_eq!(r.dominant.re, -1.2);
        assert_eq!(classify(&r, MARGINAL_TOL).kind, Stability::Unstable);
    }

    #[test]
    fn marginal_band() {
        let z = vec![Complex64::new(0.0, 1.000_05)];
        let r = MonodromyResult::from_multipliers(Matrix::zeros(1, 1), z, TRIVIAL_TOL);
        assert_eq!(classify(&r, MARGINAL_TOL).kind, Stability::Marginal);
    }

    #[test]
    fn ode_embedding_gives_the_exponential() {
        let sys = LinearDDE::new(
            Matrix::from_diagonal(&[-2.0]),
            vec![(1.0, Matrix::zeros(1, 1))],
        )
        .unwrap();
        let r = build_monodromy(&sys, 1.0, &SpectralMesh::default()).unwrap();
        assert!((r.dominant.norm() - (-2.0_f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn delay_longer_than_window_is_rejected() {
        let sys = scalar(0.0, -1.0, 2.0);
        assert!(matches!(
            build_monodromy(&sys, 1.0, &SpectralMesh::default()),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn shorter_delay_inside_the_window() {
        // y' = -y(t - 1) observed over a window of 2 sees the square of the
        // one-delay multiplier.
        let sys = scalar(0.0, -1.0, 1.0);
        let one = build_monodromy(&sys, 1.0, &SpectralMesh::new(2, 24).unwrap()).unwrap();
        let two = build_monodromy(&sys, 2.0, &SpectralMesh::new(4, 24).unwrap()).unwrap();
        assert!((two.dominant.norm() - one.dominant.norm().powi(2)).abs() < 1e-8);
    }

    #[test]
    fn multipliers_come_in_conjugate_pairs() {
        let sys = scalar(-0.5, -2.0, 1.0);
        let r = build_monodromy(&sys, 1.0, &SpectralMesh::default()).unwrap();
        for z in &r.multipliers {
            let best = r
                .multipliers
                .iter()
                .map(|w| (w - z.conj()).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-10);
        }
    }
}
