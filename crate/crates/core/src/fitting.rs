//! Boundary extraction from stability grids and polynomial fits of the
//! resulting curves.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{least_squares, Matrix};
use crate::spectral::{CellStatus, StabilityGrid};

/// What marks a boundary while scanning a column upwards in `R_T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCriterion {
    /// `|lambda| - 1` changes sign between neighbouring present cells;
    /// the crossing is linearly interpolated.
    ModulusCrossesOne,
    /// The number of equilibria changes; the crossing is the midpoint.
    EquilibriumCountChange,
}

/// One boundary point; `index` counts crossings within its column from 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub tau: f64,
    pub total_resource: f64,
    pub index: usize,
}

/// Scans every `tau` column of `grid` by ascending `R_T` and reports each
/// crossing. Columns without one contribute nothing.
pub fn extract_boundary(grid: &StabilityGrid, criterion: BoundaryCriterion) -> Vec<Crossing> {
    let mut out = Vec::new();
    for (i, &tau) in grid.taus.iter().enumerate() {
        let column = (0..grid.total_resources.len()).map(|j| grid.cell(i, j));
        let mut index = 0;
        match criterion {
            BoundaryCriterion::ModulusCrossesOne => {
                let present: Vec<(f64, f64)> = column
                    .filter(|c| c.status.is_present())
                    .filter_map(|c| Some((c.total_resource, c.modulus()? - 1.0)))
                    .collect();
                for w in present.windows(2) {
                    let ((r0, g0), (r1, g1)) = (w[0], w[1]);
                    if g0 == 0.0 || g0.signum() == g1.signum() {
                        continue;
                    }
                    out.push(Crossing {
                        tau,
                        total_resource: r0 + (r1 - r0) * g0 / (g0 - g1),
                        index,
                    });
                    index += 1;
                }
            }
            BoundaryCriterion::EquilibriumCountChange => {
                let counted: Vec<(f64, usize)> = column
                    .filter(|c| c.status != CellStatus::Failed)
                    .map(|c| (c.total_resource, c.n_equilibria))
                    .collect();
                for w in counted.windows(2) {
                    if w[0].1 != w[1].1 {
                        out.push(Crossing {
                            tau,
                            total_resource: 0.5 * (w[0].0 + w[1].0),
                            index,
                        });
                        index += 1;
                    }
                }
            }
        }
    }
    out
}

/// Least-squares polynomial `R_T(tau)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub degree: usize,
    /// Monomial coefficients, constant term first.
    pub coefficients: Vec<f64>,
    pub r2: f64,
    /// `tau` range of the fitted points.
    pub domain: (f64, f64),
    pub points: Vec<(f64, f64)>,
}

impl BoundaryCurve {
    pub fn eval(&self, tau: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * tau + c)
    }
}

/// Ordinary least squares in the monomial basis. Abscissae are scaled to
/// `[-1, 1]`-ish magnitudes internally; coefficients are returned unscaled.
pub fn fit_polynomial(points: &[(f64, f64)], degree: usize) -> Result<BoundaryCurve> {
    if points.len() < degree + 2 {
        return Err(invalid(
            "points",
            format!("degree {degree} needs at least {} points, got {}", degree + 2, points.len()),
        ));
    }
    if points.iter().any(|(x, y)| !(x.is_finite() && y.is_finite())) {
        return Err(invalid("points", "coordinates must be finite"));
    }
    let scale = points.iter().fold(0.0_f64, |m, (x, _)| m.max(x.abs())).max(1e-300);
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|(x, _)| (0..=degree).map(|k| (x / scale).powi(k as i32)).collect())
        .collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let scaled = least_squares(&Matrix::from_rows(&rows), &y)?;
    let coefficients: Vec<f64> = scaled
        .iter()
        .enumerate()
        .map(|(k, c)| c / scale.powi(k as i32))
        .collect();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let curve = |x: f64| coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c);
    let ss_res: f64 = points.iter().map(|(x, y)| (y - curve(*x)).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, _)| (lo.min(*x), hi.max(*x)));
    Ok(BoundaryCurve {
        degree,
        coefficients,
        r2,
        domain: (lo, hi),
        points: points.to_vec(),
    })
}

/// Crossing coordinates with `tau >= min_tau`, optionally only the first
/// crossing of each column.
pub fn boundary_points(crossings: &[Crossing], min_tau: f64, first_only: bool) -> Vec<(f64, f64)> {
    crossings
        .iter()
        .filter(|c| c.tau >= min_tau && (!first_only || c.index == 0))
        .map(|c| (c.tau, c.total_resource))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::spectral::StabilityCell;
    use num_complex::Complex64;

    fn synthetic(taus: &[f64], rts: &[f64], modulus: impl Fn(f64, f64) -> f64) -> StabilityGrid {
        let mut cells = Vec::new();
        for &rt in rts {
            for &tau in taus {
                let m = modulus(tau, rt);
                cells.push(StabilityCell {
                    tau,
                    total_resource: rt,
                    dominant: Some(Complex64::new(m, 0.0)),
                    n_equilibria: if rt > tau + 3.0 { 3 } else { 1 },
                    status: if m < 1.0 { CellStatus::Stable } else { CellStatus::Unstable },
                    incomplete: false,
                    error: None,
                });
            }
        }
        StabilityGrid {
            taus: taus.to_vec(),
            total_resources: rts.to_vec(),
            cells,
        }
    }

    #[test]
    fn linear_modulus_gives_exact_crossings() {
        let taus: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let rts: Vec<f64> = (0..60).map(|i| 0.5 * i as f64).collect();
        // |lambda| = (2 tau + 5) / R_T is decreasing in R_T, so use the
        // reciprocal to keep it linear in R_T.
        let g = synthetic(&taus, &rts, |tau, rt| rt / (2.0 * tau + 5.0));
        let c = extract_boundary(&g, BoundaryCriterion::ModulusCrossesOne);
        assert_eq!(c.len(), 10);
        for x in &c {
            assert!((x.total_resource - (2.0 * x.tau + 5.0)).abs() < 1e-12);
            assert_eq!(x.index, 0);
        }
        let fit = fit_polynomial(&boundary_points(&c, 0.0, true), 1).unwrap();
        assert!((fit.coefficients[0] - 5.0).abs() < 1e-10);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-10);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn count_change_uses_midpoints() {
        let g = synthetic(&[1.0, 2.0], &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0], |_, _| 0.5);
        let c = extract_boundary(&g, BoundaryCriterion::EquilibriumCountChange);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].total_resource, 4.5);
        assert_eq!(c[1].total_resource, 5.5);
        assert!(extract_boundary(&g, BoundaryCriterion::ModulusCrossesOne).is_empty());
    }

    #[test]
    fn multiple_crossings_are_tagged() {
        let g = synthetic(&[1.0], &[0.0, 1.0, 2.0, 3.0, 4.0], |_, rt| if rt == 2.0 { 1.5 } else { 0.5 });
        let c = extract_boundary(&g, BoundaryCriterion::ModulusCrossesOne);
        assert_eq!(c.iter().map(|x| x.index).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(boundary_points(&c, 0.0, true).len(), 1);
    }

    #[test]
    fn absent_cells_are_skipped() {
        let mut g = synthetic(&[1.0], &[0.0, 1.0, 2.0, 3.0], |_, rt| 0.6 + 0.2 * rt);
        g.cells[1].status = CellStatus::Absent;
        g.cells[1].dominant = None;
        let c = extract_boundary(&g, BoundaryCriterion::ModulusCrossesOne);
        assert_eq!(c.len(), 1);
        assert!((c[0].total_resource - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exact_cubic_and_r2() {
        let pts: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let x = 1.0 + i as f64;
                (x, 0.0016 * x.powi(3) - 0.1118 * x * x + 4.8855 * x + 10.3749)
            })
            .collect();
        let fit = fit_polynomial(&pts, 3).unwrap();
        for (got, want) in fit.coefficients.iter().zip([10.3749, 4.8855, -0.1118, 0.0016]) {
            assert!((got - want).abs() < 1e-9 * (1.0 + want.abs()), "{got} vs {want}");
        }
        assert_eq!(fit.domain, (1.0, 40.0));
        assert!((fit.eval(10.0) - pts[9].1).abs() < 1e-9);
        let noisy: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, if i % 2 == 0 { 1.0 } else { 0.0 })).collect();
        let f = fit_polynomial(&noisy, 1).unwrap();
        let mean = 0.6;
        let ss_tot: f64 = noisy.iter().map(|p| (p.1 - mean).powi(2)).sum();
        let ss_res: f64 = noisy.iter().map(|p| (p.1 - f.eval(p.0)).powi(2)).sum();
        assert!((f.r2 - (1.0 - ss_res / ss_tot)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_polynomial(&[(1.0, 1.0), (2.0, 2.0)], 1).is_err());
        let same = [(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)];
        assert!(matches!(fit_polynomial(&same, 1), Err(Error::RankDeficient)));
    }
}
