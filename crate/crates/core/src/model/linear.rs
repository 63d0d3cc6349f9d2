use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Delays closer than this are treated as one delay.
pub const DELAY_MERGE_TOL: f64 = 1e-12;

/// One `G_k y(t - delay)` term of a linear DDE.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayedTerm {
    pub delay: f64,
    pub matrix: Matrix,
}

/// `y'(t) = G_0 y(t) + sum_k G_k y(t - delay_k)` with distinct, ascending,
/// strictly positive delays.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearDDE {
    instantaneous: Matrix,
    delayed: Vec<DelayedTerm>,
}

impl LinearDDE {
    /// Builds the system, sorting the delays, summing matrices whose delays
    /// agree to [`DELAY_MERGE_TOL`] and folding zero delays into `G_0`.
    pub fn new(instantaneous: Matrix, terms: Vec<(f64, Matrix)>) -> Result<Self> {
        if !instantaneous.is_square() {
            return Err(Error::Configuration("G0 must be square".into()));
        }
        let dim = instantaneous.rows();
        let mut g0 = instantaneous;
        let mut terms = terms;
        for (d, m) in &terms {
            if !(d.is_finite() && *d >= 0.0) {
                return Err(Error::Configuration(format!("invalid delay {d}")));
            }
            if m.rows() != dim || m.cols() != dim {
                return Err(Error::Configuration(format!(
                    "delayed matrix is {}x{}, expected {dim}x{dim}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        terms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut delayed: Vec<DelayedTerm> = Vec::with_capacity(terms.len());
        for (d, m) in terms {
            if d <= DELAY_MERGE_TOL {
                g0 = g0.add(&m);
                continue;
            }
            match delayed.last_mut() {
                Some(last) if (d - last.delay).abs() <= DELAY_MERGE_TOL => {
                    last.matrix = last.matrix.add(&m);
                }
                _ => delayed.push(DelayedTerm { delay: d, matrix: m }),
            }
        }
        Ok(Self {
            instantaneous: g0,
            delayed,
        })
    }

    pub fn dim(&self) -> usize {
        self.instantaneous.rows()
    }

    pub fn instantaneous(&self) -> &Matrix {
        &self.instantaneous
    }

    pub fn delayed_terms(&self) -> &[DelayedTerm] {
        &self.delayed
    }

    pub fn max_delay(&self) -> f64 {
        self.delayed.last().map_or(0.0, |t| t.delay)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_equal_delays_and_sorts() {
        let a = Matrix::identity(2);
        let b = Matrix::from_diagonal(&[2.0, 3.0]);
        let sys = LinearDDE::new(
            Matrix::zeros(2, 2),
            vec![(2.0, a.clone()), (1.0, b.clone()), (2.0 + 1e-13, a.clone())],
        )
        .unwrap();
        assert_eq!(sys.delayed_terms().len(), 2);
        assert_eq!(sys.delayed_terms()[0].delay, 1.0);
        assert_eq!(sys.delayed_terms()[1].matrix, a.scaled(2.0));
    }

    #[test]
    fn zero_delay_folds_into_instantaneous() {
        let sys =
            LinearDDE::new(Matrix::identity(1), vec![(0.0, Matrix::from_diagonal(&[-3.0]))]).unwrap();
        assert!(sys.delayed_terms().is_empty());
        assert_eq!(sys.instantaneous()[(0, 0)], -2.0);
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        assert!(LinearDDE::new(Matrix::identity(2), vec![(1.0, Matrix::identity(3))]).is_err());
    }
}
