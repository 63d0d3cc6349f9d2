use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Cooperative activation `x^n / (kappa^n + x^n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HillParams {
    /// Half-activation threshold.
    pub kappa: f64,
    /// Hill exponent.
    pub n: u32,
}

impl Default for HillParams {
    fn default() -> Self {
        Self { kappa: 0.5, n: 2 }
    }
}

impl HillParams {
    pub fn new(kappa: f64, n: u32) -> Result<Self> {
        let h = Self { kappa, n };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(invalid("kappa", format!("must be positive, got {}", self.kappa)));
        }
        if self.n == 0 {
            return Err(invalid("n", "Hill exponent must be a positive integer"));
        }
        Ok(())
    }

    /// `kappa^n`.
    #[inline]
    pub fn kappa_pow(&self) -> f64 {
        self.kappa.powi(self.n as i32)
    }

    /// Activation value; states at or below zero activate nothing.
    ///
    /// Integrators and Newton iterates may dip a rounding error below zero, so
    /// this clamps instead of failing like [`hill`].
    #[inline]
    pub(crate) fn value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let xn = x.powi(self.n as i32);
        xn / (self.kappa_pow() + xn)
    }

    /// Clamped derivative matching [`HillParams::value`].
    #[inline]
    pub(crate) fn slope(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let n = self.n as i32;
        if x == 0.0 {
            return if n == 1 { 1.0 / self.kappa } else { 0.0 };
        }
        let kn = self.kappa_pow();
        let xn = x.powi(n);
        let den = kn + xn;
        f64::from(self.n) * kn * x.powi(n - 1) / (den * den)
    }
}

/// Hill activation `x^n / (kappa^n + x^n)` for `x >= 0`.
pub fn hill(x: f64, h: &HillParams) -> Result<f64> {
    check_nonnegative(x)?;
    Ok(h.value(x))
}

/// Derivative `n kappa^n x^(n-1) / (kappa^n + x^n)^2` for `x >= 0`.
pub fn hill_derivative(x: f64, h: &HillParams) -> Result<f64> {
    check_nonnegative(x)?;
    Ok(h.slope(x))
}

fn check_nonnegative(x: f64) -> Result<()> {
    if x >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("Hill function needs x >= 0, got {x}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const H: HillParams = HillParams { kappa: 0.5, n: 2 };

    #[test]
    fn reference_values() {
        assert_eq!(hill(0.0, &H).unwrap(), 0.0);
        assert_eq!(hill(0.5, &H).unwrap(), 0.5);
        // 0.7434^2 / (0.25 + 0.7434^2), evaluated by hand
        let x2 = 0.7434_f64 * 0.7434;
        assert!((hill(0.7434, &H).unwrap() - x2 / (0.25 + x2)).abs() < 1e-15);
        assert!((hill(0.7434, &H).unwrap() - 0.688529).abs() < 1e-6);
    }

    #[test]
    fn derivative_reference_values() {
        assert_eq!(hill_derivative(0.0, &H).unwrap(), 0.0);
        assert!((hill_derivative(0.5, &H).unwrap() - 1.0).abs() < 1e-15);
        let h1 = HillParams::new(0.5, 1).unwrap();
        assert_eq!(hill_derivative(0.0, &h1).unwrap(), 2.0);
    }

    #[test]
    fn negative_argument_is_a_domain_error() {
        assert!(matches!(hill(-1e-3, &H), Err(Error::Domain(_))));
        assert!(matches!(hill_derivative(-1.0, &H), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(HillParams::new(0.0, 2).is_err());
        assert!(HillParams::new(0.5, 0).is_err());
    }

    proptest! {
        #[test]
        fn derivative_matches_central_difference(x in 1e-3f64..20.0, n in 1u32..5, kappa in 0.3f64..3.0) {
            let h = HillParams::new(kappa, n).unwrap();
            let eps = 1e-5;
            let fd = (hill(x + eps, &h).unwrap() - hill(x - eps, &h).unwrap()) / (2.0 * eps);
            prop_assert!((fd - hill_derivative(x, &h).unwrap()).abs() < 1e-6);
        }

        #[test]
        fn monotone_and_bounded(a in 0.0f64..50.0, b in 0.0f64..50.0, n in 1u32..6) {
            let h = HillParams::new(0.5, n).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (fl, fh) = (hill(lo, &h).unwrap(), hill(hi, &h).unwrap());
            prop_assert!(fl <= fh);
            prop_assert!((0.0..1.0).contains(&fh));
        }
    }
}
