//! Real polynomials with Sturm-sequence root isolation.

/// Polynomial with coefficients in ascending degree order.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::new(vec![0.0]);
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * i as f64)
                .collect(),
        )
    }

    fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Remainder of `self / d`.
    fn rem(&self, d: &Self) -> Self {
        let mut r = self.coeffs.clone();
        let dd = d.degree();
        let lead = d.coeffs[dd];
        while r.len() > dd && r.len() > 1 {
            let k = r.len() - 1;
            let q = r[k] / lead;
            for j in 0..=dd {
                r[k - dd + j] -= q * d.coeffs[j];
            }
            r.pop();
        }
        // Clean entries that are rounding noise relative to the dividend.
        let scale = self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        for c in r.iter_mut() {
            if c.abs() <= 1e-13 * scale {
                *c = 0.0;
            }
        }
        Self::new(r)
    }

    fn sturm_sequence(&self) -> Vec<Self> {
        let mut seq = vec![self.clone(), self.derivative()];
        loop {
            let n = seq.len();
            if seq[n - 1].degree() == 0 {
                break;
            }
            let r = seq[n - 2].rem(&seq[n - 1]);
            if r.is_zero() {
                break;
            }
            seq.push(Self::new(r.coeffs.iter().map(|c| -c).collect()));
        }
        seq
    }

    /// Upper bound on the modulus of every root (Cauchy).
    pub fn root_bound(&self) -> f64 {
        let n = self.degree();
        let lead = self.coeffs[n].abs();
        1.0 + self.coeffs[..n]
            .iter()
            .fold(0.0_f64, |m, c| m.max(c.abs() / lead))
    }

    /// Distinct real roots in the half-open interval `(lo, hi]`, ascending,
    /// isolated by Sturm sequences and polished by safeguarded Newton.
    pub fn real_roots_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        if self.degree() == 0 || lo >= hi {
            return Vec::new();
        }
        let seq = self.sturm_sequence();
        let count = |x: f64| sign_changes(&seq, x);
        let mut out = Vec::new();
        let mut stack = vec![(lo, hi, count(lo), count(hi))];
        while let Some((a, b, va, vb)) = stack.pop() {
            let roots = va.saturating_sub(vb);
            if roots == 0 {
                continue;
            }
            if roots == 1 || b - a <= 1e-14 * b.abs().max(1.0) {
                out.push(self.polish(a, b));
                continue;
            }
            let m = 0.5 * (a + b);
            let vm = count(m);
            stack.push((a, m, va, vm));
            stack.push((m, b, vm, vb));
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }

    /// Root of `self` inside a bracket known to isolate exactly one root.
    fn polish(&self, mut a: f64, mut b: f64) -> f64 {
        let d = self.derivative();
        let (mut fa, fb) = (self.eval(a), self.eval(b));
        if fb == 0.0 {
            return b;
        }
        if fa * fb > 0.0 {
            // Even multiplicity: the bracket has no sign change; refine by Newton.
            let mut x = 0.5 * (a + b);
            for _ in 0..100 {
                let dx = d.eval(x);
                if dx == 0.0 {
                    break;
                }
                let step = self.eval(x) / dx;
                x = (x - step).clamp(a, b);
                if step.abs() <= 1e-16 * x.abs() {
                    break;
                }
            }
            return x;
        }
        let mut x = 0.5 * (a + b);
        for _ in 0..200 {
            let fx = self.eval(x);
            if fx == 0.0 {
                return x;
            }
            if fx * fa < 0.0 {
                b = x;
            } else {
                a = x;
                fa = fx;
            }
            let dx = d.eval(x);
            let newton = if dx != 0.0 { x - fx / dx } else { f64::NAN };
            let next = if newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
                return next;
            }
            x = next;
        }
        x
    }
}

fn sign_changes(seq: &[Polynomial], x: f64) -> usize {
    let mut changes = 0;
    let mut last = 0.0;
    for p in seq {
        let v = p.eval(x);
        if v == 0.0 {
            continue;
        }
        if last != 0.0 && (v > 0.0) != (last > 0.0) {
            changes += 1;
        }
        last = v;
    }
    changes
}
