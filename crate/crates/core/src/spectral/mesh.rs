use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::Matrix;

/// Piecewise Chebyshev–Gauss–Lobatto mesh: `num_elements` equal elements,
/// each carrying a polynomial of degree `order`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralMesh {
    pub num_elements: usize,
    pub order: usize,
}

impl Default for SpectralMesh {
    fn default() -> Self {
        Self {
            num_elements: 2,
            order: 16,
        }
    }
}

impl SpectralMesh {
    pub fn new(num_elements: usize, order: usize) -> Result<Self> {
        let m = Self {
            num_elements,
            order,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_elements == 0 {
            return Err(invalid("num_elements", "need at least one element"));
        }
        if self.order < 4 {
            return Err(invalid("order", format!("must be at least 4, got {}", self.order)));
        }
        Ok(())
    }

    /// `num_elements * order + 1`.
    pub fn num_nodes(&self) -> usize {
        self.num_elements * self.order + 1
    }

    /// Global nodes on `[t0, t1]`, ascending, element ends shared.
    pub fn nodes(&self, t0: f64, t1: f64) -> Vec<f64> {
        let x = cgl_nodes(self.order);
        let h = (t1 - t0) / self.num_elements as f64;
        let mut out = Vec::with_capacity(self.num_nodes());
        out.push(t0);
        for e in 0..self.num_elements {
            let a = t0 + e as f64 * h;
            for xi in &x[1..] {
                out.push(a + 0.5 * (xi + 1.0) * h);
            }
        }
        *out.last_mut().unwrap() = t1;
        out
    }

    /// Element index and reference coordinate in `[-1, 1]` of `t` in `[t0, t1]`.
    pub fn locate(&self, t: f64, t0: f64, t1: f64) -> (usize, f64) {
        let h = (t1 - t0) / self.num_elements as f64;
        let u = (t - t0) / h;
        let e = (u.floor().max(0.0) as usize).min(self.num_elements - 1);
        let x = 2.0 * (u - e as f64) - 1.0;
        (e, x.clamp(-1.0, 1.0))
    }

    /// Interpolation weights of `t` against the global nodes on `[t0, t1]`,
    /// as `(first global node, weights for order + 1 consecutive nodes)`.
    pub fn interpolation_row(&self, t: f64, t0: f64, t1: f64) -> (usize, Vec<f64>) {
        let (e, x) = self.locate(t, t0, t1);
        let nodes = cgl_nodes(self.order);
        let w = barycentric_weights(self.order);
        (e * self.order, lagrange_row(x, &nodes, &w))
    }

    /// Like [`SpectralMesh::interpolation_row`] for the time derivative.
    pub fn derivative_row(&self, t: f64, t0: f64, t1: f64) -> (usize, Vec<f64>) {
        let (e, x) = self.locate(t, t0, t1);
        let nodes = cgl_nodes(self.order);
        let w = barycentric_weights(self.order);
        let scale = 2.0 * self.num_elements as f64 / (t1 - t0);
        let row = lagrange_derivative_row(x, &nodes, &w)
            .into_iter()
            .map(|v| v * scale)
            .collect();
        (e * self.order, row)
    }
}

/// Derivative of the Lagrange basis at `x`. The entry of the nearest node
/// is the negative sum of the others, which avoids cancellation near nodes.
pub fn lagrange_derivative_row(x: f64, nodes: &[f64], weights: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let k = (0..n)
        .min_by(|&a, &b| (x - nodes[a]).abs().total_cmp(&(x - nodes[b]).abs()))
        .expect("nonempty nodes");
    if (x - nodes[k]).abs() <= 1e-13 {
        let mut row = vec![0.0; n];
        let mut diag = 0.0;
        for j in 0..n {
            if j != k {
                row[j] = weights[j] / weights[k] / (nodes[k] - nodes[j]);
                diag -= row[j];
            }
        }
        row[k] = diag;
        return row;
    }
    let inv: Vec<f64> = nodes.iter().map(|xj| 1.0 / (x - xj)).collect();
    let s: f64 = weights.iter().zip(&inv).map(|(w, i)| w * i).sum();
    let ds: f64 = -weights.iter().zip(&inv).map(|(w, i)| w * i * i).sum::<f64>();
    let mut row = vec![0.0; n];
    let mut rest = 0.0;
    for j in 0..n {
        if j != k {
            let l = weights[j] * inv[j] / s;
            row[j] = l * (-inv[j] - ds / s);
            rest += row[j];
        }
    }
    row[k] = -rest;
    row
}

/// Chebyshev–Gauss–Lobatto points `-cos(pi j / n)`, ascending on `[-1, 1]`.
pub fn cgl_nodes(n: usize) -> Vec<f64> {
    let mut x: Vec<f64> = (0..=n).map(|j| -(PI * j as f64 / n as f64).cos()).collect();
    x[0] = -1.0;
    x[n] = 1.0;
    // Exact symmetry removes rounding drift in the middle node.
    for j in 0..=n / 2 {
        let v = 0.5 * (x[n - j] - x[j]);
        x[j] = -v;
        x[n - j] = v;
    }
    x
}

/// Barycentric weights of the CGL points: `(-1)^j`, halved at both ends.
pub fn barycentric_weights(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                0.5 * s
            } else {
                s
            }
        })
        .collect()
}

/// Differentiation matrix on the reference CGL points, built from the
/// barycentric formula with the negative-sum trick on the diagonal.
pub fn differentiation_matrix(n: usize) -> Matrix {
    let x = cgl_nodes(n);
    let w = barycentric_weights(n);
    let mut d = Matrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        let mut diag = 0.0;
        for j in 0..=n {
            if i != j {
                let v = w[j] / w[i] / (x[i] - x[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    d
}

/// Clenshaw–Curtis quadrature weights on the reference CGL points.
pub fn clenshaw_curtis_weights(n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    for (j, wj) in w.iter_mut().enumerate() {
        let theta = PI * j as f64 / n as f64;
        let mut s = 0.0;
        for k in 1..=n / 2 {
            let b = if 2 * k == n { 1.0 } else { 2.0 };
            s += b / (4.0 * (k * k) as f64 - 1.0) * (2.0 * k as f64 * theta).cos();
        }
        let c = if j == 0 || j == n { 1.0 } else { 2.0 };
        *wj = c / n as f64 * (1.0 - s);
    }
    w
}

/// Lagrange basis values at `x` via the second barycentric formula.
pub fn lagrange_row(x: f64, nodes: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut row = vec![0.0; nodes.len()];
    for (j, &xj) in nodes.iter().enumerate() {
        if (x - xj).abs() <= 1e-14 {
            row[j] = 1.0;
            return row;
        }
    }
    let mut den = 0.0;
    for j in 0..nodes.len() {
        let v = weights[j] / (x - nodes[j]);
        row[j] = v;
        den += v;
    }
    for v in row.iter_mut() {
        *v /= den;
    }
    row
}
