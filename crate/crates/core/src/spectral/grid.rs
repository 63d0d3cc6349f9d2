use std::io::{self, BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mesh::SpectralMesh;
use super::monodromy::{build_monodromy_with, classify, Stability, MARGINAL_TOL, TRIVIAL_TOL};
use crate::error::{invalid, Error, Result};
use crate::export::{write_heatmap, Pixel};
use crate::model::{EquilibriumKind, ModelParams};

/// Settings shared by every cell of a stability sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityOptions {
    pub mesh: SpectralMesh,
    pub marg_tol: f64,
    pub trivial_tol: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            mesh: SpectralMesh::default(),
            marg_tol: MARGINAL_TOL,
            trivial_tol: TRIVIAL_TOL,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Stable,
    Unstable,
    Marginal,
    /// The requested equilibrium does not exist here.
    Absent,
    /// Equilibria, assembly or eigenvalues failed in this cell.
    Failed,
}

impl CellStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Stable => "stable",
            Self::Unstable => "unstable",
            Self::Marginal => "marginal",
            Self::Absent => "absent",
            Self::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "stable" => Self::Stable,
            "unstable" => Self::Unstable,
            "marginal" => Self::Marginal,
            "absent" => Self::Absent,
            "failed" => Self::Failed,
            _ => return None,
        })
    }

    /// A verdict was computed for this cell.
    pub fn is_present(self) -> bool {
        matches!(self, Self::Stable | Self::Unstable | Self::Marginal)
    }
}

impl From<Stability> for CellStatus {
    fn from(s: Stability) -> Self {
        match s {
            Stability::Stable => Self::Stable,
            Stability::Unstable => Self::Unstable,
            Stability::Marginal => Self::Marginal,
        }
    }
}

/// Result for one `(tau, R_T)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityCell {
    pub tau: f64,
    pub total_resource: f64,
    /// Dominant nontrivial multiplier, when the equilibrium exists.
    pub dominant: Option<Complex64>,
    /// Number of equilibria found, the trivial one included.
    pub n_equilibria: usize,
    pub status: CellStatus,
    /// The equilibrium search flagged a possibly missing root.
    pub incomplete: bool,
    pub error: Option<String>,
}

impl StabilityCell {
    pub fn modulus(&self) -> Option<f64> {
        self.dominant.map(|z| z.norm())
    }
}

/// A sweep over `taus x total_resources`, stored row-major with `tau` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityGrid {
    pub taus: Vec<f64>,
    pub total_resources: Vec<f64>,
    pub cells: Vec<StabilityCell>,
}

pub(crate) fn check_axis(name: &'static str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(invalid(name, "axis is empty"));
    }
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(invalid(name, "axis values must be finite and >= 0"));
    }
    if v.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid(name, "axis must be strictly increasing"));
    }
    Ok(())
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Linearises about the requested equilibrium and classifies it.
///
/// The monodromy window is the longest delay, or `1` when every delay is zero.
pub fn stability_cell(params: &ModelParams, kind: EquilibriumKind, opts: &StabilityOptions) -> StabilityCell {
    let mut cell = StabilityCell {
        tau: params.max_delay(),
        total_resource: params.total_resource(),
        dominant: None,
        n_equilibria: 0,
        status: CellStatus::Failed,
        incomplete: false,
        error: None,
    };
    let run = |cell: &mut StabilityCell| -> Result<()> {
        let set = params.equilibria()?;
        cell.n_equilibria = set.len();
        cell.incomplete = set.incomplete;
        let Some(eq) = set.get(kind) else {
            cell.status = CellStatus::Absent;
            return Ok(());
        };
        let sys = params.linearize(eq)?;
        let period = if sys.max_delay() > 0.0 { sys.max_delay() } else { 1.0 };
        let res = build_monodromy_with(&sys, period, &opts.mesh, opts.trivial_tol)?;
        let verdict = classify(&res, opts.marg_tol);
        cell.dominant = Some(verdict.dominant);
        cell.status = verdict.kind.into();
        Ok(())
    };
    if let Err(e) = run(&mut cell) {
        cell.status = CellStatus::Failed;
        cell.error = Some(e.to_string());
    }
    cell
}

/// Classifies the `kind` equilibrium over a grid of delays and total
/// resources. Every delay of `base` is set to the grid delay.
///
/// Cells run in parallel on the ambient rayon pool and are independent, so
/// the result does not depend on the number of workers.
pub fn stability_grid(
    base: &ModelParams,
    taus: &[f64],
    total_resources: &[f64],
    kind: EquilibriumKind,
    opts: &StabilityOptions,
) -> Result<StabilityGrid> {
    base.validate()?;
    opts.mesh.validate()?;
    check_axis("tau", taus)?;
    check_axis("total_resource", total_resources)?;
    let nt = taus.len();
    let cells = (0..nt * total_resources.len())
        .into_par_iter()
        .map(|idx| {
            let (tau, rt) = (taus[idx % nt], total_resources[idx / nt]);
            let mut cell = stability_cell(&base.with_delay_and_resource(tau, rt), kind, opts);
            cell.tau = tau;
            cell.total_resource = rt;
            cell
        })
        .collect();
    Ok(StabilityGrid {
        taus: taus.to_vec(),
        total_resources: total_resources.to_vec(),
        cells,
    })
}

pub const GRID_CSV_HEADER: &str = "tau,R_T,re_lambda,im_lambda,abs_lambda,n_equilibria,status";

impl StabilityGrid {
    pub fn cell(&self, i_tau: usize, j_rt: usize) -> &StabilityCell {
        &self.cells[j_rt * self.taus.len() + i_tau]
    }

    pub fn count(&self, status: CellStatus) -> usize {
        self.cells.iter().filter(|c| c.status == status).count()
    }

    pub fn incomplete_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.incomplete).count()
    }

    /// Rows `tau,R_T,re_lambda,im_lambda,abs_lambda,n_equilibria,status`;
    /// cells without a multiplier carry `NaN`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{GRID_CSV_HEADER}")?;
        for c in &self.cells {
            let z = c.dominant.unwrap_or(Complex64::new(f64::NAN, f64::NAN));
            let m = c.modulus().unwrap_or(f64::NAN);
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                c.tau,
                c.total_resource,
                z.re,
                z.im,
                m,
                c.n_equilibria,
                c.status.as_str()
            )?;
        }
        Ok(())
    }

    /// Parses the output of [`StabilityGrid::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let bad = |msg: String| Error::Configuration(msg);
        let header = lines
            .next()
            .ok_or_else(|| bad("empty grid file".into()))?
            .map_err(|e| bad(e.to_string()))?;
        if header.trim() != GRID_CSV_HEADER {
            return Err(bad(format!("unexpected grid header `{}`", header.trim())));
        }
        let mut cells = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 7 {
                return Err(bad(format!("line {}: expected 7 fields", n + 2)));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("line {}: bad number `{s}`", n + 2)))
            };
            let status = CellStatus::parse(f[6])
                .ok_or_else(|| bad(format!("line {}: bad status `{}`", n + 2, f[6])))?;
            let (re, im) = (num(f[2])?, num(f[3])?);
            cells.push(StabilityCell {
                tau: num(f[0])?,
                total_resource: num(f[1])?,
                dominant: (!re.is_nan()).then(|| Complex64::new(re, im)),
                n_equilibria: f[5]
                    .parse()
                    .map_err(|_| bad(format!("line {}: bad count", n + 2)))?,
                status,
                incomplete: false,
                error: None,
            });
        }
        let mut taus: Vec<f64> = Vec::new();
        for c in &cells {
            if taus.contains(&c.tau) {
                break;
            }
            taus.push(c.tau);
        }
        let nt = taus.len();
        if nt == 0 || cells.len() % nt != 0 {
            return Err(bad("grid rows do not form a rectangle".into()));
        }
        let rts: Vec<f64> = cells.iter().step_by(nt).map(|c| c.total_resource).collect();
        for (idx, c) in cells.iter().enumerate() {
            if c.tau != taus[idx % nt] || c.total_resource != rts[idx / nt] {
                return Err(bad(format!("grid row {} out of order", idx + 2)));
            }
        }
        Ok(Self {
            taus,
            total_resources: rts,
            cells,
        })
    }

    /// Heatmap of `|lambda|` over `[0, 2]`; absent cells are white.
    pub fn write_ppm<W: Write>(&self, w: W, scale: usize) -> io::Result<()> {
        let px: Vec<Pixel> = self
            .cells
            .iter()
            .map(|c| match (c.status, c.modulus()) {
                (CellStatus::Absent, _) => Pixel::Absent,
                (_, Some(m)) => Pixel::Value(m),
                _ => Pixel::Failed,
            })
            .collect();
        write_heatmap(w, &px, self.taus.len(), self.total_resources.len(), 0.0, 2.0, scale)
    }
}
