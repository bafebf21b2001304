//! Output artifacts: traces, selection reports, coefficients and plot-ready grids.

use std::path::Path;

use rstgam_core::glm::{Coefficients, WindowDesign};
use rstgam_core::optim::{FitResult, SolverTrace};
use rstgam_core::robust::AdaptiveWeights;
use rstgam_core::select::{Candidate, DfBreakdown, SelectionResult, SweepResult};
use serde::Serialize;

use crate::error::FormatError;

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| FormatError::io(path, e))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| FormatError::io(path, e))
}

/// Writes rows under an explicit header (for rows whose width depends on the data).
pub fn write_records(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| FormatError::io(path, e))
}

#[derive(Debug, Serialize)]
struct TraceRecord {
    iter: usize,
    #[serde(rename = "F")]
    f: f64,
    eta: f64,
    #[serde(rename = "L")]
    l: f64,
    kkt: f64,
}

/// `iter,F,eta,L,kkt`
pub fn write_trace(path: &Path, trace: &SolverTrace) -> Result<(), FormatError> {
    write_csv(
        path,
        trace.rows.iter().map(|r| TraceRecord { iter: r.iter, f: r.objective, eta: r.eta, l: r.lipschitz, kkt: r.kkt }),
    )
}

#[derive(Debug, Serialize)]
pub struct PilotReport {
    pub folds: usize,
    pub thin_seed: u64,
    pub lambda1: Vec<f64>,
    pub epsilon: f64,
    pub gamma_exp: f64,
}

impl PilotReport {
    pub fn new(w: &AdaptiveWeights, folds: usize, thin_seed: u64) -> Self {
        Self { folds, thin_seed, lambda1: w.pilot_lambda1.clone(), epsilon: w.epsilon, gamma_exp: w.gamma_exp }
    }
}

/// Grids, criterion tables, chosen values and df breakdown.
#[derive(Debug, Serialize)]
pub struct SelectionReport {
    pub method: &'static str,
    pub rho: f64,
    pub lambda1_grid: Vec<f64>,
    pub lambda0_grid: Vec<f64>,
    pub bic_table: Vec<Candidate>,
    pub ebic_table: Vec<Candidate>,
    pub lambda1_star: f64,
    pub lambda0_star: f64,
    pub df: DfBreakdown,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pilot: Option<PilotReport>,
}

impl SelectionReport {
    pub fn robust(sel: &SelectionResult, rho: f64, pilot: PilotReport) -> Self {
        Self {
            method: "RST-GAM",
            rho,
            lambda1_grid: sel.bic_table.iter().map(|c| c.lambda).collect(),
            lambda0_grid: sel.ebic_table.iter().map(|c| c.lambda).collect(),
            bic_table: sel.bic_table.clone(),
            ebic_table: sel.ebic_table.clone(),
            lambda1_star: sel.lambda1_star,
            lambda0_star: sel.lambda0_star,
            df: sel.df,
            pilot: Some(pilot),
        }
    }

    pub fn baseline(sweep: &SweepResult, rho: f64) -> Self {
        Self {
            method: "NST-GAM",
            rho,
            lambda1_grid: Vec::new(),
            lambda0_grid: sweep.table.iter().map(|c| c.lambda).collect(),
            bic_table: Vec::new(),
            ebic_table: sweep.table.clone(),
            lambda1_star: 0.0,
            lambda0_star: sweep.best_lambda,
            df: sweep.df,
            pilot: None,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct UnivariateReport {
    pub name: String,
    pub order: usize,
    pub knots: Vec<f64>,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    pub theta: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct CoefficientsReport {
    pub method: &'static str,
    pub lambda0: f64,
    pub lambda1: f64,
    pub window_start: usize,
    pub window_len: usize,
    pub degree: u32,
    pub smoothness: u32,
    pub gamma_star: Vec<f64>,
    /// Full Bézier coefficients `Q₂γ*`.
    pub gamma: Vec<f64>,
    pub univariate: Vec<UnivariateReport>,
    pub xi: Vec<f64>,
    pub weights: Vec<f64>,
    pub objective: f64,
    pub kkt: f64,
    pub iterations: usize,
    pub converged: bool,
    pub cap_hits: usize,
}

impl CoefficientsReport {
    pub fn new(
        method: &'static str,
        design: &WindowDesign,
        fit: &FitResult,
        lambdas: (f64, f64),
        weights: &[f64],
        covariate_names: &[String],
    ) -> Self {
        let c = &fit.coefficients;
        let spatial = design.spatial();
        let univariate = design
            .univariate_bases()
            .iter()
            .enumerate()
            .map(|(k, b)| UnivariateReport {
                name: covariate_names.get(k).cloned().unwrap_or_else(|| format!("cov{}", k + 1)),
                order: b.order(),
                knots: b.knots().to_vec(),
                center: b.center().to_vec(),
                scale: b.scale().to_vec(),
                theta: c.theta()[design.theta_range(k)].to_vec(),
            })
            .collect();
        Self {
            method,
            lambda0: lambdas.0,
            lambda1: lambdas.1,
            window_start: design.start(),
            window_len: design.window_len(),
            degree: spatial.basis.degree(),
            smoothness: spatial.basis.smoothness(),
            gamma_star: c.gamma_star().to_vec(),
            gamma: spatial.constraints.expand(c.gamma_star()),
            univariate,
            xi: c.xi().to_vec(),
            weights: weights.to_vec(),
            objective: fit.objective,
            kkt: fit.kkt,
            iterations: fit.iterations,
            converged: fit.converged,
            cap_hits: fit.cap_hits,
        }
    }
}

#[derive(Debug, Serialize)]
struct Flagged<'a> {
    loc_id: &'a str,
    xi_hat: f64,
}

/// `loc_id,xi_hat` for every location with `ξ̂ > tol`.
pub fn write_flagged(path: &Path, ids: &[String], xi: &[f64], tol: f64) -> Result<usize, FormatError> {
    let rows: Vec<Flagged> =
        ids.iter().zip(xi).filter(|(_, &x)| x > tol).map(|(id, &x)| Flagged { loc_id: id, xi_hat: x }).collect();
    let n = rows.len();
    if rows.is_empty() {
        // header only
        std::fs::write(path, "loc_id,xi_hat\n").map_err(|e| FormatError::io(path, e))?;
    } else {
        write_csv(path, rows)?;
    }
    Ok(n)
}

#[derive(Debug, Serialize)]
struct SurfacePoint {
    x: f64,
    y: f64,
    beta: f64,
}

/// `β̂` on a regular `grid × grid` lattice over the mesh bounding box, points inside the mesh only.
pub fn write_surface(path: &Path, design: &WindowDesign, c: &Coefficients, grid: usize) -> Result<(), FormatError> {
    let spatial = design.spatial();
    let (lo, hi) = spatial.basis.mesh().bounding_box();
    let gamma = spatial.constraints.expand(c.gamma_star());
    let step = |a: f64, b: f64, j: usize| if grid > 1 { a + (b - a) * j as f64 / (grid - 1) as f64 } else { 0.5 * (a + b) };
    let mut rows = Vec::new();
    for jy in 0..grid {
        for jx in 0..grid {
            let u = [step(lo[0], hi[0], jx), step(lo[1], hi[1], jy)];
            if let Ok(beta) = spatial.basis.evaluate(&gamma, u) {
                rows.push(SurfacePoint { x: u[0], y: u[1], beta });
            }
        }
    }
    write_csv(path, rows)
}

#[derive(Debug, Serialize)]
struct AlphaPoint {
    x: f64,
    alpha: f64,
}

/// `x, α̂_k(x)` at `points` equally spaced values over the covariate range; one file per covariate.
pub fn write_alphas(dir: &Path, design: &WindowDesign, c: &Coefficients, points: usize) -> Result<(), FormatError> {
    for (k, b) in design.univariate_bases().iter().enumerate() {
        let (a, z) = b.range();
        let rows = (0..points).map(|j| {
            let x = if points > 1 { a + (z - a) * j as f64 / (points - 1) as f64 } else { a };
            AlphaPoint { x, alpha: design.alpha(k, c.theta(), x) }
        });
        write_csv(&dir.join(format!("alpha_{}.csv", k + 1)), rows)?;
    }
    Ok(())
}
