//! Information criteria and the two-stage tuning search: `λ₁` by BIC with
//! `λ₀ = 0`, then `λ₀` by EBIC with `λ₁` held at its selected value.

use alloc::vec::Vec;

use crate::error::{SelectError, SolverError};
use crate::glm::{Coefficients, FitProblem};
use crate::math;
use crate::optim::{self, FitResult, SolverConfig};

pub const DEFAULT_RHO: f64 = 0.5;
pub const DEFAULT_XI_ZERO_TOL: f64 = 1e-8;
pub const DEFAULT_GRID_LEN: usize = 10;

/// Slacks above `tol`.
pub fn count_nonzero(xi: &[f64], tol: f64) -> usize {
    xi.iter().filter(|&&x| x > tol).count()
}

/// Degrees of freedom entering the criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DfBreakdown {
    pub xi: usize,
    pub gamma_star: usize,
    pub theta: usize,
    /// `dim(γ*) + dim(θ) + n` (without the slack block for the baseline).
    pub n_params: usize,
}

impl DfBreakdown {
    pub fn of(problem: &FitProblem, c: &Coefficients, xi_zero_tol: f64) -> Self {
        Self {
            xi: count_nonzero(c.xi(), xi_zero_tol),
            gamma_star: problem.design().n_gamma(),
            theta: problem.design().n_theta(),
            n_params: problem.n_params(),
        }
    }

    pub fn total(&self) -> usize {
        self.xi + self.gamma_star + self.theta
    }
}

/// `−2ℓ + log(N)·df(ξ̂)`
pub fn bic(problem: &FitProblem, c: &Coefficients, xi_zero_tol: f64) -> f64 {
    let n_cells = problem.design().n_cells() as f64;
    -2.0 * problem.log_likelihood(c) + math::ln(n_cells) * count_nonzero(c.xi(), xi_zero_tol) as f64
}

/// `2ρ log C(P, df)` after checking `df ≤ P`.
pub fn ebic_combinatorial(n_params: usize, df: usize, rho: f64) -> Result<f64, SelectError> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(SelectError::InvalidRho);
    }
    if df > n_params {
        return Err(SelectError::DfExceedsParameters { df, params: n_params });
    }
    Ok(2.0 * rho * math::ln_binomial(n_params as f64, df as f64))
}

/// `−2ℓ + log(N)·df_total + 2ρ log C(P, df_total)`
pub fn ebic(problem: &FitProblem, c: &Coefficients, rho: f64, xi_zero_tol: f64) -> Result<f64, SelectError> {
    let df = DfBreakdown::of(problem, c, xi_zero_tol);
    let n_cells = problem.design().n_cells() as f64;
    let comb = ebic_combinatorial(df.n_params, df.total(), rho)?;
    Ok(-2.0 * problem.log_likelihood(c) + math::ln(n_cells) * df.total() as f64 + comb)
}

/// `k` log-spaced values from `lo` to `hi`, ascending.
pub fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => {
            let (a, b) = (math::ln(lo), math::ln(hi));
            (0..k).map(|j| math::exp(a + (b - a) * j as f64 / (k - 1) as f64)).collect()
        }
    }
}

/// Median over locations of `|∂f/∂ξ_i|` at the zero point, i.e. of
/// `|Σ_s (1 − Y_is)| / σ²`.
pub fn slack_gradient_scale(problem: &FitProblem) -> f64 {
    let w = problem.design().window_len();
    let mut g: Vec<f64> = problem
        .counts()
        .chunks(w)
        .map(|ys| (ys.iter().map(|y| 1.0 - y).sum::<f64>() / problem.sigma2).abs())
        .collect();
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = if g.is_empty() {
        0.0
    } else if g.len() % 2 == 1 {
        g[g.len() / 2]
    } else {
        0.5 * (g[g.len() / 2 - 1] + g[g.len() / 2])
    };
    if m > 0.0 { m } else { 1.0 }
}

pub fn default_lambda1_grid(problem: &FitProblem) -> Vec<f64> {
    let m = slack_gradient_scale(problem);
    log_grid(1e-3 * m, 1e2 * m, DEFAULT_GRID_LEN)
}

pub fn default_lambda0_grid() -> Vec<f64> {
    log_grid(1e-4, 1e4, DEFAULT_GRID_LEN)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SelectConfig {
    /// `None` uses the data-scaled default.
    pub lambda1_grid: Option<Vec<f64>>,
    pub lambda0_grid: Option<Vec<f64>>,
    pub rho: f64,
    pub xi_zero_tol: f64,
    /// Carry coefficients from one candidate to the next.
    pub warm_start: bool,
    pub solver: SolverConfig,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            lambda1_grid: None,
            lambda0_grid: None,
            rho: DEFAULT_RHO,
            xi_zero_tol: DEFAULT_XI_ZERO_TOL,
            warm_start: true,
            solver: SolverConfig::default(),
        }
    }
}

/// One grid point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Candidate {
    pub lambda: f64,
    /// `None` when the fit failed.
    pub criterion: Option<f64>,
    pub df: Option<DfBreakdown>,
    pub converged: bool,
    pub iterations: usize,
    pub kkt: f64,
}

#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub lambda1_star: f64,
    pub lambda0_star: f64,
    pub bic_table: Vec<Candidate>,
    pub ebic_table: Vec<Candidate>,
    pub df: DfBreakdown,
    /// Fit at `(λ₀*, λ₁*)`.
    pub fit: FitResult,
}

/// Outcome of a one-dimensional sweep.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub best_lambda: f64,
    pub table: Vec<Candidate>,
    pub fit: FitResult,
    pub df: DfBreakdown,
}

/// Fits every candidate produced by `make` in descending order of `λ` and keeps
/// the criterion minimizer; ties go to the larger `λ`.
fn sweep<M, C>(
    grid: &[f64],
    cfg: &SelectConfig,
    init: Option<&Coefficients>,
    make: M,
    criterion: C,
) -> Result<SweepResult, SelectError>
where
    M: Fn(f64) -> FitProblem,
    C: Fn(&FitProblem, &Coefficients) -> Result<f64, SelectError>,
{
    if grid.is_empty() {
        return Err(SelectError::EmptyGrid);
    }
    let mut order: Vec<usize> = (0..grid.len()).collect();
    // stable: equal values keep their original order
    order.sort_by(|&a, &b| grid[b].partial_cmp(&grid[a]).unwrap_or(core::cmp::Ordering::Equal));
    let mut table: Vec<Option<Candidate>> = alloc::vec![None; grid.len()];
    let mut best: Option<(f64, usize, FitResult, DfBreakdown)> = None;
    let mut last_err: Option<SolverError> = None;
    let mut warm: Option<Coefficients> = init.cloned();
    for &j in &order {
        let lambda = grid[j];
        let problem = make(lambda);
        let start = match (&warm, cfg.warm_start) {
            (Some(w), true) if w.len() == problem.n_params() => w.clone(),
            _ => match init {
                Some(c) if c.len() == problem.n_params() => c.clone(),
                _ => problem.zero_coefficients(),
            },
        };
        let cand = match optim::solve(&problem, &start, &cfg.solver) {
            Ok((fit, _)) => {
                let df = DfBreakdown::of(&problem, &fit.coefficients, cfg.xi_zero_tol);
                let value = criterion(&problem, &fit.coefficients)?;
                let cand = Candidate {
                    lambda,
                    criterion: value.is_finite().then_some(value),
                    df: Some(df),
                    converged: fit.converged,
                    iterations: fit.iterations,
                    kkt: fit.kkt,
                };
                if value.is_finite() && best.as_ref().is_none_or(|b| value < b.0) {
                    best = Some((value, j, fit.clone(), df));
                }
                warm = Some(fit.coefficients);
                cand
            }
            Err(e) => {
                log::warn!("fit at lambda {lambda} failed: {e}");
                last_err = Some(e);
                Candidate { lambda, criterion: None, df: None, converged: false, iterations: 0, kkt: f64::NAN }
            }
        };
        table[j] = Some(cand);
    }
    let table: Vec<Candidate> = table.into_iter().map(|c| c.expect("every candidate visited")).collect();
    match best {
        Some((_, j, fit, df)) => Ok(SweepResult { best_lambda: grid[j], table, fit, df }),
        None => Err(SelectError::AllCandidatesFailed(
            last_err.unwrap_or(SolverError::InvalidConfig("no finite criterion value")),
        )),
    }
}

/// Stage one: `λ₀ = 0`, BIC over the `λ₁` grid.
pub fn select_lambda1(
    base: &FitProblem,
    grid: &[f64],
    cfg: &SelectConfig,
    init: Option<&Coefficients>,
) -> Result<SweepResult, SelectError> {
    select_lambda1_at(base, 0.0, grid, cfg, init)
}

/// BIC over the `λ₁` grid at a fixed `λ₀`.
pub fn select_lambda1_at(
    base: &FitProblem,
    lambda0: f64,
    grid: &[f64],
    cfg: &SelectConfig,
    init: Option<&Coefficients>,
) -> Result<SweepResult, SelectError> {
    let tol = cfg.xi_zero_tol;
    sweep(grid, cfg, init, |l1| base.clone().with_lambdas(lambda0, l1), |p, c| Ok(bic(p, c, tol)))
}

/// Stage two: fixed `λ₁`, EBIC over the `λ₀` grid.
pub fn select_lambda0(
    base: &FitProblem,
    lambda1: f64,
    grid: &[f64],
    cfg: &SelectConfig,
    init: Option<&Coefficients>,
) -> Result<SweepResult, SelectError> {
    let (rho, tol) = (cfg.rho, cfg.xi_zero_tol);
    sweep(grid, cfg, init, |l0| base.clone().with_lambdas(l0, lambda1), |p, c| ebic(p, c, rho, tol))
}

/// Full two-stage search on `base` (its weights are used in both stages).
pub fn select_two_stage(base: &FitProblem, cfg: &SelectConfig) -> Result<SelectionResult, SelectError> {
    if !(0.0..=1.0).contains(&cfg.rho) {
        return Err(SelectError::InvalidRho);
    }
    let g1 = cfg.lambda1_grid.clone().unwrap_or_else(|| default_lambda1_grid(base));
    let g0 = cfg.lambda0_grid.clone().unwrap_or_else(default_lambda0_grid);
    let s1 = select_lambda1(base, &g1, cfg, None)?;
    let init = cfg.warm_start.then_some(&s1.fit.coefficients);
    let s2 = select_lambda0(base, s1.best_lambda, &g0, cfg, init)?;
    Ok(SelectionResult {
        lambda1_star: s1.best_lambda,
        lambda0_star: s2.best_lambda,
        bic_table: s1.table,
        ebic_table: s2.table,
        df: s2.df,
        fit: s2.fit,
    })
}
