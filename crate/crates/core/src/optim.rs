//! Proximal gradient descent with the line-search-free adaptive step size,
//! optional restarted momentum, and a KKT-residual stopping rule.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::SolverError;
use crate::glm::{Coefficients, FitProblem, SmoothEval};
use crate::linalg::{Cholesky, Matrix};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Acceleration {
    #[default]
    Off,
    /// Nesterov extrapolation, reset whenever the objective goes up.
    RestartMomentum,
}

/// Fixed linear change of variables the iteration runs in. The metric is
/// block diagonal with a diagonal slack block, so the prox stays a
/// coordinatewise soft-threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Preconditioner {
    /// Plain Euclidean iteration.
    Identity,
    /// Diagonal of an estimated Hessian.
    Jacobi,
    /// Dense estimated Hessian blocks for `γ*` and `θ`, diagonal for `ξ`.
    #[default]
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverConfig {
    /// Initial step; `None` estimates it from a tiny gradient probe.
    pub eta0: Option<f64>,
    pub upsilon0: f64,
    pub max_iters: usize,
    pub kkt_tol: f64,
    pub accel: Acceleration,
    pub precondition: Preconditioner,
    /// Gradient-step length used by the `η₀` probe.
    pub probe_delta: f64,
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eta0: None,
            upsilon0: 1.0 / 3.0,
            max_iters: 5000,
            kkt_tol: 1e-6,
            accel: Acceleration::Off,
            precondition: Preconditioner::Block,
            probe_delta: 1e-6,
            record_trace: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if let Some(e) = self.eta0 {
            if !(e > 0.0 && e.is_finite()) {
                return Err(SolverError::InvalidConfig("eta0 must be positive"));
            }
        }
        if !(self.kkt_tol > 0.0) {
            return Err(SolverError::InvalidConfig("kkt_tol must be positive"));
        }
        if !(self.upsilon0 >= 0.0 && self.upsilon0.is_finite()) {
            return Err(SolverError::InvalidConfig("upsilon0 must be nonnegative"));
        }
        if !(self.probe_delta > 0.0) {
            return Err(SolverError::InvalidConfig("probe_delta must be positive"));
        }
        Ok(())
    }
}

/// One checkpoint of the solver history.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRow {
    pub iter: usize,
    /// `F = f + g` at the iterate.
    pub objective: f64,
    pub eta: f64,
    pub lipschitz: f64,
    pub running_min: f64,
    pub kkt: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverTrace {
    pub rows: Vec<TraceRow>,
}

impl SolverTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Running minimum of `F` after `iter` steps, if recorded.
    pub fn running_min_at(&self, iter: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.iter == iter).map(|r| r.running_min)
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub coefficients: Coefficients,
    /// `F = f + g` at the returned iterate.
    pub objective: f64,
    pub smooth_value: f64,
    pub kkt: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Cells above the linear-predictor cap at the returned iterate.
    pub cap_hits: usize,
    pub max_cap_hits: usize,
}

/// `[ξ_i − η λ₁ w_i]_+`, the prox of `η g` on the slack block.
pub fn prox_g(xi: &[f64], eta: f64, lambda1: f64, w: &[f64]) -> Vec<f64> {
    xi.iter().zip(w).map(|(&x, &wi)| (x - eta * lambda1 * wi).max(0.0)).collect()
}

fn prox_in_place(xi: &mut [f64], eta: f64, lambda1: f64, w: &[f64]) {
    for (x, &wi) in xi.iter_mut().zip(w) {
        *x = (*x - eta * lambda1 * wi).max(0.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEstimate {
    pub eta: f64,
    pub upsilon: f64,
    pub lipschitz: f64,
    /// Set when the two points coincided and the previous step was kept.
    pub degenerate: bool,
}

/// Step-size update from the local Lipschitz estimate between two iterates.
pub fn adaptive_step(
    eta_prev: f64,
    upsilon_prev: f64,
    grad_now: &[f64],
    grad_prev: &[f64],
    z_now: &[f64],
    z_prev: &[f64],
) -> StepEstimate {
    let dz = math::dist2(z_now, z_prev);
    if dz == 0.0 {
        log::warn!("adaptive step: zero displacement, keeping previous step size");
        return StepEstimate { eta: eta_prev, upsilon: upsilon_prev, lipschitz: 0.0, degenerate: true };
    }
    let lipschitz = math::dist2(grad_now, grad_prev) / dz;
    let eta = step_from_lipschitz(eta_prev, upsilon_prev, lipschitz);
    StepEstimate { eta, upsilon: eta / eta_prev, lipschitz, degenerate: false }
}

/// `min{√(2/3 + υ) η, η / √[2η²L² − 1]_+}`
pub fn step_from_lipschitz(eta_prev: f64, upsilon_prev: f64, lipschitz: f64) -> f64 {
    let grow = math::sqrt(2.0 / 3.0 + upsilon_prev) * eta_prev;
    let bracket = 2.0 * eta_prev * eta_prev * lipschitz * lipschitz - 1.0;
    if bracket > 0.0 {
        grow.min(eta_prev / math::sqrt(bracket))
    } else {
        grow
    }
}

/// KKT residual given a precomputed gradient.
pub fn kkt_from_gradient(problem: &FitProblem, c: &Coefficients, grad: &Coefficients) -> f64 {
    let mut r = math::norm_inf(grad.gamma_star()).max(math::norm_inf(grad.theta()));
    if problem.has_slack() {
        let l1 = problem.lambda1;
        for ((&x, &g), &w) in c.xi().iter().zip(grad.xi()).zip(problem.weights()) {
            let v = if x > 0.0 { (g + l1 * w).abs() } else { (-g - l1 * w).max(0.0) };
            r = r.max(v).max((-x).max(0.0));
        }
    }
    r
}

/// Largest violation of the first-order optimality conditions at `c`.
pub fn kkt_residual(problem: &FitProblem, c: &Coefficients) -> f64 {
    kkt_from_gradient(problem, c, &problem.eval(c).grad)
}

fn checked_eval(problem: &FitProblem, c: &Coefficients, iteration: usize) -> Result<SmoothEval, SolverError> {
    let e = problem.eval(c);
    if !e.value.is_finite() || e.grad.as_slice().iter().any(|g| !g.is_finite()) {
        return Err(SolverError::NonFinite { iteration, cap_hits: e.cap_hits });
    }
    Ok(e)
}

/// Relative ridge added to the dense blocks before factorization.
const BLOCK_JITTER: f64 = 1e-8;

enum BlockMetric {
    Diag { d: Vec<f64>, sqrt_d: Vec<f64> },
    Dense(Cholesky),
}

impl BlockMetric {
    fn diag(d: Vec<f64>) -> Self {
        let max = d.iter().fold(0.0f64, |a, &b| a.max(b));
        let d: Vec<f64> = d.into_iter().map(|v| if v > 1e-12 * max { v } else { 1.0 }).collect();
        let sqrt_d = d.iter().map(|&v| math::sqrt(v)).collect();
        Self::Diag { d, sqrt_d }
    }

    fn diagonal_of(m: &Matrix) -> Vec<f64> {
        (0..m.rows()).map(|i| m[(i, i)]).collect()
    }

    /// `Rz` with `M = RᵀR`
    fn primal(&self, z: &[f64], out: &mut Vec<f64>) {
        match self {
            Self::Diag { sqrt_d, .. } => out.extend(z.iter().zip(sqrt_d).map(|(a, s)| a * s)),
            Self::Dense(c) => out.extend(c.lt_mul(z)),
        }
    }

    /// `R⁻ᵀg`
    fn dual(&self, g: &[f64], out: &mut Vec<f64>) {
        match self {
            Self::Diag { sqrt_d, .. } => out.extend(g.iter().zip(sqrt_d).map(|(a, s)| a / s)),
            Self::Dense(c) => out.extend(c.l_solve(g)),
        }
    }

    /// `M⁻¹g`
    fn inverse(&self, g: &[f64], out: &mut Vec<f64>) {
        match self {
            Self::Diag { d, .. } => out.extend(g.iter().zip(d).map(|(a, s)| a / s)),
            Self::Dense(c) => out.extend(c.solve(g)),
        }
    }
}

/// Block-diagonal metric `M` the iteration runs in.
struct Metric {
    blocks: [BlockMetric; 3],
    splits: [usize; 2],
    /// `λ₁`-free thresholds `w_i / M_ξi` on the slack block.
    xi_weights: Vec<f64>,
}

impl Metric {
    fn new(problem: &FitProblem, kind: Preconditioner) -> Self {
        let (kb, ku, nx) = (problem.design().n_gamma(), problem.design().n_theta(), problem.n_xi());
        let blocks = match kind {
            Preconditioner::Identity => {
                [BlockMetric::diag(vec![1.0; kb]), BlockMetric::diag(vec![1.0; ku]), BlockMetric::diag(vec![1.0; nx])]
            }
            Preconditioner::Jacobi => {
                let c = problem.curvature_estimate();
                [
                    BlockMetric::diag(BlockMetric::diagonal_of(&c.gamma)),
                    BlockMetric::diag(BlockMetric::diagonal_of(&c.theta)),
                    BlockMetric::diag(c.xi),
                ]
            }
            Preconditioner::Block => {
                let c = problem.curvature_estimate();
                [
                    BlockMetric::Dense(Cholesky::factor_with_jitter(&c.gamma, BLOCK_JITTER)),
                    BlockMetric::Dense(Cholesky::factor_with_jitter(&c.theta, BLOCK_JITTER)),
                    BlockMetric::diag(c.xi),
                ]
            }
        };
        let xi_weights = match &blocks[2] {
            BlockMetric::Diag { d, .. } => problem.weights().iter().zip(d).map(|(w, di)| w / di).collect(),
            BlockMetric::Dense(_) => unreachable!("slack block is diagonal"),
        };
        Self { blocks, splits: [kb, kb + ku], xi_weights }
    }

    fn apply(&self, v: &[f64], f: impl Fn(&BlockMetric, &[f64], &mut Vec<f64>)) -> Vec<f64> {
        let [a, b] = self.splits;
        let mut out = Vec::with_capacity(v.len());
        f(&self.blocks[0], &v[..a], &mut out);
        f(&self.blocks[1], &v[a..b], &mut out);
        f(&self.blocks[2], &v[b..], &mut out);
        out
    }

    fn primal(&self, z: &[f64]) -> Vec<f64> {
        self.apply(z, BlockMetric::primal)
    }

    fn dual(&self, g: &[f64]) -> Vec<f64> {
        self.apply(g, BlockMetric::dual)
    }

    fn inverse(&self, g: &[f64]) -> Vec<f64> {
        self.apply(g, BlockMetric::inverse)
    }
}

/// `prox_{ηg}(y − η M⁻¹∇f(y))` in the metric `M`.
fn forward_backward(problem: &FitProblem, metric: &Metric, y: &Coefficients, grad: &Coefficients, eta: f64) -> Coefficients {
    let step = metric.inverse(grad.as_slice());
    let data = y.as_slice().iter().zip(&step).map(|(a, g)| a - eta * g).collect();
    let mut z = y.with_data(data);
    if problem.has_slack() {
        prox_in_place(z.xi_mut(), eta, problem.lambda1, &metric.xi_weights);
    }
    z
}

struct Best {
    z: Coefficients,
    objective: f64,
    smooth: f64,
    kkt: f64,
    cap_hits: usize,
}

/// Minimizes `f + g` starting from a feasible `init`.
pub fn solve(
    problem: &FitProblem,
    init: &Coefficients,
    cfg: &SolverConfig,
) -> Result<(FitResult, SolverTrace), SolverError> {
    cfg.validate()?;
    if init.len() != problem.n_params() {
        return Err(SolverError::InvalidConfig("initial point has the wrong dimension"));
    }
    if init.xi().iter().any(|&x| !(x >= 0.0)) {
        return Err(SolverError::InfeasibleInit);
    }
    let mut trace = SolverTrace::default();
    let mut z = init.clone();
    let ez = checked_eval(problem, &z, 0)?;
    let mut fz = ez.value + problem.objective_g(&z);
    let kkt = kkt_from_gradient(problem, &z, &ez.grad);
    let mut max_cap = ez.cap_hits;
    let mut best = Best { z: z.clone(), objective: fz, smooth: ez.value, kkt, cap_hits: ez.cap_hits };

    let metric = Metric::new(problem, cfg.precondition);
    let mut eta = match cfg.eta0 {
        Some(e) => e,
        None => probe_step(problem, &metric, &z, &ez, cfg.probe_delta),
    };
    let mut upsilon = cfg.upsilon0;
    if cfg.record_trace {
        trace.rows.push(TraceRow { iter: 0, objective: fz, eta, lipschitz: 1.0 / eta, running_min: fz, kkt });
    }
    if kkt < cfg.kkt_tol {
        return Ok((finish(best, 0, true, max_cap), trace));
    }

    // y is the extrapolated point the gradient step is taken from
    let mut y = z.clone();
    let mut ey = ez;
    let mut prev: Option<(Coefficients, Coefficients)> = None;
    let mut momentum_t = 1.0;
    let mut lipschitz = 1.0 / eta;

    for k in 1..=cfg.max_iters {
        if let Some((y_prev, g_prev)) = &prev {
            let s = adaptive_step(
                eta,
                upsilon,
                &metric.dual(ey.grad.as_slice()),
                &metric.dual(g_prev.as_slice()),
                &metric.primal(y.as_slice()),
                &metric.primal(y_prev.as_slice()),
            );
            eta = s.eta;
            upsilon = s.upsilon;
            lipschitz = s.lipschitz;
        }
        let z_new = forward_backward(problem, &metric, &y, &ey.grad, eta);
        let e_new = checked_eval(problem, &z_new, k)?;
        let f_new = e_new.value + problem.objective_g(&z_new);
        let kkt_new = kkt_from_gradient(problem, &z_new, &e_new.grad);
        max_cap = max_cap.max(e_new.cap_hits);
        if f_new < best.objective {
            best = Best { z: z_new.clone(), objective: f_new, smooth: e_new.value, kkt: kkt_new, cap_hits: e_new.cap_hits };
        }
        if cfg.record_trace {
            trace.rows.push(TraceRow {
                iter: k,
                objective: f_new,
                eta,
                lipschitz,
                running_min: best.objective,
                kkt: kkt_new,
            });
        }
        if kkt_new < cfg.kkt_tol {
            let done = Best { z: z_new, objective: f_new, smooth: e_new.value, kkt: kkt_new, cap_hits: e_new.cap_hits };
            return Ok((finish(done, k, true, max_cap), trace));
        }

        let beta = match cfg.accel {
            Acceleration::Off => 0.0,
            Acceleration::RestartMomentum => {
                if f_new > fz {
                    momentum_t = 1.0;
                    0.0
                } else {
                    let t_next = 0.5 * (1.0 + math::sqrt(1.0 + 4.0 * momentum_t * momentum_t));
                    let b = (momentum_t - 1.0) / t_next;
                    momentum_t = t_next;
                    b
                }
            }
        };
        let old_y = core::mem::replace(&mut y, z_new.clone());
        let old_eval = core::mem::replace(&mut ey, e_new);
        if beta > 0.0 {
            let data = z_new.as_slice().iter().zip(z.as_slice()).map(|(a, b)| a + beta * (a - b)).collect();
            y = z_new.with_data(data);
            ey = checked_eval(problem, &y, k)?;
        }
        prev = Some((old_y, old_eval.grad));
        z = z_new;
        fz = f_new;
    }
    Ok((finish(best, cfg.max_iters, false, max_cap), trace))
}

fn finish(b: Best, iterations: usize, converged: bool, max_cap_hits: usize) -> FitResult {
    FitResult {
        coefficients: b.z,
        objective: b.objective,
        smooth_value: b.smooth,
        kkt: b.kkt,
        iterations,
        converged,
        cap_hits: b.cap_hits,
        max_cap_hits,
    }
}

/// Inverse local Lipschitz estimate from a gradient step of length `δ`.
fn probe_step(problem: &FitProblem, metric: &Metric, z: &Coefficients, e: &SmoothEval, delta: f64) -> f64 {
    let step = metric.inverse(e.grad.as_slice());
    let data = z.as_slice().iter().zip(&step).map(|(a, g)| a - delta * g).collect();
    let zp = z.with_data(data);
    let gp = problem.gradient_f(&zp);
    let dz = math::dist2(&metric.primal(zp.as_slice()), &metric.primal(z.as_slice()));
    let dg = math::dist2(&metric.dual(gp.as_slice()), &metric.dual(e.grad.as_slice()));
    let eta = dz / dg;
    if eta.is_finite() && eta > 0.0 {
        eta
    } else {
        1.0
    }
}
