//! Moving-window design assembly and the smooth part of the objective:
//! the negative Poisson quasi-log-likelihood plus the roughness ridge.
//!
//! For location `i` and day `s` of the window the linear predictor is
//! `η_is = B(u_i)ᵀQ₂γ* + Σ_k A_k(X_isk)ᵀθ_k + ξ_i`, one slack per location shared
//! across the window. Rows of the univariate design are location-major:
//! row `i·W + s` for window length `W = t₀ + 1`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut, Range};

use crate::bpst::{BivariateBasis, ConstraintSystem};
use crate::error::{BasisError, DesignError};
use crate::linalg::Matrix;
use crate::math;
use crate::mesh::Point;
use crate::usplines::{SplineBasis1D, DEFAULT_INTERIOR_KNOTS, DEFAULT_ORDER};

/// Linear predictors above this are continued linearly in the mean.
pub const DEFAULT_ETA_MAX: f64 = 30.0;

/// Count panel: `n` locations × `T` days with `p` covariates per cell.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PanelData {
    locations: Vec<Point>,
    n_times: usize,
    n_covariates: usize,
    /// `counts[i·T + t]`
    counts: Vec<f64>,
    /// `covariates[(i·T + t)·p + k]`
    covariates: Vec<f64>,
}

impl PanelData {
    pub fn new(
        locations: Vec<Point>,
        n_times: usize,
        n_covariates: usize,
        counts: Vec<f64>,
        covariates: Vec<f64>,
    ) -> Result<Self, DesignError> {
        let n = locations.len();
        if counts.len() != n * n_times {
            return Err(DesignError::Dimension("counts must have n·T entries"));
        }
        if covariates.len() != n * n_times * n_covariates {
            return Err(DesignError::Dimension("covariates must have n·T·p entries"));
        }
        if let Some(index) = counts.iter().position(|&y| !(y >= 0.0 && y.is_finite())) {
            return Err(DesignError::InvalidCount { index });
        }
        Ok(Self { locations, n_times, n_covariates, counts, covariates })
    }

    pub fn n_locations(&self) -> usize {
        self.locations.len()
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    pub fn locations(&self) -> &[Point] {
        &self.locations
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn count(&self, i: usize, t: usize) -> f64 {
        self.counts[i * self.n_times + t]
    }

    pub fn covariate(&self, i: usize, t: usize, k: usize) -> f64 {
        self.covariates[(i * self.n_times + t) * self.n_covariates + k]
    }

    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    /// Same panel with the counts replaced (e.g. by a thinned fold).
    pub fn with_counts(&self, counts: Vec<f64>) -> Result<Self, DesignError> {
        Self::new(self.locations.clone(), self.n_times, self.n_covariates, counts, self.covariates.clone())
    }

    /// Keeps only the listed locations.
    pub fn subset(&self, keep: &[usize]) -> Self {
        let (tn, p) = (self.n_times, self.n_covariates);
        let mut counts = Vec::with_capacity(keep.len() * tn);
        let mut covariates = Vec::with_capacity(keep.len() * tn * p);
        for &i in keep {
            counts.extend_from_slice(&self.counts[i * tn..(i + 1) * tn]);
            covariates.extend_from_slice(&self.covariates[i * tn * p..(i + 1) * tn * p]);
        }
        Self {
            locations: keep.iter().map(|&i| self.locations[i]).collect(),
            n_times: tn,
            n_covariates: p,
            counts,
            covariates,
        }
    }
}

/// Bivariate spline space over a mesh with its constraint elimination.
#[derive(Debug, Clone)]
pub struct SpatialModel {
    pub basis: BivariateBasis,
    pub constraints: ConstraintSystem,
    penalty_star: Matrix,
}

impl SpatialModel {
    pub fn new(basis: BivariateBasis) -> Self {
        let constraints = ConstraintSystem::build(&basis);
        let penalty_star = constraints.reduced_penalty();
        Self { basis, constraints, penalty_star }
    }

    /// Dimension of `γ*`.
    pub fn n_free(&self) -> usize {
        self.constraints.n_free()
    }

    pub fn penalty_star(&self) -> &Matrix {
        &self.penalty_star
    }

    /// Row `B(u)ᵀQ₂`.
    pub fn design_row(&self, u: Point) -> Result<Vec<f64>, BasisError> {
        let row = self.basis.eval_basis(u)?;
        let q2 = &self.constraints.q2;
        let mut out = vec![0.0; q2.cols()];
        for (l, &v) in row.values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for (o, &q) in out.iter_mut().zip(q2.row(row.offset + l)) {
                *o += v * q;
            }
        }
        Ok(out)
    }

    /// `β̂(u) = B(u)ᵀQ₂γ*`
    pub fn beta(&self, gamma_star: &[f64], u: Point) -> Result<f64, BasisError> {
        Ok(math::dot(&self.design_row(u)?, gamma_star))
    }
}

/// Knot settings for the univariate components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UnivariateSpec {
    pub order: usize,
    pub n_interior_knots: usize,
}

impl Default for UnivariateSpec {
    fn default() -> Self {
        Self { order: DEFAULT_ORDER, n_interior_knots: DEFAULT_INTERIOR_KNOTS }
    }
}

/// Everything about one window that does not depend on the counts or tuning.
#[derive(Debug, Clone)]
pub struct WindowDesign {
    spatial: Arc<SpatialModel>,
    n: usize,
    window_len: usize,
    start: usize,
    xb: Matrix,
    xu: Matrix,
    univariate: Vec<SplineBasis1D>,
    theta_offsets: Vec<usize>,
    y: Vec<f64>,
}

impl WindowDesign {
    /// Design for the window `[t − t₀, t]` (0-based days).
    pub fn assemble(
        panel: &PanelData,
        spatial: Arc<SpatialModel>,
        t: usize,
        t0: usize,
        spec: UnivariateSpec,
    ) -> Result<Self, DesignError> {
        if t >= panel.n_times() || t0 > t {
            return Err(DesignError::WindowOutOfRange {
                start: t as isize - t0 as isize,
                end: t,
                n_times: panel.n_times(),
            });
        }
        let n = panel.n_locations();
        let w = t0 + 1;
        let start = t - t0;
        let kb = spatial.n_free();
        let mut xb = Matrix::zeros(n, kb);
        for (i, &u) in panel.locations().iter().enumerate() {
            let row = spatial.design_row(u).map_err(|_| DesignError::LocationOutsideMesh { index: i })?;
            xb.row_mut(i).copy_from_slice(&row);
        }

        let p = panel.n_covariates();
        let mut univariate = Vec::with_capacity(p);
        for k in 0..p {
            let xs: Vec<f64> = (0..n)
                .flat_map(|i| (start..=t).map(move |s| (i, s)))
                .map(|(i, s)| panel.covariate(i, s, k))
                .collect();
            let b = SplineBasis1D::fit(&xs, spec.order, spec.n_interior_knots)
                .map_err(|source| DesignError::Covariate { covariate: k, source })?;
            univariate.push(b);
        }
        let mut theta_offsets = Vec::with_capacity(p + 1);
        let mut acc = 0;
        for b in &univariate {
            theta_offsets.push(acc);
            acc += b.n_basis();
        }
        theta_offsets.push(acc);
        let ku = acc;
        let mut xu = Matrix::zeros(n * w, ku);
        let mut y = Vec::with_capacity(n * w);
        for i in 0..n {
            for (si, s) in (start..=t).enumerate() {
                let row = xu.row_mut(i * w + si);
                for (k, b) in univariate.iter().enumerate() {
                    let v = b.eval(panel.covariate(i, s, k));
                    row[theta_offsets[k]..theta_offsets[k + 1]].copy_from_slice(&v);
                }
                y.push(panel.count(i, s));
            }
        }
        Ok(Self { spatial, n, window_len: w, start, xb, xu, univariate, theta_offsets, y })
    }

    pub fn spatial(&self) -> &Arc<SpatialModel> {
        &self.spatial
    }

    pub fn n_locations(&self) -> usize {
        self.n
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// First day of the window.
    pub fn start(&self) -> usize {
        self.start
    }

    /// `N = n (t₀ + 1)`
    pub fn n_cells(&self) -> usize {
        self.n * self.window_len
    }

    /// Bivariate design `n × dim(γ*)`, rows `B(u_i)ᵀQ₂`.
    pub fn bivariate_design(&self) -> &Matrix {
        &self.xb
    }

    /// Univariate design `N × dim(θ)`.
    pub fn univariate_design(&self) -> &Matrix {
        &self.xu
    }

    pub fn univariate_bases(&self) -> &[SplineBasis1D] {
        &self.univariate
    }

    /// Range of `θ` belonging to covariate `k`.
    pub fn theta_range(&self, k: usize) -> Range<usize> {
        self.theta_offsets[k]..self.theta_offsets[k + 1]
    }

    pub fn n_gamma(&self) -> usize {
        self.xb.cols()
    }

    pub fn n_theta(&self) -> usize {
        self.xu.cols()
    }

    /// Window counts in row order.
    pub fn counts(&self) -> &[f64] {
        &self.y
    }

    pub fn penalty_star(&self) -> &Matrix {
        self.spatial.penalty_star()
    }

    /// `α̂_k(x)`
    pub fn alpha(&self, k: usize, theta: &[f64], x: f64) -> f64 {
        self.univariate[k].evaluate(&theta[self.theta_range(k)], x)
    }
}

/// Flat coefficient vector `z = (γ*, θ, ξ)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Coefficients {
    n_gamma: usize,
    n_theta: usize,
    data: Vec<f64>,
}

impl Coefficients {
    pub fn zeros(n_gamma: usize, n_theta: usize, n_xi: usize) -> Self {
        Self { n_gamma, n_theta, data: vec![0.0; n_gamma + n_theta + n_xi] }
    }

    pub fn from_parts(gamma_star: &[f64], theta: &[f64], xi: &[f64]) -> Self {
        let mut data = Vec::with_capacity(gamma_star.len() + theta.len() + xi.len());
        data.extend_from_slice(gamma_star);
        data.extend_from_slice(theta);
        data.extend_from_slice(xi);
        Self { n_gamma: gamma_star.len(), n_theta: theta.len(), data }
    }

    pub fn gamma_star(&self) -> &[f64] {
        &self.data[..self.n_gamma]
    }

    pub fn theta(&self) -> &[f64] {
        &self.data[self.n_gamma..self.n_gamma + self.n_theta]
    }

    pub fn xi(&self) -> &[f64] {
        &self.data[self.n_gamma + self.n_theta..]
    }

    pub fn gamma_star_mut(&mut self) -> &mut [f64] {
        &mut self.data[..self.n_gamma]
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        let g = self.n_gamma;
        &mut self.data[g..g + self.n_theta]
    }

    pub fn xi_mut(&mut self) -> &mut [f64] {
        let o = self.n_gamma + self.n_theta;
        &mut self.data[o..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_gamma == other.n_gamma && self.n_theta == other.n_theta && self.data.len() == other.data.len()
    }

    /// Same shape, new contents.
    pub fn with_data(&self, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), self.data.len());
        Self { n_gamma: self.n_gamma, n_theta: self.n_theta, data }
    }
}

impl Index<usize> for Coefficients {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for Coefficients {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

/// Diagonal blocks of an approximate Hessian of `f`.
#[derive(Debug, Clone)]
pub struct CurvatureEstimate {
    pub gamma: Matrix,
    pub theta: Matrix,
    pub xi: Vec<f64>,
}

/// Objective value, gradient and overflow diagnostics at one point.
#[derive(Debug, Clone)]
pub struct SmoothEval {
    pub value: f64,
    pub grad: Coefficients,
    pub cap_hits: usize,
}

/// Convex continuation of `exp` past `eta_max`: returns `(φ(η), φ'(η), capped)`.
#[inline]
fn mean_link(eta: f64, eta_max: f64) -> (f64, f64, bool) {
    if eta <= eta_max {
        let m = math::exp(eta);
        (m, m, false)
    } else {
        let m = math::exp(eta_max);
        (m * (1.0 + eta - eta_max), m, true)
    }
}

/// One window's penalized estimation problem.
#[derive(Debug, Clone)]
pub struct FitProblem {
    design: Arc<WindowDesign>,
    y: Vec<f64>,
    pub lambda0: f64,
    pub lambda1: f64,
    weights: Vec<f64>,
    pub sigma2: f64,
    pub eta_max: f64,
    slack: bool,
}

impl FitProblem {
    /// Problem on the design's own counts with `λ₀ = λ₁ = 0` and unit weights.
    pub fn new(design: Arc<WindowDesign>) -> Self {
        let y = design.counts().to_vec();
        let n = design.n_locations();
        Self {
            design,
            y,
            lambda0: 0.0,
            lambda1: 0.0,
            weights: vec![1.0; n],
            sigma2: 1.0,
            eta_max: DEFAULT_ETA_MAX,
            slack: true,
        }
    }

    /// Baseline problem with no slack block.
    pub fn without_slack(design: Arc<WindowDesign>) -> Self {
        let mut p = Self::new(design);
        p.slack = false;
        p.weights.clear();
        p
    }

    pub fn with_lambdas(mut self, lambda0: f64, lambda1: f64) -> Self {
        self.lambda0 = lambda0;
        self.lambda1 = lambda1;
        self
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self, DesignError> {
        if !self.slack {
            return Err(DesignError::Dimension("baseline problem has no slack weights"));
        }
        if weights.len() != self.design.n_locations() {
            return Err(DesignError::Dimension("one weight per location"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(DesignError::InvalidWeights);
        }
        self.weights = weights;
        Ok(self)
    }

    /// Replaces the window counts (row order as in the design).
    pub fn with_counts(mut self, y: Vec<f64>) -> Result<Self, DesignError> {
        if y.len() != self.design.n_cells() {
            return Err(DesignError::Dimension("counts must cover every window cell"));
        }
        if let Some(index) = y.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(DesignError::InvalidCount { index });
        }
        self.y = y;
        Ok(self)
    }

    pub fn design(&self) -> &Arc<WindowDesign> {
        &self.design
    }

    pub fn counts(&self) -> &[f64] {
        &self.y
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn has_slack(&self) -> bool {
        self.slack
    }

    pub fn n_xi(&self) -> usize {
        if self.slack {
            self.design.n_locations()
        } else {
            0
        }
    }

    pub fn zero_coefficients(&self) -> Coefficients {
        Coefficients::zeros(self.design.n_gamma(), self.design.n_theta(), self.n_xi())
    }

    /// Total parameter count `dim(γ*) + dim(θ) + dim(ξ)`.
    pub fn n_params(&self) -> usize {
        self.design.n_gamma() + self.design.n_theta() + self.n_xi()
    }

    fn check_shape(&self, c: &Coefficients) {
        assert!(
            c.n_gamma == self.design.n_gamma() && c.n_theta == self.design.n_theta() && c.len() == self.n_params(),
            "coefficient shape does not match the problem"
        );
    }

    /// Linear predictors for every window cell plus the number above `eta_max`.
    pub fn linear_predictor(&self, c: &Coefficients) -> (Vec<f64>, usize) {
        self.check_shape(c);
        let d = &*self.design;
        let w = d.window_len();
        let bv = d.xb.mul_vec(c.gamma_star());
        let theta = c.theta();
        let xi = c.xi();
        let mut eta = Vec::with_capacity(d.n_cells());
        let mut hits = 0;
        for i in 0..d.n_locations() {
            let base = bv[i] + if self.slack { xi[i] } else { 0.0 };
            for s in 0..w {
                let e = base + math::dot(d.xu.row(i * w + s), theta);
                if e > self.eta_max {
                    hits += 1;
                }
                eta.push(e);
            }
        }
        (eta, hits)
    }

    /// Fitted means `exp(η)` (continued linearly past the cap).
    pub fn fitted_means(&self, c: &Coefficients) -> Vec<f64> {
        self.linear_predictor(c).0.into_iter().map(|e| mean_link(e, self.eta_max).0).collect()
    }

    /// Value and gradient of `f` in one pass.
    pub fn eval(&self, c: &Coefficients) -> SmoothEval {
        self.check_shape(c);
        let d = &*self.design;
        let w = d.window_len();
        let n = d.n_locations();
        let bv = d.xb.mul_vec(c.gamma_star());
        let theta = c.theta();
        let xi = c.xi();
        let inv_s2 = 1.0 / self.sigma2;
        let mut grad = self.zero_coefficients();
        let mut rsum = vec![0.0; n];
        let mut value = 0.0;
        let mut hits = 0;
        {
            let gtheta = grad.theta_mut();
            for i in 0..n {
                let base = bv[i] + if self.slack { xi[i] } else { 0.0 };
                let mut acc = 0.0;
                for s in 0..w {
                    let row = i * w + s;
                    let xr = d.xu.row(row);
                    let eta = base + math::dot(xr, theta);
                    let (mu, dmu, capped) = mean_link(eta, self.eta_max);
                    hits += capped as usize;
                    let y = self.y[row];
                    value += (mu - y * eta) * inv_s2;
                    let r = (dmu - y) * inv_s2;
                    acc += r;
                    for (g, &x) in gtheta.iter_mut().zip(xr) {
                        *g += r * x;
                    }
                }
                rsum[i] = acc;
            }
        }
        let pg = d.penalty_star().mul_vec(c.gamma_star());
        value += 0.5 * self.lambda0 * math::dot(c.gamma_star(), &pg);
        let gg = d.xb.tr_mul_vec(&rsum);
        for ((g, a), p) in grad.gamma_star_mut().iter_mut().zip(gg).zip(pg) {
            *g = a + self.lambda0 * p;
        }
        if self.slack {
            grad.xi_mut().copy_from_slice(&rsum);
        }
        SmoothEval { value, grad, cap_hits: hits }
    }

    /// `f(z)`: negative quasi-log-likelihood over the window plus `(λ₀/2)γ*ᵀQ₂ᵀPQ₂γ*`.
    pub fn objective_f(&self, c: &Coefficients) -> f64 {
        self.eval(c).value
    }

    /// `∇f(z)`
    pub fn gradient_f(&self, c: &Coefficients) -> Coefficients {
        self.eval(c).grad
    }

    /// `g(z) = λ₁ Σ w_i ξ_i` on the nonnegative orthant, `+∞` off it.
    pub fn objective_g(&self, c: &Coefficients) -> f64 {
        if !self.slack {
            return 0.0;
        }
        let mut acc = 0.0;
        for (&x, &w) in c.xi().iter().zip(&self.weights) {
            if x < 0.0 {
                return f64::INFINITY;
            }
            acc += w * x;
        }
        self.lambda1 * acc
    }

    /// Block-diagonal estimate of the Hessian of `f` near the solution:
    /// `Xᵀ diag(Y + 1) X / σ²` restricted to each block, plus `λ₀ P*` on `γ*`.
    pub fn curvature_estimate(&self) -> CurvatureEstimate {
        let d = &*self.design;
        let (kb, ku, w) = (d.n_gamma(), d.n_theta(), d.window_len());
        let mut gamma = Matrix::zeros(kb, kb);
        let mut theta = Matrix::zeros(ku, ku);
        let mut xi = vec![0.0; self.n_xi()];
        for i in 0..d.n_locations() {
            let mut loc = 0.0;
            for s in 0..w {
                let row = i * w + s;
                let c = (self.y[row] + 1.0) / self.sigma2;
                loc += c;
                let x = d.xu.row(row);
                for a in 0..ku {
                    let ca = c * x[a];
                    if ca == 0.0 {
                        continue;
                    }
                    for b in a..ku {
                        theta[(a, b)] += ca * x[b];
                    }
                }
            }
            let x = d.xb.row(i);
            for a in 0..kb {
                let ca = loc * x[a];
                if ca == 0.0 {
                    continue;
                }
                for b in a..kb {
                    gamma[(a, b)] += ca * x[b];
                }
            }
            if self.slack {
                xi[i] = loc;
            }
        }
        let p = d.penalty_star();
        for a in 0..kb {
            for b in a..kb {
                gamma[(a, b)] += self.lambda0 * p[(a, b)];
                gamma[(b, a)] = gamma[(a, b)];
            }
        }
        for a in 0..ku {
            for b in a..ku {
                theta[(b, a)] = theta[(a, b)];
            }
        }
        CurvatureEstimate { gamma, theta, xi }
    }

    /// Full Poisson log-likelihood `Σ y log μ − μ − log y!` at `z`.
    pub fn log_likelihood(&self, c: &Coefficients) -> f64 {
        let (eta, _) = self.linear_predictor(c);
        eta.iter()
            .zip(&self.y)
            .map(|(&e, &y)| {
                let e = e.min(self.eta_max);
                y * e - math::exp(e) - math::ln_factorial(y)
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TriMesh;

    fn square_model() -> Arc<SpatialModel> {
        let mesh = TriMesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 3], [1, 2, 3]],
        )
        .unwrap();
        Arc::new(SpatialModel::new(BivariateBasis::new(mesh, 2, 1).unwrap()))
    }

    fn panel(n: usize, tn: usize, p: usize) -> PanelData {
        let mut locs = Vec::new();
        let mut counts = Vec::new();
        let mut cov = Vec::new();
        let mut h: u64 = 7;
        let mut next = || {
            h = h.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (h >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..n {
            locs.push([next(), next()]);
            for _ in 0..tn {
                counts.push(math::floor(next() * 6.0));
                for _ in 0..p {
                    cov.push(next());
                }
            }
        }
        PanelData::new(locs, tn, p, counts, cov).unwrap()
    }

    #[test]
    fn single_day_window_rows() {
        let d = WindowDesign::assemble(&panel(40, 3, 2), square_model(), 1, 0, UnivariateSpec::default()).unwrap();
        assert_eq!(d.bivariate_design().rows(), 40);
        assert_eq!(d.univariate_design().rows(), 40);
    }

    #[test]
    fn large_window_row_count() {
        let d = WindowDesign::assemble(&panel(2000, 5, 4), square_model(), 4, 4, UnivariateSpec::default()).unwrap();
        assert_eq!(d.univariate_design().rows(), 10000);
        assert_eq!(d.n_theta(), 32);
    }

    #[test]
    fn window_out_of_range() {
        let r = WindowDesign::assemble(&panel(20, 3, 1), square_model(), 1, 2, UnivariateSpec::default());
        assert!(matches!(r, Err(DesignError::WindowOutOfRange { .. })));
        let r = WindowDesign::assemble(&panel(20, 3, 1), square_model(), 3, 0, UnivariateSpec::default());
        assert!(matches!(r, Err(DesignError::WindowOutOfRange { .. })));
    }

    #[test]
    fn outside_location_is_rejected() {
        let mut pn = panel(20, 2, 1);
        pn.locations[3] = [5.0, 5.0];
        let r = WindowDesign::assemble(&pn, square_model(), 1, 1, UnivariateSpec::default());
        assert_eq!(r.unwrap_err(), DesignError::LocationOutsideMesh { index: 3 });
    }

    #[test]
    fn zero_coefficients_zero_counts() {
        let pn = panel(30, 3, 1);
        let pn = pn.with_counts(vec![0.0; 90]).unwrap();
        let d = Arc::new(WindowDesign::assemble(&pn, square_model(), 2, 2, UnivariateSpec::default()).unwrap());
        let mut prob = FitProblem::new(d);
        prob.sigma2 = 2.0;
        let c = prob.zero_coefficients();
        assert!((prob.objective_f(&c) - 90.0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn unpenalized_slack_problem() {
        let d = Arc::new(WindowDesign::assemble(&panel(30, 2, 1), square_model(), 1, 1, UnivariateSpec::default()).unwrap());
        let prob = FitProblem::new(d).with_lambdas(0.0, 0.0);
        assert!(prob.weights().iter().all(|&w| w == 1.0));
        let mut c = prob.zero_coefficients();
        c.xi_mut()[0] = 3.0;
        assert_eq!(prob.objective_g(&c), 0.0);
    }

    #[test]
    fn gradient_vanishes_when_means_match_counts() {
        let d = Arc::new(WindowDesign::assemble(&panel(25, 2, 1), square_model(), 1, 1, UnivariateSpec::default()).unwrap());
        let prob = FitProblem::new(d.clone());
        let mut c = prob.zero_coefficients();
        for (k, v) in c.as_mut_slice().iter_mut().enumerate() {
            *v = 0.05 * ((k % 7) as f64 - 3.0);
        }
        let mu = prob.fitted_means(&c);
        let prob = prob.with_counts(mu).unwrap();
        let g = prob.gradient_f(&c);
        assert!(math::norm_inf(g.as_slice()) < 1e-10);
    }

    #[test]
    fn rejects_bad_weights() {
        let d = Arc::new(WindowDesign::assemble(&panel(20, 2, 1), square_model(), 1, 1, UnivariateSpec::default()).unwrap());
        assert!(FitProblem::new(d.clone()).with_weights(vec![-1.0; 20]).is_err());
        assert!(FitProblem::new(d).with_weights(vec![1.0; 3]).is_err());
    }

    #[test]
    fn cap_is_counted_and_finite() {
        let d = Arc::new(WindowDesign::assemble(&panel(20, 2, 1), square_model(), 1, 1, UnivariateSpec::default()).unwrap());
        let prob = FitProblem::new(d);
        let mut c = prob.zero_coefficients();
        c.xi_mut()[0] = 100.0;
        let e = prob.eval(&c);
        assert_eq!(e.cap_hits, 2);
        assert!(e.value.is_finite());
    }
}
