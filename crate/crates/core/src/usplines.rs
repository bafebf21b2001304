//! Univariate B-spline bases, centered and scaled on the fitting sample so that
//! every column has empirical mean zero and unit empirical second moment.

use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use crate::error::BasisError;
use crate::math;

/// Cubic splines (polynomial degree 3).
pub const DEFAULT_ORDER: usize = 4;
pub const DEFAULT_INTERIOR_KNOTS: usize = 4;

#[derive(Debug)]
pub struct SplineBasis1D {
    order: usize,
    knots: Vec<f64>,
    lower: f64,
    upper: f64,
    center: Vec<f64>,
    scale: Vec<f64>,
    clamped: AtomicUsize,
}

impl Clone for SplineBasis1D {
    fn clone(&self) -> Self {
        Self {
            order: self.order,
            knots: self.knots.clone(),
            lower: self.lower,
            upper: self.upper,
            center: self.center.clone(),
            scale: self.scale.clone(),
            clamped: AtomicUsize::new(self.clamped.load(Ordering::Relaxed)),
        }
    }
}

/// Empirical quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = math::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl SplineBasis1D {
    /// Fits knots at equally spaced empirical quantiles of `x` and the
    /// centering/scaling constants on `x`. Interior knots that coincide with
    /// each other or with the range ends are dropped.
    pub fn fit(x: &[f64], order: usize, n_interior_knots: usize) -> Result<Self, BasisError> {
        if order == 0 {
            return Err(BasisError::ZeroOrder);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(BasisError::NonFinite);
        }
        if x.is_empty() {
            return Err(BasisError::TooFewObservations { n: 0, n_basis: order + n_interior_knots });
        }
        let mut sorted = x.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (lower, upper) = (sorted[0], sorted[sorted.len() - 1]);
        if upper <= lower {
            return Err(BasisError::ConstantCovariate);
        }
        let mut interior: Vec<f64> = Vec::with_capacity(n_interior_knots);
        for j in 1..=n_interior_knots {
            let q = quantile(&sorted, j as f64 / (n_interior_knots + 1) as f64);
            if q > lower && q < upper && interior.last().is_none_or(|&l| q > l) {
                interior.push(q);
            }
        }
        let mut knots = vec![lower; order];
        knots.extend_from_slice(&interior);
        knots.extend(core::iter::repeat_n(upper, order));
        let n_basis = interior.len() + order;
        if x.len() <= n_basis {
            return Err(BasisError::TooFewObservations { n: x.len(), n_basis });
        }

        let mut basis = Self {
            order,
            knots,
            lower,
            upper,
            center: vec![0.0; n_basis],
            scale: vec![1.0; n_basis],
            clamped: AtomicUsize::new(0),
        };
        let n = x.len() as f64;
        let mut mean = vec![0.0; n_basis];
        let raws: Vec<Vec<f64>> = x.iter().map(|&v| basis.raw_values(v)).collect();
        for r in &raws {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut second = vec![0.0; n_basis];
        for r in &raws {
            for ((s, v), m) in second.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        basis.scale = second
            .into_iter()
            .map(|s| {
                let sd = math::sqrt(s / n);
                // a column with no sample support stays identically zero
                if sd > 1e-300 { sd } else { 1.0 }
            })
            .collect();
        basis.center = mean;
        Ok(basis)
    }

    pub fn n_basis(&self) -> usize {
        self.center.len()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.knots[self.order..self.knots.len() - self.order]
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// Number of evaluations that fell outside the fitted range.
    pub fn clamp_count(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    /// Uncentered B-spline values at `x` clamped to the fitted range.
    pub fn raw_values(&self, x: f64) -> Vec<f64> {
        let x = x.clamp(self.lower, self.upper);
        let p = self.order - 1;
        let t = &self.knots;
        let n = self.n_basis();
        // span s with t[s] <= x < t[s+1], right end folded into the last span
        let span = if x >= self.upper {
            n - 1
        } else {
            let mut s = p;
            while s + 1 < t.len() && t[s + 1] <= x {
                s += 1;
            }
            s.min(n - 1)
        };
        let mut nvals = vec![0.0; p + 1];
        nvals[0] = 1.0;
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        for j in 1..=p {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom != 0.0 { nvals[r] / denom } else { 0.0 };
                nvals[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            nvals[j] = saved;
        }
        let mut out = vec![0.0; n];
        out[span - p..=span].copy_from_slice(&nvals);
        out
    }

    /// Centered and scaled basis vector `A(x)`.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        if x < self.lower || x > self.upper {
            self.clamped.fetch_add(1, Ordering::Relaxed);
        }
        let mut v = self.raw_values(x);
        for ((v, c), s) in v.iter_mut().zip(&self.center).zip(&self.scale) {
            *v = (*v - c) / s;
        }
        v
    }

    /// `A(x)ᵀθ`
    pub fn evaluate(&self, theta: &[f64], x: f64) -> f64 {
        math::dot(&self.eval(x), theta)
    }
}
