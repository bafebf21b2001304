//! Poisson data thinning and adaptive-Lasso weights for the slack block.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::RobustError;
use crate::glm::FitProblem;
use crate::math;
use crate::select::{self, SelectConfig, SelectionResult};

pub const DEFAULT_FOLDS: usize = 2;
pub const DEFAULT_GAMMA_EXP: f64 = 1.0;
pub const DEFAULT_PILOT_LAMBDA0: f64 = 1.0;

/// `Q` count arrays summing elementwise to the original counts.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThinnedFolds {
    pub q: usize,
    pub folds: Vec<Vec<f64>>,
    pub seed: u64,
}

impl ThinnedFolds {
    pub fn fold(&self, q: usize) -> &[f64] {
        &self.folds[q]
    }
}

/// Splits each count into `q` equal-probability multinomial cells.
///
/// Counts must be nonnegative integers (stored as `f64`).
pub fn thin(counts: &[f64], q: usize, seed: u64) -> Result<ThinnedFolds, RobustError> {
    if q < 2 {
        return Err(RobustError::TooFewFolds(q));
    }
    if counts.iter().any(|&y| !(y >= 0.0 && y.is_finite() && math::floor(y) == y)) {
        return Err(RobustError::InvalidSettings("counts must be nonnegative integers"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![vec![0.0; counts.len()]; q];
    for (j, &y) in counts.iter().enumerate() {
        let mut rest = y as u64;
        for (k, fold) in folds.iter_mut().enumerate().take(q - 1) {
            if rest == 0 {
                break;
            }
            let p = 1.0 / (q - k) as f64;
            let a = Binomial::new(rest, p).expect("valid binomial").sample(&mut rng);
            fold[j] = a as f64;
            rest -= a;
        }
        folds[q - 1][j] = rest as f64;
    }
    Ok(ThinnedFolds { q, folds, seed })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeightSettings {
    /// `None` uses `1/√(n(t₀+1))`.
    pub epsilon: Option<f64>,
    pub gamma_exp: f64,
    /// Roughness penalty held fixed in the pilot fits.
    pub pilot_lambda0: f64,
}

impl Default for WeightSettings {
    fn default() -> Self {
        Self { epsilon: None, gamma_exp: DEFAULT_GAMMA_EXP, pilot_lambda0: DEFAULT_PILOT_LAMBDA0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdaptiveWeights {
    pub w: Vec<f64>,
    pub epsilon: f64,
    pub gamma_exp: f64,
    /// Fold-averaged pilot slacks `ξ̄`.
    pub xi_bar: Vec<f64>,
    /// Pilot `λ₁` picked on each fold.
    pub pilot_lambda1: Vec<f64>,
}

/// `w_i = 1/(ξ̄_i + ε)^γ`
pub fn weights_from_pilot(xi_bar: &[f64], epsilon: f64, gamma_exp: f64) -> Vec<f64> {
    xi_bar.iter().map(|&x| 1.0 / math::pow(x + epsilon, gamma_exp)).collect()
}

/// Fits a plain-Lasso model (`w = 1`, `λ₀ = 0`, BIC-chosen `λ₁`) on each fold
/// of the window counts and turns the averaged slacks into weights.
///
/// `pilot_grid = None` uses the default grid computed from each fold.
pub fn compute_weights(
    base: &FitProblem,
    folds: &ThinnedFolds,
    pilot_grid: Option<&[f64]>,
    select_cfg: &SelectConfig,
    settings: WeightSettings,
) -> Result<AdaptiveWeights, RobustError> {
    if !base.has_slack() {
        return Err(RobustError::InvalidSettings("weights need a slack block"));
    }
    if !(settings.gamma_exp > 0.0 && settings.gamma_exp.is_finite()) {
        return Err(RobustError::InvalidSettings("gamma_exp must be positive"));
    }
    if !(settings.pilot_lambda0 >= 0.0 && settings.pilot_lambda0.is_finite()) {
        return Err(RobustError::InvalidSettings("pilot_lambda0 must be nonnegative"));
    }
    let n = base.design().n_locations();
    let epsilon = settings.epsilon.unwrap_or_else(|| 1.0 / math::sqrt(base.design().n_cells() as f64));
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(RobustError::InvalidSettings("epsilon must be positive"));
    }
    let mut xi_bar = vec![0.0; n];
    let mut pilot_lambda1 = Vec::with_capacity(folds.q);
    for (q, counts) in folds.folds.iter().enumerate() {
        let prob = base
            .clone()
            .with_weights(vec![1.0; n])
            .and_then(|p| p.with_counts(counts.clone()))?;
        let grid = match pilot_grid {
            Some(g) => g.to_vec(),
            None => select::default_lambda1_grid(&prob),
        };
        let s = select::select_lambda1_at(&prob, settings.pilot_lambda0, &grid, select_cfg, None)
            .map_err(|source| RobustError::Fold { fold: q, source })?;
        for (acc, &x) in xi_bar.iter_mut().zip(s.fit.coefficients.xi()) {
            *acc += x;
        }
        pilot_lambda1.push(s.best_lambda);
    }
    xi_bar.iter_mut().for_each(|x| *x /= folds.q as f64);
    let w = weights_from_pilot(&xi_bar, epsilon, settings.gamma_exp);
    Ok(AdaptiveWeights { w, epsilon, gamma_exp: settings.gamma_exp, xi_bar, pilot_lambda1 })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RobustConfig {
    pub folds: usize,
    pub thin_seed: u64,
    pub weights: WeightSettings,
    /// Grid for the per-fold pilot fits; `None` derives it from each fold.
    pub pilot_grid: Option<Vec<f64>>,
    pub select: SelectConfig,
}

impl Default for RobustConfig {
    fn default() -> Self {
        Self {
            folds: DEFAULT_FOLDS,
            thin_seed: 0,
            weights: WeightSettings::default(),
            pilot_grid: None,
            select: SelectConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RobustFit {
    pub folds: ThinnedFolds,
    pub weights: AdaptiveWeights,
    pub selection: SelectionResult,
}

/// Thinning, weights, then two-stage selection on the adaptive-Lasso problem.
pub fn fit_robust(base: &FitProblem, cfg: &RobustConfig) -> Result<RobustFit, crate::Error> {
    let folds = thin(base.counts(), cfg.folds, cfg.thin_seed)?;
    let weights = compute_weights(base, &folds, cfg.pilot_grid.as_deref(), &cfg.select, cfg.weights)?;
    let problem = base.clone().with_weights(weights.w.clone())?;
    let selection = select::select_two_stage(&problem, &cfg.select)?;
    Ok(RobustFit { folds, weights, selection })
}
