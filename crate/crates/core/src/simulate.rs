//! Synthetic contaminated Poisson panels, study meshes, scoring, and the
//! replicate driver used by the simulation studies.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::bpst::BivariateBasis;
use crate::error::{Error, MeshError, SelectError};
use crate::glm::{Coefficients, FitProblem, PanelData, SpatialModel, UnivariateSpec, WindowDesign};
use crate::math;
use crate::mesh::{Point, TriMesh};
use crate::robust::{self, RobustConfig};
use crate::select::{self, SelectConfig, SweepResult};

/// Radius of the horseshoe centre curve.
pub const HORSESHOE_R: f64 = 0.5;
/// Inner radius of the bend.
pub const HORSESHOE_R0: f64 = 0.1;
pub const HORSESHOE_ARM: f64 = 3.0;
pub const HORSESHOE_HALF_WIDTH: f64 = HORSESHOE_R - HORSESHOE_R0;

pub const N_COVARIATES: usize = 4;

/// Strength grid of the contamination study.
pub const STRENGTH_GRID: [f64; 6] = [1.0, 5.0, 15.0, 30.0, 50.0, 100.0];
/// Quantity grid of the contamination study.
pub const QUANTITY_GRID: [usize; 6] = [1, 10, 50, 100, 150, 200];

/// Mixes a seed with a stream tag (SplitMix64 finalizer).
pub fn sub_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_LOCATIONS: u64 = 1;
const STREAM_COVARIATES: u64 = 2;
const STREAM_COUNTS: u64 = 3;
const STREAM_OUTLIER_PICK: u64 = 4;
const STREAM_OUTLIER_COUNTS: u64 = 5;
const STREAM_THINNING: u64 = 6;

/// Along-curve and signed cross-curve coordinates `(a, d)` of a point.
pub fn horseshoe_coords(u: Point) -> (f64, f64) {
    let (x, y) = (u[0], u[1]);
    let q = PI * HORSESHOE_R / 2.0;
    if x >= 0.0 && y > 0.0 {
        (q + x, y - HORSESHOE_R)
    } else if x >= 0.0 {
        (-q - x, -HORSESHOE_R - y)
    } else {
        (-math::atan(y / x) * HORSESHOE_R, math::sqrt(x * x + y * y) - HORSESHOE_R)
    }
}

/// Inverse of [`horseshoe_coords`].
pub fn horseshoe_point(a: f64, d: f64) -> Point {
    let q = PI * HORSESHOE_R / 2.0;
    if a >= q {
        [a - q, HORSESHOE_R + d]
    } else if a <= -q {
        [-a - q, -HORSESHOE_R - d]
    } else {
        let phi = PI - a / HORSESHOE_R;
        let rad = HORSESHOE_R + d;
        [rad * math::cos(phi), rad * math::sin(phi)]
    }
}

pub fn horseshoe_contains(u: Point) -> bool {
    let (_, d) = horseshoe_coords(u);
    d.abs() <= HORSESHOE_HALF_WIDTH && u[0] <= HORSESHOE_ARM
}

/// Structured triangulation of the horseshoe: `arm` segments along each arm,
/// `arc` along the bend, `across` over the tube width.
pub fn horseshoe_mesh(arm: usize, arc: usize, across: usize) -> Result<TriMesh, MeshError> {
    let q = PI * HORSESHOE_R / 2.0;
    let mut along = Vec::new();
    for j in 0..arm {
        along.push(-q - HORSESHOE_ARM + HORSESHOE_ARM * j as f64 / arm as f64);
    }
    for j in 0..arc {
        along.push(-q + 2.0 * q * j as f64 / arc as f64);
    }
    for j in 0..=arm {
        along.push(q + HORSESHOE_ARM * j as f64 / arm as f64);
    }
    let na = along.len();
    let nd = across + 1;
    let mut vertices = Vec::with_capacity(na * nd);
    for &a in &along {
        for k in 0..nd {
            let d = -HORSESHOE_HALF_WIDTH + 2.0 * HORSESHOE_HALF_WIDTH * k as f64 / across as f64;
            vertices.push(horseshoe_point(a, d));
        }
    }
    let mut triangles = Vec::with_capacity(2 * (na - 1) * across);
    for i in 0..na - 1 {
        for k in 0..across {
            let v00 = i * nd + k;
            let v01 = v00 + 1;
            let v10 = v00 + nd;
            let v11 = v10 + 1;
            if (i + k) % 2 == 0 {
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            } else {
                triangles.push([v00, v10, v01]);
                triangles.push([v10, v11, v01]);
            }
        }
    }
    TriMesh::new(vertices, triangles)
}

/// Desk-scale study mesh: 45 vertices, 56 triangles.
pub fn default_horseshoe_mesh() -> TriMesh {
    horseshoe_mesh(5, 4, 2).expect("horseshoe mesh is valid").with_grid_index(12)
}

/// Full-scale study mesh: 87 vertices, 112 triangles.
pub fn fine_horseshoe_mesh() -> TriMesh {
    horseshoe_mesh(10, 8, 2).expect("horseshoe mesh is valid").with_grid_index(16)
}

/// Sample size from which studies switch to the fine horseshoe mesh.
pub const FINE_MESH_MIN_N: usize = 1500;

/// Jittered-grid triangulation of an L-shaped region in `[0, w] × [0, h]`
/// with the top-right quarter removed; `nx × ny` cells of which the removed
/// quarter is `⌈nx/2⌉.. × ⌈ny/2⌉..`.
pub fn irregular_mesh(nx: usize, ny: usize, width: f64, height: f64, jitter: f64, seed: u64) -> Result<TriMesh, MeshError> {
    let (hx, hy) = (width / nx as f64, height / ny as f64);
    let keep = |i: usize, j: usize| !(i >= nx.div_ceil(2) && j >= ny.div_ceil(2));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut index = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            let cells = [(i.wrapping_sub(1), j.wrapping_sub(1)), (i, j.wrapping_sub(1)), (i.wrapping_sub(1), j), (i, j)];
            let inside = |&(ci, cj): &(usize, usize)| ci < nx && cj < ny && keep(ci, cj);
            let n_in = cells.iter().filter(|c| inside(c)).count();
            let (jx, jy): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if n_in == 0 {
                continue;
            }
            let mut p = [i as f64 * hx, j as f64 * hy];
            if n_in == 4 {
                p[0] += jitter * hx * jx;
                p[1] += jitter * hy * jy;
            }
            index[j * (nx + 1) + i] = vertices.len();
            vertices.push(p);
        }
    }
    let mut triangles = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if !keep(i, j) {
                continue;
            }
            let v = |a: usize, b: usize| index[b * (nx + 1) + a];
            let (v00, v10, v01, v11) = (v(i, j), v(i + 1, j), v(i, j + 1), v(i + 1, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            } else {
                triangles.push([v00, v10, v01]);
                triangles.push([v10, v11, v01]);
            }
        }
    }
    TriMesh::new(vertices, triangles)
}

/// Mesh used by the county-style study.
pub fn default_irregular_mesh() -> TriMesh {
    irregular_mesh(8, 6, 4.0, 3.0, 0.2, 17).expect("irregular mesh is valid").with_grid_index(12)
}

/// The unit right triangle.
pub fn single_triangle_mesh() -> TriMesh {
    TriMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).expect("valid triangle")
}

/// Shape of the true spatial effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Domain {
    /// Horseshoe with `β = 1.5 + 0.3 (a + d²)` in curve coordinates.
    Horseshoe,
    /// L-shaped jittered grid with `β = 1.5 + 0.6 sin(0.8x) cos(0.7y)`.
    Irregular,
    /// Unit triangle with `β = 1 + x − y`.
    Triangle,
}

impl Domain {
    /// Study mesh for `n` locations.
    pub fn mesh_for(self, n: usize) -> TriMesh {
        match self {
            Domain::Horseshoe if n >= FINE_MESH_MIN_N => fine_horseshoe_mesh(),
            _ => self.mesh(),
        }
    }

    pub fn mesh(self) -> TriMesh {
        match self {
            Domain::Horseshoe => default_horseshoe_mesh(),
            Domain::Irregular => default_irregular_mesh(),
            Domain::Triangle => single_triangle_mesh(),
        }
    }

    pub fn beta(self, u: Point) -> f64 {
        match self {
            Domain::Horseshoe => {
                let (a, d) = horseshoe_coords(u);
                1.5 + 0.3 * (a + d * d)
            }
            Domain::Irregular => 1.5 + 0.6 * math::sin(0.8 * u[0]) * math::cos(0.7 * u[1]),
            Domain::Triangle => 1.0 + u[0] - u[1],
        }
    }
}

/// True covariate effects: sine, centered quadratic, cubic, linear.
pub fn alpha_true(k: usize, x: f64) -> f64 {
    match k {
        0 => 0.5 * math::sin(2.0 * PI * x),
        1 => 3.0 * ((x - 0.5) * (x - 0.5) - 1.0 / 12.0),
        2 => 4.0 * (x - 0.5) * (x - 0.5) * (x - 0.5),
        3 => 0.1 * (x - 2.0),
        _ => panic!("only {N_COVARIATES} covariates are simulated"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scenario {
    pub domain: Domain,
    pub n: usize,
    pub n_times: usize,
    /// Shift added to the mean of contaminated locations.
    pub strength: f64,
    /// Number of contaminated locations.
    pub quantity: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn horseshoe(n: usize, n_times: usize, seed: u64, strength: f64, quantity: usize) -> Self {
        Self { domain: Domain::Horseshoe, n, n_times, strength, quantity, seed }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Canonical horseshoe scenario.
pub fn gen_horseshoe_scenario(n: usize, n_times: usize, seed: u64, strength: f64, quantity: usize) -> Scenario {
    Scenario::horseshoe(n, n_times, seed, strength, quantity)
}

/// A generated panel together with its ground truth.
#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    pub panel: PanelData,
    /// Clean means `μ_it`, location-major.
    pub mean: Vec<f64>,
    pub outliers: Vec<bool>,
    pub beta: Vec<f64>,
    pub domain: Domain,
}

/// Draws `n` points uniformly over the triangulated area.
pub fn sample_locations<R: Rng>(mesh: &TriMesh, n: usize, rng: &mut R) -> Vec<Point> {
    let mut cum = Vec::with_capacity(mesh.triangles().len());
    let mut acc = 0.0;
    for t in 0..mesh.triangles().len() {
        acc += mesh.triangle_area(t);
        cum.push(acc);
    }
    (0..n)
        .map(|_| {
            let r = rng.random::<f64>() * acc;
            let t = cum.partition_point(|&c| c <= r).min(cum.len() - 1);
            let (mut s, mut v): (f64, f64) = (rng.random(), rng.random());
            if s + v > 1.0 {
                s = 1.0 - s;
                v = 1.0 - v;
            }
            mesh.from_barycentric(t, [1.0 - s - v, s, v])
        })
        .collect()
}

fn poisson<R: Rng>(mu: f64, rng: &mut R) -> f64 {
    if mu <= 0.0 {
        return 0.0;
    }
    Poisson::new(mu).expect("finite positive mean").sample(rng)
}

/// Clean panel: `X₁..₃ ~ U(0,1)` fixed in time, `X₄` equal to 1 on the first
/// day and `log(1 + Σ_{s<t} Y_is)` afterwards, counts drawn day by day.
pub fn generate_clean(scenario: &Scenario, mesh: &TriMesh) -> SimulatedPanel {
    let (n, tn, p) = (scenario.n, scenario.n_times, N_COVARIATES);
    let mut rng_loc = ChaCha8Rng::seed_from_u64(sub_seed(scenario.seed, STREAM_LOCATIONS));
    let mut rng_cov = ChaCha8Rng::seed_from_u64(sub_seed(scenario.seed, STREAM_COVARIATES));
    let mut rng_y = ChaCha8Rng::seed_from_u64(sub_seed(scenario.seed, STREAM_COUNTS));
    let locations = sample_locations(mesh, n, &mut rng_loc);
    let beta: Vec<f64> = locations.iter().map(|&u| scenario.domain.beta(u)).collect();
    let mut covariates = vec![0.0; n * tn * p];
    let mut counts = vec![0.0; n * tn];
    let mut mean = vec![0.0; n * tn];
    for i in 0..n {
        let fixed: [f64; 3] = [rng_cov.random(), rng_cov.random(), rng_cov.random()];
        let mut cumulative = 0.0;
        for t in 0..tn {
            let x4 = if t == 0 { 1.0 } else { math::ln(1.0 + cumulative) };
            let row = &mut covariates[(i * tn + t) * p..(i * tn + t + 1) * p];
            row[..3].copy_from_slice(&fixed);
            row[3] = x4;
            let eta = beta[i] + (0..p).map(|k| alpha_true(k, row[k])).sum::<f64>();
            let mu = math::exp(eta);
            let y = poisson(mu, &mut rng_y);
            mean[i * tn + t] = mu;
            counts[i * tn + t] = y;
            cumulative += y;
        }
    }
    let panel = PanelData::new(locations, tn, p, counts, covariates).expect("consistent panel");
    SimulatedPanel { panel, mean, outliers: vec![false; n], beta, domain: scenario.domain }
}

/// Picks `quantity` locations uniformly without replacement and redraws all
/// their counts from `Poisson(μ_it + strength)`. Covariates keep the clean history.
pub fn inject_outliers(sim: &mut SimulatedPanel, scenario: &Scenario) {
    let n = sim.panel.n_locations();
    let k = scenario.quantity.min(n);
    let mut pick = ChaCha8Rng::seed_from_u64(sub_seed(scenario.seed, STREAM_OUTLIER_PICK));
    let mut rng_y = ChaCha8Rng::seed_from_u64(sub_seed(scenario.seed, STREAM_OUTLIER_COUNTS));
    let mut chosen: Vec<usize> = rand::seq::index::sample(&mut pick, n, k).into_vec();
    chosen.sort_unstable();
    sim.outliers = vec![false; n];
    if scenario.strength <= 0.0 {
        return;
    }
    let tn = sim.panel.n_times();
    let mut counts = sim.panel.counts().to_vec();
    for &i in &chosen {
        sim.outliers[i] = true;
        for t in 0..tn {
            counts[i * tn + t] = poisson(sim.mean[i * tn + t] + scenario.strength, &mut rng_y);
        }
    }
    sim.panel = sim.panel.with_counts(counts).expect("counts stay valid");
}

/// Clean panel plus contamination.
pub fn simulate(scenario: &Scenario, mesh: &TriMesh) -> SimulatedPanel {
    let mut sim = generate_clean(scenario, mesh);
    inject_outliers(&mut sim, scenario);
    sim
}

/// Standard small instance: 50 locations on the unit triangle, 3 days, one
/// covariate, window of all three days, `λ₀ = 0.1`, `λ₁ = 2`, unit weights.
pub fn small_instance(seed: u64) -> FitProblem {
    let mesh = single_triangle_mesh();
    let n = 50;
    let tn = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let locations = sample_locations(&mesh, n, &mut rng);
    let mut counts = Vec::with_capacity(n * tn);
    let mut covariates = Vec::with_capacity(n * tn);
    for (i, &u) in locations.iter().enumerate() {
        for _ in 0..tn {
            let x: f64 = rng.random();
            let shift = if i % 10 == 0 { 8.0 } else { 0.0 };
            let mu = math::exp(Domain::Triangle.beta(u) + alpha_true(0, x)) + shift;
            covariates.push(x);
            counts.push(poisson(mu, &mut rng));
        }
    }
    let panel = PanelData::new(locations, tn, 1, counts, covariates).expect("consistent panel");
    let spatial = Arc::new(SpatialModel::new(BivariateBasis::new(mesh, 2, 1).expect("valid basis")));
    let design = WindowDesign::assemble(&panel, spatial, tn - 1, tn - 1, UnivariateSpec::default())
        .expect("window inside panel");
    FitProblem::new(Arc::new(design)).with_lambdas(0.1, 2.0)
}

/// Estimation accuracy and detection rates of one fit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metrics {
    pub mise_beta: f64,
    pub mise_alpha: Vec<f64>,
    pub fpr: f64,
    pub fnr: f64,
    pub n_flagged: usize,
}

pub fn flag_outliers(xi: &[f64], tol: f64) -> Vec<bool> {
    xi.iter().map(|&x| x > tol).collect()
}

/// `(FPR, FNR)`; a rate with an empty reference class is 0.
pub fn detection_rates(flags: &[bool], truth: &[bool]) -> (f64, f64) {
    let (mut fp, mut neg, mut fneg, mut pos) = (0usize, 0usize, 0usize, 0usize);
    for (&f, &t) in flags.iter().zip(truth) {
        if t {
            pos += 1;
            fneg += (!f) as usize;
        } else {
            neg += 1;
            fp += f as usize;
        }
    }
    let rate = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (rate(fp, neg), rate(fneg, pos))
}

/// Scores a fit against the truth. The intercept is shared between `β` and the
/// centered `α̂_k`, so `β` is compared after absorbing the window means of the
/// true `α_k`, and each `α_k` after removing its window mean.
pub fn score(design: &WindowDesign, c: &Coefficients, sim: &SimulatedPanel, xi_zero_tol: f64) -> Metrics {
    let panel = &sim.panel;
    let (n, p) = (panel.n_locations(), panel.n_covariates());
    let (start, w) = (design.start(), design.window_len());
    let cells = (n * w) as f64;
    let mut alpha_mean = vec![0.0; p];
    for i in 0..n {
        for s in start..start + w {
            for (k, m) in alpha_mean.iter_mut().enumerate() {
                *m += alpha_true(k, panel.covariate(i, s, k));
            }
        }
    }
    alpha_mean.iter_mut().for_each(|m| *m /= cells);
    let offset: f64 = alpha_mean.iter().sum();
    let xb = design.bivariate_design();
    let mut mise_beta = 0.0;
    for i in 0..n {
        let fitted = math::dot(xb.row(i), c.gamma_star());
        let d = fitted - (sim.beta[i] + offset);
        mise_beta += d * d;
    }
    mise_beta /= n as f64;
    let theta = c.theta();
    let mut mise_alpha = vec![0.0; p];
    for i in 0..n {
        for s in start..start + w {
            for k in 0..p {
                let x = panel.covariate(i, s, k);
                let d = design.alpha(k, theta, x) - (alpha_true(k, x) - alpha_mean[k]);
                mise_alpha[k] += d * d;
            }
        }
    }
    mise_alpha.iter_mut().for_each(|m| *m /= cells);
    let flags = if c.xi().is_empty() { vec![false; n] } else { flag_outliers(c.xi(), xi_zero_tol) };
    let (fpr, fnr) = detection_rates(&flags, &sim.outliers);
    Metrics { mise_beta, mise_alpha, fpr, fnr, n_flagged: flags.iter().filter(|&&f| f).count() }
}

/// Baseline without slacks: `λ₀` chosen by EBIC with the stage-two machinery.
pub fn fit_nst_gam(design: Arc<WindowDesign>, cfg: &SelectConfig) -> Result<SweepResult, SelectError> {
    let base = FitProblem::without_slack(design);
    let grid = cfg.lambda0_grid.clone().unwrap_or_else(select::default_lambda0_grid);
    select::select_lambda0(&base, 0.0, &grid, cfg, None)
}

/// Model and fitting knobs for a study.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitSettings {
    pub degree: u32,
    pub smoothness: u32,
    pub univariate: UnivariateSpec,
    /// Window length minus one; `None` pools every simulated day.
    pub t0: Option<usize>,
    pub robust: RobustConfig,
    /// Also fit the slack-free baseline.
    pub baseline: bool,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            degree: 2,
            smoothness: 1,
            univariate: UnivariateSpec::default(),
            t0: None,
            robust: RobustConfig::default(),
            baseline: true,
        }
    }
}

impl FitSettings {
    pub fn spatial_model(&self, mesh: TriMesh) -> Result<SpatialModel, Error> {
        Ok(SpatialModel::new(BivariateBasis::new(mesh, self.degree, self.smoothness)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReplicateOutcome {
    pub seed: u64,
    pub rst: Metrics,
    pub nst: Option<Metrics>,
    pub lambda1: f64,
    pub lambda0: f64,
    pub nst_lambda0: Option<f64>,
    pub converged: bool,
    /// Mean adaptive weight over true outliers and over clean locations.
    pub mean_weight_outlier: f64,
    pub mean_weight_clean: f64,
}

/// Simulates one panel from `scenario` and fits it at the last day.
pub fn run_replicate(scenario: &Scenario, spatial: &Arc<SpatialModel>, settings: &FitSettings) -> Result<ReplicateOutcome, Error> {
    let sim = simulate(scenario, spatial.basis.mesh());
    let t = scenario.n_times - 1;
    let t0 = settings.t0.unwrap_or(t).min(t);
    let design = Arc::new(WindowDesign::assemble(&sim.panel, spatial.clone(), t, t0, settings.univariate)?);
    let mut rcfg = settings.robust.clone();
    rcfg.thin_seed = sub_seed(scenario.seed, STREAM_THINNING);
    let rfit = robust::fit_robust(&FitProblem::new(design.clone()), &rcfg)?;
    let sel = &rfit.selection;
    let rst = score(&design, &sel.fit.coefficients, &sim, rcfg.select.xi_zero_tol);
    let mut converged = sel.fit.converged;
    let (nst, nst_lambda0) = if settings.baseline {
        let s = fit_nst_gam(design.clone(), &rcfg.select)?;
        converged &= s.fit.converged;
        (Some(score(&design, &s.fit.coefficients, &sim, rcfg.select.xi_zero_tol)), Some(s.best_lambda))
    } else {
        (None, None)
    };
    let mean_of = |want: bool| {
        let v: Vec<f64> = rfit.weights.w.iter().zip(&sim.outliers).filter(|(_, &o)| o == want).map(|(&w, _)| w).collect();
        if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 }
    };
    Ok(ReplicateOutcome {
        seed: scenario.seed,
        rst,
        nst,
        lambda1: sel.lambda1_star,
        lambda0: sel.lambda0_star,
        nst_lambda0,
        converged,
        mean_weight_outlier: mean_of(true),
        mean_weight_clean: mean_of(false),
    })
}
