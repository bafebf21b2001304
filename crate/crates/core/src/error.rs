use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("mesh has no triangles")]
    Empty,
    #[error("triangle {triangle} references missing vertex {vertex}")]
    VertexIndex { triangle: usize, vertex: usize },
    #[error("triangle {triangle} has zero area")]
    Degenerate { triangle: usize },
    #[error("triangles {triangle_a} and {triangle_b} are non-conforming")]
    NonConforming { triangle_a: usize, triangle_b: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BasisError {
    #[error("smoothness r = {smoothness} must be below degree d = {degree}")]
    SmoothnessTooHigh { degree: u32, smoothness: u32 },
    #[error("degree must be at least 1")]
    ZeroDegree,
    #[error("point ({x}, {y}) lies outside the triangulated domain")]
    OutsideDomain { x: f64, y: f64 },
    #[error("covariate is constant over the sample")]
    ConstantCovariate,
    #[error("{n} observations cannot support {n_basis} basis functions")]
    TooFewObservations { n: usize, n_basis: usize },
    #[error("spline order must be at least 1")]
    ZeroOrder,
    #[error("covariate sample contains non-finite values")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("window [{start}, {end}] exceeds the {n_times} available time points")]
    WindowOutOfRange { start: isize, end: usize, n_times: usize },
    #[error("location {index} lies outside the mesh")]
    LocationOutsideMesh { index: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
    #[error("weights must be finite and nonnegative")]
    InvalidWeights,
    #[error("negative or non-finite count at row {index}")]
    InvalidCount { index: usize },
    #[error("covariate {covariate}: {source}")]
    Covariate { covariate: usize, source: BasisError },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("objective became non-finite at iteration {iteration} ({cap_hits} linear-predictor cap hits)")]
    NonFinite { iteration: usize, cap_hits: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("initial slacks must be nonnegative")]
    InfeasibleInit,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectError {
    #[error("candidate grid is empty")]
    EmptyGrid,
    #[error("every candidate fit failed; last error: {0}")]
    AllCandidatesFailed(SolverError),
    #[error("degrees of freedom {df} exceed parameter count {params}")]
    DfExceedsParameters { df: usize, params: usize },
    #[error("rho must lie in [0, 1]")]
    InvalidRho,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RobustError {
    #[error("data thinning needs at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("pilot fit on fold {fold} failed: {source}")]
    Fold { fold: usize, source: SelectError },
    #[error("invalid weight settings: {0}")]
    InvalidSettings(&'static str),
    #[error(transparent)]
    Design(#[from] DesignError),
}

/// Crate-level error.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Robust(#[from] RobustError),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
