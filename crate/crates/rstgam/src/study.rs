//! Monte Carlo studies: replicates over a grid of (strength, quantity) points,
//! run in parallel and aggregated in a fixed order.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use rstgam_core::simulate::{self, Domain, FitSettings, Metrics, ReplicateOutcome, Scenario};
use serde::{Deserialize, Serialize};

use crate::error::FormatError;
use crate::formats::reports::write_records;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "RSTGAM_THREADS";

pub const DESK_N: usize = 500;
pub const DESK_REPLICATES: usize = 20;
pub const FULL_N: usize = 2000;
pub const FULL_REPLICATES: usize = 100;
pub const N_TIMES: usize = 5;
/// Solver tolerance for study fits.
pub const STUDY_KKT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyPoint {
    pub strength: f64,
    pub quantity: usize,
}

/// Grid varied by a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StudyGrid {
    /// One point.
    Single,
    /// Strengths {1, 5, 15, 30, 50, 100} at 50 outliers (scaled with n).
    Strength,
    /// Quantities {1, 10, 50, 100, 150, 200} (scaled with n) at strength 30.
    Quantity,
}

/// Outlier count `q` at the full-scale `n = 2000`, rescaled to `n` (at least 1).
pub fn scaled_quantity(q: usize, n: usize) -> usize {
    if q == 0 {
        return 0;
    }
    ((q * n + FULL_N / 2) / FULL_N).clamp(1, n)
}

impl StudyGrid {
    pub fn points(self, n: usize, strength: f64, quantity: usize) -> Vec<StudyPoint> {
        match self {
            Self::Single => vec![StudyPoint { strength, quantity }],
            Self::Strength => simulate::STRENGTH_GRID
                .iter()
                .map(|&s| StudyPoint { strength: s, quantity: scaled_quantity(50, n) })
                .collect(),
            Self::Quantity => simulate::QUANTITY_GRID
                .iter()
                .map(|&q| StudyPoint { strength: 30.0, quantity: scaled_quantity(q, n) })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub domain: Domain,
    pub n: usize,
    pub n_times: usize,
    pub replicates: usize,
    pub seed: u64,
    pub points: Vec<StudyPoint>,
    pub settings: FitSettings,
}

impl StudyConfig {
    /// Desk-scale horseshoe study at one point.
    pub fn desk(strength: f64, quantity: usize, seed: u64) -> Self {
        let mut settings = FitSettings::default();
        settings.robust.select.solver.kkt_tol = STUDY_KKT_TOL;
        settings.robust.select.solver.record_trace = false;
        Self {
            domain: Domain::Horseshoe,
            n: DESK_N,
            n_times: N_TIMES,
            replicates: DESK_REPLICATES,
            seed,
            points: vec![StudyPoint { strength, quantity }],
            settings,
        }
    }

    /// Seed of replicate `r`, shared across grid points.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        simulate::sub_seed(self.seed, 1000 + r as u64)
    }

    pub fn scenario(&self, point: usize, r: usize) -> Scenario {
        let p = self.points[point];
        Scenario {
            domain: self.domain,
            n: self.n,
            n_times: self.n_times,
            strength: p.strength,
            quantity: p.quantity,
            seed: self.replicate_seed(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub point: usize,
    pub replicate: usize,
    pub outcome: ReplicateOutcome,
}

/// Mean metrics of one method at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub mise_beta: f64,
    pub mise_alpha: Vec<f64>,
    pub fpr: f64,
    pub fnr: f64,
}

/// One grid point: RST-GAM next to the baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub strength: f64,
    pub quantity: usize,
    pub rst: MethodSummary,
    pub nst: Option<MethodSummary>,
    pub replicates: usize,
    /// Replicates whose selected fits all reached the KKT tolerance.
    pub converged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub records: Vec<ReplicateRecord>,
    pub table: Vec<TableRow>,
}

/// `RSTGAM_THREADS` if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()).filter(|&n| n > 0)
}

fn summarize(ms: &[&Metrics]) -> MethodSummary {
    let k = ms.len().max(1) as f64;
    let p = ms.first().map_or(0, |m| m.mise_alpha.len());
    let mut out = MethodSummary { mise_beta: 0.0, mise_alpha: vec![0.0; p], fpr: 0.0, fnr: 0.0 };
    for m in ms {
        out.mise_beta += m.mise_beta / k;
        out.fpr += m.fpr / k;
        out.fnr += m.fnr / k;
        for (a, v) in out.mise_alpha.iter_mut().zip(&m.mise_alpha) {
            *a += v / k;
        }
    }
    out
}

/// Averages replicate records into one row per grid point.
pub fn aggregate(cfg: &StudyConfig, records: &[ReplicateRecord]) -> Vec<TableRow> {
    cfg.points
        .iter()
        .enumerate()
        .map(|(pi, point)| {
            let recs: Vec<&ReplicateRecord> = records.iter().filter(|r| r.point == pi).collect();
            let rst: Vec<&Metrics> = recs.iter().map(|r| &r.outcome.rst).collect();
            let nst: Vec<&Metrics> = recs.iter().filter_map(|r| r.outcome.nst.as_ref()).collect();
            TableRow {
                strength: point.strength,
                quantity: point.quantity,
                rst: summarize(&rst),
                nst: (!nst.is_empty()).then(|| summarize(&nst)),
                replicates: recs.len(),
                converged: recs.iter().filter(|r| r.outcome.converged).count(),
            }
        })
        .collect()
}

/// Runs every (point, replicate) pair; `threads = None` uses rayon's default.
pub fn run_study(cfg: &StudyConfig, threads: Option<usize>) -> Result<StudyResult, rstgam_core::Error> {
    let mesh = cfg.domain.mesh_for(cfg.n);
    let spatial = Arc::new(cfg.settings.spatial_model(mesh)?);
    let jobs: Vec<(usize, usize)> =
        (0..cfg.points.len()).flat_map(|p| (0..cfg.replicates).map(move |r| (p, r))).collect();
    let work = || {
        jobs.par_iter()
            .map(|&(point, replicate)| {
                let outcome = simulate::run_replicate(&cfg.scenario(point, replicate), &spatial, &cfg.settings)?;
                log::debug!("point {point} replicate {replicate} done");
                Ok(ReplicateRecord { point, replicate, outcome })
            })
            .collect::<Result<Vec<_>, rstgam_core::Error>>()
    };
    let records = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(work)?,
        None => work()?,
    };
    let table = aggregate(cfg, &records);
    Ok(StudyResult { records, table })
}

fn fmt(v: f64) -> String {
    v.to_string()
}

/// One row per grid point; baseline columns stay empty when it was not run.
pub fn write_metrics_csv(path: &Path, table: &[TableRow]) -> Result<(), FormatError> {
    let p = table.first().map_or(0, |r| r.rst.mise_alpha.len());
    let mut header: Vec<String> = vec!["strength".into(), "quantity".into()];
    for m in ["rst", "nst"] {
        header.push(format!("{m}_mise_beta"));
        header.extend((1..=p).map(|k| format!("{m}_mise_alpha{k}")));
    }
    header.extend(["rst_fpr", "rst_fnr", "replicates", "converged"].map(String::from));
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| {
            let mut v = vec![fmt(r.strength), r.quantity.to_string(), fmt(r.rst.mise_beta)];
            v.extend(r.rst.mise_alpha.iter().map(|&a| fmt(a)));
            match &r.nst {
                Some(n) => {
                    v.push(fmt(n.mise_beta));
                    v.extend(n.mise_alpha.iter().map(|&a| fmt(a)));
                }
                None => v.extend(std::iter::repeat_n(String::new(), p + 1)),
            }
            v.extend([fmt(r.rst.fpr), fmt(r.rst.fnr), r.replicates.to_string(), r.converged.to_string()]);
            v
        })
        .collect();
    write_records(path, &header, &rows)
}

/// One row per replicate and method.
pub fn write_replicates_csv(path: &Path, records: &[ReplicateRecord], cfg: &StudyConfig) -> Result<(), FormatError> {
    let p = records.first().map_or(0, |r| r.outcome.rst.mise_alpha.len());
    let mut header: Vec<String> =
        ["strength", "quantity", "replicate", "seed", "method", "lambda1", "lambda0", "mise_beta"].map(String::from).to_vec();
    header.extend((1..=p).map(|k| format!("mise_alpha{k}")));
    header.extend(["fpr", "fnr", "n_flagged", "converged"].map(String::from));
    let mut rows = Vec::new();
    for r in records {
        let pt = cfg.points[r.point];
        let o = &r.outcome;
        let mut row = |method: &str, l1: Option<f64>, l0: f64, m: &Metrics, slack: bool| {
            let mut v = vec![
                fmt(pt.strength),
                pt.quantity.to_string(),
                r.replicate.to_string(),
                o.seed.to_string(),
                method.to_string(),
                l1.map(fmt).unwrap_or_default(),
                fmt(l0),
                fmt(m.mise_beta),
            ];
            v.extend(m.mise_alpha.iter().map(|&a| fmt(a)));
            if slack {
                v.extend([fmt(m.fpr), fmt(m.fnr), m.n_flagged.to_string()]);
            } else {
                v.extend([String::new(), String::new(), String::new()]);
            }
            v.push(o.converged.to_string());
            rows.push(v);
        };
        row("RST-GAM", Some(o.lambda1), o.lambda0, &o.rst, true);
        if let (Some(m), Some(l0)) = (&o.nst, o.nst_lambda0) {
            row("NST-GAM", None, l0, m, false);
        }
    }
    write_records(path, &header, &rows)
}

/// Human-readable description of the true effects, written next to study outputs.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioMetadata {
    pub domain: Domain,
    pub beta: &'static str,
    pub alpha: [&'static str; simulate::N_COVARIATES],
    pub covariates: &'static str,
    pub outliers: &'static str,
}

pub fn scenario_metadata(domain: Domain) -> ScenarioMetadata {
    ScenarioMetadata {
        domain,
        beta: match domain {
            Domain::Horseshoe => "1.5 + 0.3 (a + d^2), a = signed arc length along the centre curve, d = signed offset",
            Domain::Irregular => "1.5 + 0.6 sin(0.8 x) cos(0.7 y)",
            Domain::Triangle => "1 + x - y",
        },
        alpha: [
            "0.5 sin(2 pi x)",
            "3 ((x - 0.5)^2 - 1/12)",
            "4 (x - 0.5)^3",
            "0.1 (x - 2)",
        ],
        covariates: "x1..x3 ~ U(0,1) fixed per location; x4 = 1 on the first day, then log(1 + cumulative past counts)",
        outliers: "`quantity` locations drawn without replacement; their counts on every day redrawn from Poisson(mean + strength)",
    }
}

#[derive(Serialize)]
struct TruthRow {
    loc_id: usize,
    x: f64,
    y: f64,
    beta: f64,
    outlier: u8,
}

/// `loc_id,x,y,beta,outlier` for an emitted panel.
pub fn write_truth(path: &Path, sim: &simulate::SimulatedPanel) -> Result<(), FormatError> {
    let rows = sim.panel.locations().iter().enumerate().map(|(i, u)| TruthRow {
        loc_id: i,
        x: u[0],
        y: u[1],
        beta: sim.beta[i],
        outlier: sim.outliers[i] as u8,
    });
    crate::formats::reports::write_csv(path, rows)
}
