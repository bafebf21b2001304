//! `rstgam fit | select | thin | simulate`.
//!
//! Every command writes `config.json` with the fully resolved settings into its
//! output directory. Failures print a JSON error object on stderr, write the
//! same object to `error.json` when the output directory exists, and exit with
//! 2 (configuration), 3 (data) or 4 (solver did not converge).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rstgam_core::glm::{FitProblem, UnivariateSpec, WindowDesign};
use rstgam_core::mesh::TriMesh;
use rstgam_core::optim::{self, Acceleration, SolverConfig};
use rstgam_core::robust::{self, RobustConfig, WeightSettings};
use rstgam_core::select::{SelectConfig, SelectionResult};
use rstgam_core::simulate::{self, Domain, FitSettings, Scenario};
use serde::Serialize;

use crate::error::CliError;
use crate::formats::reports::{
    write_alphas, write_flagged, write_json, write_surface, write_trace, CoefficientsReport, PilotReport,
    SelectionReport,
};
use crate::formats::{load_panel, read_mesh, write_mesh, PanelFile};
use crate::study::{self, StudyConfig, StudyGrid, StudyPoint};

#[derive(Debug, Parser)]
#[command(name = "rstgam", version, about = "Robust spatiotemporal Poisson GAMs with outlier slacks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the robust model to a panel and write coefficients, flagged outliers and plot data.
    Fit(FitArgs),
    /// Run thinning, weights and tuning selection only; writes the selection report.
    Select(FitArgs),
    /// Split the counts of a panel into data-thinning folds.
    Thin(ThinArgs),
    /// Run a Monte Carlo study, or emit one simulated panel.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Panel CSV: loc_id,x,y,time,count,cov1..covp
    #[arg(long)]
    pub panel: PathBuf,
    /// Mesh file: `nv nt` header, vertex lines, triangle lines.
    #[arg(long)]
    pub mesh: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Time label to fit at; defaults to the last time in the panel.
    #[arg(long)]
    pub time: Option<i64>,
    /// Window length minus one; defaults to every day up to `--time`.
    #[arg(long)]
    pub t0: Option<usize>,
    /// Bernstein degree of the bivariate spline.
    #[arg(long, default_value_t = 2)]
    pub degree: u32,
    /// Cross-edge smoothness of the bivariate spline.
    #[arg(long, default_value_t = 1)]
    pub smoothness: u32,
    /// Order of the univariate B-splines (4 = cubic).
    #[arg(long, default_value_t = rstgam_core::usplines::DEFAULT_ORDER)]
    pub order: usize,
    /// Interior knots per covariate.
    #[arg(long, default_value_t = rstgam_core::usplines::DEFAULT_INTERIOR_KNOTS)]
    pub knots: usize,
    /// Data-thinning folds.
    #[arg(long, default_value_t = robust::DEFAULT_FOLDS)]
    pub folds: usize,
    /// EBIC exponent in [0, 1].
    #[arg(long, default_value_t = rstgam_core::select::DEFAULT_RHO)]
    pub rho: f64,
    /// Comma-separated λ₁ values; default is data-scaled.
    #[arg(long, value_delimiter = ',')]
    pub lambda1_grid: Option<Vec<f64>>,
    /// Comma-separated λ₀ values.
    #[arg(long, value_delimiter = ',')]
    pub lambda0_grid: Option<Vec<f64>>,
    /// Roughness penalty held fixed in the per-fold pilot fits.
    #[arg(long, default_value_t = robust::DEFAULT_PILOT_LAMBDA0)]
    pub pilot_lambda0: f64,
    /// Thinning seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub kkt_tol: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    /// Restart momentum in the solver.
    #[arg(long)]
    pub accel: bool,
    /// Also fit the slack-free baseline into `<out>/nst`.
    #[arg(long)]
    pub baseline: bool,
    /// Lattice side for `surface.csv`.
    #[arg(long, default_value_t = 60)]
    pub surface_grid: usize,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ThinArgs {
    #[command(flatten)]
    pub data: ThinData,
    #[arg(long, default_value_t = robust::DEFAULT_FOLDS)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ThinData {
    #[arg(long)]
    pub panel: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Simulation domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DomainArg {
    Horseshoe,
    Irregular,
    Triangle,
}

impl From<DomainArg> for Domain {
    fn from(d: DomainArg) -> Self {
        match d {
            DomainArg::Horseshoe => Domain::Horseshoe,
            DomainArg::Irregular => Domain::Irregular,
            DomainArg::Triangle => Domain::Triangle,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "horseshoe")]
    pub domain: DomainArg,
    /// Grid varied across study points.
    #[arg(long, value_enum, default_value = "single")]
    pub grid: StudyGrid,
    #[arg(long, default_value_t = study::DESK_N)]
    pub n: usize,
    #[arg(long, default_value_t = study::N_TIMES)]
    pub times: usize,
    #[arg(long, default_value_t = study::DESK_REPLICATES)]
    pub replicates: usize,
    /// Outlier shift for `--grid single`.
    #[arg(long, default_value_t = 30.0)]
    pub strength: f64,
    /// Outlier count for `--grid single`; default n/20.
    #[arg(long)]
    pub quantity: Option<usize>,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Full scale: n = 2000, 100 replicates.
    #[arg(long)]
    pub paper_scale: bool,
    /// Skip the slack-free baseline.
    #[arg(long)]
    pub no_baseline: bool,
    #[arg(long, default_value_t = study::STUDY_KKT_TOL)]
    pub kkt_tol: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = robust::DEFAULT_FOLDS)]
    pub folds: usize,
    /// Write one simulated panel, its mesh and its ground truth instead of running a study.
    #[arg(long)]
    pub emit_panel: bool,
    /// Resolve and echo the configuration without running.
    #[arg(long)]
    pub dry_run: bool,
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::config(format!("{}: {e}", dir.display())))
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::config(format!("{what} file {} does not exist", path.display())))
    }
}

impl ModelArgs {
    fn validate(&self) -> Result<(), CliError> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(CliError::config("--rho must lie in [0, 1]"));
        }
        if self.folds < 2 {
            return Err(CliError::config("--folds must be at least 2"));
        }
        if self.order < 2 {
            return Err(CliError::config("--order must be at least 2"));
        }
        if !(self.pilot_lambda0 >= 0.0 && self.pilot_lambda0.is_finite()) {
            return Err(CliError::config("--pilot-lambda0 must be nonnegative"));
        }
        if self.surface_grid == 0 {
            return Err(CliError::config("--surface-grid must be positive"));
        }
        for (name, g) in [("--lambda1-grid", &self.lambda1_grid), ("--lambda0-grid", &self.lambda0_grid)] {
            if let Some(g) = g {
                if g.is_empty() || g.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
                    return Err(CliError::config(format!("{name} needs nonnegative finite values")));
                }
            }
        }
        self.solver().validate().map_err(|e| CliError::config(e.to_string()))
    }

    fn solver(&self) -> SolverConfig {
        SolverConfig {
            max_iters: self.max_iters,
            kkt_tol: self.kkt_tol,
            accel: if self.accel { Acceleration::RestartMomentum } else { Acceleration::Off },
            record_trace: false,
            ..SolverConfig::default()
        }
    }

    fn robust(&self) -> RobustConfig {
        RobustConfig {
            folds: self.folds,
            thin_seed: self.seed,
            weights: WeightSettings { pilot_lambda0: self.pilot_lambda0, ..WeightSettings::default() },
            pilot_grid: None,
            select: SelectConfig {
                lambda1_grid: self.lambda1_grid.clone(),
                lambda0_grid: self.lambda0_grid.clone(),
                rho: self.rho,
                solver: self.solver(),
                ..SelectConfig::default()
            },
        }
    }
}

#[derive(Debug, Serialize)]
struct FitEcho<'a> {
    command: &'static str,
    data: &'a DataArgs,
    model: &'a ModelArgs,
    time_index: usize,
    t0: usize,
    univariate: UnivariateSpec,
    robust: RobustConfig,
    version: &'static str,
}

struct Prepared {
    file: PanelFile,
    design: Arc<WindowDesign>,
    t: usize,
    t0: usize,
}

fn prepare(args: &FitArgs) -> Result<Prepared, CliError> {
    args.model.validate()?;
    require_file(&args.data.panel, "panel")?;
    require_file(&args.data.mesh, "mesh")?;
    let mesh: TriMesh = read_mesh(&args.data.mesh)?;
    let file = load_panel(&args.data.panel)?;
    let t = match args.model.time {
        None => file.times.len() - 1,
        Some(label) => file
            .times
            .iter()
            .position(|&x| x == label)
            .ok_or_else(|| CliError::config(format!("--time {label} is not a time in the panel")))?,
    };
    let t0 = args.model.t0.unwrap_or(t);
    if t0 > t {
        return Err(CliError::config(format!("--t0 {t0} reaches before the first day (only {} days up to --time)", t + 1)));
    }
    let spatial = FitSettings { degree: args.model.degree, smoothness: args.model.smoothness, ..FitSettings::default() }
        .spatial_model(mesh)?;
    let spec = UnivariateSpec { order: args.model.order, n_interior_knots: args.model.knots };
    let design = Arc::new(WindowDesign::assemble(&file.panel, Arc::new(spatial), t, t0, spec).map_err(rstgam_core::Error::from)?);
    Ok(Prepared { file, design, t, t0 })
}

fn echo_fit(command: &'static str, args: &FitArgs, p: &Prepared) -> Result<(), CliError> {
    let echo = FitEcho {
        command,
        data: &args.data,
        model: &args.model,
        time_index: p.t,
        t0: p.t0,
        univariate: UnivariateSpec { order: args.model.order, n_interior_knots: args.model.knots },
        robust: args.model.robust(),
        version: env!("CARGO_PKG_VERSION"),
    };
    Ok(write_json(&args.data.out.join("config.json"), &echo)?)
}

/// Thinning, weights and two-stage selection.
fn select_robust(args: &FitArgs, p: &Prepared) -> Result<(robust::RobustFit, RobustConfig), CliError> {
    let cfg = args.model.robust();
    let fit = robust::fit_robust(&FitProblem::new(p.design.clone()), &cfg)?;
    Ok((fit, cfg))
}

fn write_fit_artifacts(
    dir: &Path,
    method: &'static str,
    problem: &FitProblem,
    lambdas: (f64, f64),
    fit: &optim::FitResult,
    file: &PanelFile,
    model: &ModelArgs,
) -> Result<bool, CliError> {
    let design = problem.design();
    let report = CoefficientsReport::new(method, design, fit, lambdas, problem.weights(), &file.covariate_names);
    write_json(&dir.join("coefficients.json"), &report)?;
    if problem.has_slack() {
        let n = write_flagged(&dir.join("flagged.csv"), &file.ids, fit.coefficients.xi(), rstgam_core::select::DEFAULT_XI_ZERO_TOL)?;
        log::info!("{method}: {n} locations flagged");
    }
    write_surface(&dir.join("surface.csv"), design, &fit.coefficients, model.surface_grid)?;
    write_alphas(dir, design, &fit.coefficients, 101)?;
    // Re-solve at the chosen tuning with the trace on, from the same start the sweep used for its first candidate.
    let mut solver = model.solver();
    solver.record_trace = true;
    let tuned = problem.clone().with_lambdas(lambdas.0, lambdas.1);
    let (_, trace) = optim::solve(&tuned, &tuned.zero_coefficients(), &solver).map_err(rstgam_core::Error::from)?;
    write_trace(&dir.join("trace.csv"), &trace)?;
    Ok(fit.converged)
}

fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    ensure_dir(&args.data.out)?;
    let p = prepare(args)?;
    echo_fit("fit", args, &p)?;
    let (rfit, cfg) = select_robust(args, &p)?;
    let sel: &SelectionResult = &rfit.selection;
    write_json(
        &args.data.out.join("selection.json"),
        &SelectionReport::robust(sel, cfg.select.rho, PilotReport::new(&rfit.weights, cfg.folds, cfg.thin_seed)),
    )?;
    let problem = FitProblem::new(p.design.clone()).with_weights(rfit.weights.w.clone()).map_err(rstgam_core::Error::from)?;
    let mut converged = write_fit_artifacts(
        &args.data.out,
        "RST-GAM",
        &problem,
        (sel.lambda0_star, sel.lambda1_star),
        &sel.fit,
        &p.file,
        &args.model,
    )?;
    if args.model.baseline {
        let dir = args.data.out.join("nst");
        ensure_dir(&dir)?;
        let sweep = simulate::fit_nst_gam(p.design.clone(), &cfg.select).map_err(rstgam_core::Error::from)?;
        write_json(&dir.join("selection.json"), &SelectionReport::baseline(&sweep, cfg.select.rho))?;
        let base = FitProblem::without_slack(p.design.clone());
        converged &= write_fit_artifacts(&dir, "NST-GAM", &base, (sweep.best_lambda, 0.0), &sweep.fit, &p.file, &args.model)?;
    }
    if !converged {
        return Err(CliError::solver(format!(
            "solver stopped at max_iters = {} before reaching kkt_tol = {:e}; artifacts hold the best iterate",
            args.model.max_iters, args.model.kkt_tol
        )));
    }
    Ok(())
}

fn cmd_select(args: &FitArgs) -> Result<(), CliError> {
    ensure_dir(&args.data.out)?;
    let p = prepare(args)?;
    echo_fit("select", args, &p)?;
    let (rfit, cfg) = select_robust(args, &p)?;
    write_json(
        &args.data.out.join("selection.json"),
        &SelectionReport::robust(&rfit.selection, cfg.select.rho, PilotReport::new(&rfit.weights, cfg.folds, cfg.thin_seed)),
    )?;
    if args.model.baseline {
        let sweep = simulate::fit_nst_gam(p.design.clone(), &cfg.select).map_err(rstgam_core::Error::from)?;
        write_json(&args.data.out.join("selection_nst.json"), &SelectionReport::baseline(&sweep, cfg.select.rho))?;
    }
    if !rfit.selection.fit.converged {
        return Err(CliError::solver("selected fit did not reach kkt_tol"));
    }
    Ok(())
}

fn cmd_thin(args: &ThinArgs) -> Result<(), CliError> {
    ensure_dir(&args.data.out)?;
    if args.folds < 2 {
        return Err(CliError::config("--folds must be at least 2"));
    }
    require_file(&args.data.panel, "panel")?;
    write_json(&args.data.out.join("config.json"), &serde_json::json!({ "command": "thin", "args": args }))?;
    let file = load_panel(&args.data.panel)?;
    let folds = robust::thin(file.panel.counts(), args.folds, args.seed).map_err(rstgam_core::Error::from)?;
    for (q, counts) in folds.folds.iter().enumerate() {
        let panel = file.panel.with_counts(counts.clone()).map_err(rstgam_core::Error::from)?;
        let out = PanelFile { panel, ..file.clone() };
        out.save(&args.data.out.join(format!("fold_{}.csv", q + 1)))?;
    }
    Ok(())
}

/// Resolved study configuration for `simulate`.
pub fn study_config(args: &SimulateArgs) -> Result<StudyConfig, CliError> {
    let (n, replicates) = if args.paper_scale { (study::FULL_N, study::FULL_REPLICATES) } else { (args.n, args.replicates) };
    if n < 10 || args.times == 0 || replicates == 0 {
        return Err(CliError::config("--n must be at least 10, --times and --replicates positive"));
    }
    if !(args.strength >= 0.0 && args.strength.is_finite()) {
        return Err(CliError::config("--strength must be nonnegative"));
    }
    let quantity = args.quantity.unwrap_or(n / 20);
    if quantity > n {
        return Err(CliError::config("--quantity exceeds --n"));
    }
    let mut settings = FitSettings { baseline: !args.no_baseline, ..FitSettings::default() };
    settings.robust.folds = args.folds;
    settings.robust.select.solver.kkt_tol = args.kkt_tol;
    settings.robust.select.solver.max_iters = args.max_iters;
    settings.robust.select.solver.record_trace = false;
    settings.robust.select.solver.validate().map_err(|e| CliError::config(e.to_string()))?;
    if args.folds < 2 {
        return Err(CliError::config("--folds must be at least 2"));
    }
    let points: Vec<StudyPoint> = args.grid.points(n, args.strength, quantity);
    Ok(StudyConfig { domain: args.domain.into(), n, n_times: args.times, replicates, seed: args.seed, points, settings })
}

#[derive(Debug, Serialize)]
struct StudyEcho<'a> {
    command: &'static str,
    args: &'a SimulateArgs,
    study: &'a StudyConfig,
    threads: Option<usize>,
    version: &'static str,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    ensure_dir(&args.out)?;
    let cfg = study_config(args)?;
    let threads = study::threads_from_env();
    write_json(
        &args.out.join("config.json"),
        &StudyEcho { command: "simulate", args, study: &cfg, threads, version: env!("CARGO_PKG_VERSION") },
    )?;
    write_json(&args.out.join("scenario.json"), &study::scenario_metadata(cfg.domain))?;
    if args.dry_run {
        return Ok(());
    }
    if args.emit_panel {
        let mesh = cfg.domain.mesh_for(cfg.n);
        let sc: Scenario = cfg.scenario(0, 0);
        let sim = simulate::simulate(&sc, &mesh);
        PanelFile::from_panel(sim.panel.clone()).save(&args.out.join("panel.csv"))?;
        write_mesh(&args.out.join("mesh.txt"), &mesh)?;
        study::write_truth(&args.out.join("truth.csv"), &sim)?;
        return Ok(());
    }
    let result = study::run_study(&cfg, threads)?;
    study::write_metrics_csv(&args.out.join("metrics.csv"), &result.table)?;
    study::write_replicates_csv(&args.out.join("replicates.csv"), &result.records, &cfg)?;
    let failed = result.records.iter().filter(|r| !r.outcome.converged).count();
    if failed > 0 {
        log::warn!("{failed} replicate(s) had a selected fit that did not reach kkt_tol");
    }
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Select(a) => cmd_select(a),
        Command::Thin(a) => cmd_thin(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

fn out_dir(cli: &Cli) -> &Path {
    match &cli.command {
        Command::Fit(a) | Command::Select(a) => &a.data.out,
        Command::Thin(a) => &a.data.out,
        Command::Simulate(a) => &a.out,
    }
}

/// Runs the command and reports failures; returns the process exit code.
pub fn main_with(cli: &Cli) -> i32 {
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let json = e.to_json();
            eprintln!("{json}");
            let dir = out_dir(cli);
            if dir.is_dir() {
                let _ = std::fs::write(dir.join("error.json"), format!("{json}\n"));
            }
            e.kind.exit_code()
        }
    }
}
