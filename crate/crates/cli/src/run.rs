//! End-to-end runs: manufacture data, add noise, invert, write artifacts.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{debug, info};
use quasirev::cip::{cip_iterate, CipProblem, CipState};
use quasirev::fields::{sample_space_time, sample_spatial};
use quasirev::forward::{generate_coefficient_data, generate_data};
use quasirev::phantoms::{eval_c_background, eval_f, Phantom};
use quasirev::qr::{solve_qr, QrProblem};
use quasirev::{apply_noise, BoundaryKind, BoundarySeries, Error, GridSpec, SpatialField};

use crate::config::{ConfigError, Mode, RunConfig};
use crate::metrics::{metric_extreme_errors, relative_l2_error, write_metrics_csv, ExtremeRow};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Solver(Error),
    Io(PathBuf, std::io::Error),
}

impl RunError {
    /// 1 for configuration problems, 2 for solver failures, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Solver(Error::Config(_)) => 1,
            RunError::Solver(Error::Io(_)) => 3,
            RunError::Solver(_) => 2,
            RunError::Io(..) => 3,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Solver(e) => write!(f, "solver failure: {e}"),
            RunError::Io(path, e) => write!(f, "cannot write {}: {e}", path.display()),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Solver(e)
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub metrics: Vec<ExtremeRow>,
    pub l2_error: f64,
    /// `e_1 .. e_{n*}` in coefficient mode, empty otherwise.
    pub e_history: Vec<f64>,
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self, RunError> {
        std::fs::create_dir_all(dir).map_err(|e| RunError::Io(dir.to_path_buf(), e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> quasirev::Result<()>,
    ) -> Result<(), RunError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| RunError::Io(parent.to_path_buf(), e))?;
        }
        let file = File::create(&path).map_err(|e| RunError::Io(path.clone(), e))?;
        let mut w = BufWriter::new(file);
        body(&mut w).map_err(|e| match e {
            Error::Io(io) => RunError::Io(path.clone(), io),
            other => RunError::Solver(other),
        })?;
        w.flush().map_err(|e| RunError::Io(path.clone(), e))?;
        debug!("wrote {}", path.display());
        self.files.push(path);
        Ok(())
    }
}

pub fn run(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    match cfg.mode {
        Mode::InverseSource => run_inverse_source(cfg),
        Mode::Coefficient => run_coefficient(cfg),
    }
}

fn write_gamma(art: &mut Artifacts, rate: &BoundarySeries) -> Result<(), RunError> {
    let spec = *rate.spec();
    let gamma = rate.boundary_l2_per_level();
    art.write("gamma.csv", |w| {
        writeln!(w, "t,gamma")?;
        for (l, g) in gamma.iter().enumerate() {
            writeln!(w, "{},{}", spec.t(l + 1), g)?;
        }
        Ok(())
    })
}

fn report_header(cfg: &RunConfig, spec: &GridSpec) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mode={:?}", cfg.mode);
    let _ = writeln!(s, "test={}", cfg.test);
    let _ = writeln!(s, "r={}\nnx={}\nnt={}\nt_final={}", spec.r(), spec.nx(), spec.nt(), spec.t_final());
    let _ = writeln!(s, "dx={}\ndt={}", spec.dx(), spec.dt());
    let _ = writeln!(s, "delta={}\nseed={}\nrefinement={}", cfg.delta, cfg.seed, cfg.refinement);
    let _ = writeln!(s, "weighted_gram={}\nsolver={:?}", cfg.weighted_gram, cfg.solver);
    s
}

fn run_inverse_source(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    let spec = cfg.grid_spec()?;
    let phantom = cfg.phantom()?;
    let mut art = Artifacts::new(&cfg.output_dir)?;
    let started = Instant::now();

    info!("simulating {} on a grid refined x{}", phantom.name, cfg.refinement);
    let t = Instant::now();
    let clean = generate_data(
        spec,
        cfg.refinement,
        &|x, y| phantom.eval(x, y),
        &eval_f,
        &eval_c_background,
    )?;
    let data_secs = t.elapsed().as_secs_f64();
    let data = apply_noise(&clean, &cfg.noise());

    info!("solving the regularized system ({} unknowns)", spec.lineup_len());
    let problem = QrProblem::new(
        sample_spatial(spec, eval_c_background)?,
        sample_space_time(spec, eval_f)?,
        data.clone(),
        cfg.qr_options(),
    )?;
    let solution = solve_qr(&problem)?;

    let p_true = phantom.sample(spec)?;
    let metrics = metric_extreme_errors(&solution.p, &phantom.regions(spec))?;
    let l2_error = relative_l2_error(&solution.p, &p_true)?;
    for row in &metrics {
        info!(
            "{}: true {:.4}, computed {:.4}, relative error {:.2}%",
            row.inclusion,
            row.extreme_true,
            row.extreme_comp,
            100.0 * row.err_rel
        );
    }

    art.write("p_true.csv", |w| p_true.write_csv(w))?;
    art.write("p_comp.csv", |w| solution.p.write_csv(w))?;
    art.write("data_gt.csv", |w| data.write_csv(w))?;
    art.write("metrics.csv", |w| write_metrics_csv(&metrics, w))?;
    write_gamma(&mut art, &data)?;

    let mut report = report_header(cfg, &spec);
    report.push_str(&solution.report());
    let _ = writeln!(report, "max_p_comp={}\nmin_p_comp={}", solution.p.max(), solution.p.min());
    let _ = writeln!(report, "relative_l2_error={l2_error}");
    let _ = writeln!(report, "data_secs={data_secs:.3}");
    let _ = writeln!(report, "total_secs={:.3}", started.elapsed().as_secs_f64());
    art.write("run_report.txt", |w| Ok(w.write_all(report.as_bytes())?))?;

    Ok(RunSummary {
        output_dir: art.dir,
        files: art.files,
        metrics,
        l2_error,
        e_history: Vec::new(),
    })
}

/// Initial state of the coefficient problem.
pub fn coefficient_initial(_x: f64, _y: f64) -> f64 {
    1.0
}

/// Boundary values `e^{c0 t}` of the coefficient problem.
pub fn coefficient_boundary(c0: f64) -> impl Fn(f64, f64, f64) -> f64 {
    move |_, _, t| (c0 * t).exp()
}

/// Builds the coefficient problem for `truth`, with data simulated on the
/// refined grid.
pub fn coefficient_problem(cfg: &RunConfig, truth: &Phantom) -> Result<CipProblem, RunError> {
    let spec = cfg.grid_spec()?;
    let c0 = cfg.coefficient.c0;
    let boundary = coefficient_boundary(c0);
    let data = generate_coefficient_data(
        spec,
        cfg.refinement,
        &|x, y| truth.eval(x, y),
        &coefficient_initial,
        &boundary,
    )?;
    let mut problem = CipProblem::new(
        sample_spatial(spec, coefficient_initial)?,
        BoundarySeries::from_fn(spec, BoundaryKind::Value, &boundary)?,
        data,
        c0,
        cfg.coefficient.n_star,
    )?;
    problem.qr = cfg.qr_options();
    problem.noise = cfg.noise();
    problem.update = cfg.update_rule()?;
    problem.keep_history = true;
    Ok(problem)
}

fn run_coefficient(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    let spec = cfg.grid_spec()?;
    let truth = cfg.phantom()?;
    let mut art = Artifacts::new(&cfg.output_dir)?;
    let started = Instant::now();

    info!("simulating {} on a grid refined x{}", truth.name, cfg.refinement);
    let problem = coefficient_problem(cfg, &truth)?;
    let measured = apply_noise(&problem.data_f, &problem.noise);

    info!("running {} iterations ({} update)", problem.n_star, problem.update.label());
    let state = cip_iterate(&problem)?;

    let c_true = truth.sample(spec)?;
    let metrics = metric_extreme_errors(&state.c_n, &truth.regions(spec))?;
    let l2_error = relative_l2_error(&state.c_n, &c_true)?;

    art.write("c_true.csv", |w| c_true.write_csv(w))?;
    art.write("c_comp.csv", |w| state.c_n.write_csv(w))?;
    if cfg.coefficient.write_iterates {
        let width = problem.n_star.to_string().len();
        for (n, c) in state.c_history.iter().enumerate().skip(1) {
            art.write(&format!("c_n/c_{n:0width$}.csv"), |w| c.write_csv(w))?;
        }
    }
    art.write("e_n.csv", |w| write_iteration_csv(&state, w))?;
    art.write("metrics.csv", |w| write_metrics_csv(&metrics, w))?;
    write_gamma(&mut art, &measured.time_derivative()?)?;

    let mut report = report_header(cfg, &spec);
    let _ = writeln!(report, "epsilon={:e}", cfg.epsilon);
    let _ = writeln!(report, "c0={}\nn_star={}\nupdate_rule={}", problem.c0, problem.n_star, problem.update.label());
    let _ = writeln!(report, "max_c_comp={}\nmin_c_comp={}", state.c_n.max(), state.c_n.min());
    let _ = writeln!(report, "relative_l2_error={l2_error}");
    let _ = writeln!(report, "total_secs={:.3}", started.elapsed().as_secs_f64());
    art.write("run_report.txt", |w| Ok(w.write_all(report.as_bytes())?))?;

    Ok(RunSummary {
        output_dir: art.dir,
        files: art.files,
        metrics,
        l2_error,
        e_history: state.e_history,
    })
}

fn write_iteration_csv<W: Write>(state: &CipState, mut w: W) -> quasirev::Result<()> {
    writeln!(w, "n,e_n,u_change,data_residual")?;
    for n in 0..state.e_history.len() {
        writeln!(
            w,
            "{},{},{},{}",
            n + 1,
            state.e_history[n],
            state.u_change[n],
            state.data_residual[n]
        )?;
    }
    Ok(())
}

/// Loads a field written by a run, for checks and post-processing.
pub fn read_field(spec: GridSpec, path: &Path) -> Result<SpatialField, RunError> {
    let file = File::open(path).map_err(|e| RunError::Io(path.to_path_buf(), e))?;
    Ok(SpatialField::read_csv(spec, std::io::BufReader::new(file))?)
}
