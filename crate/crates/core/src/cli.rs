//! The `aot` command-line tool.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::cholesky::{minimal_cholesky, PSD_TOL};
use crate::couplings::{
    adapted_brenier_with_tol, classical_brenier_correlation, empirical_cost, factor_coupling_cost, full_coupling_cost,
    optimal_aw_correlation, sample_coupled_paths, sample_full_coupled_paths, BlockCorrelation,
};
use crate::ensemble::{asymptotics_from_records, emit_csv, emit_plot_data, run_ensemble, Coupling, EnsembleConfig};
use crate::error::{Error, Result};
use crate::gelbrich::{build_counterexample, monte_carlo_counterexample_cost};
use crate::io::{
    format_sig17, load_matrix, load_process, load_vector, read_json, write_json, Correlation, CorrelationFile,
    MatrixFile, ProcessFile,
};
use crate::linalg::{default_rank_tol, Matrix, Vector};
use crate::metrics::{
    aw2_filtered_sq, bures_wasserstein_sq, diagonal_cross_nuclear, geodesic_point, procrustes_optimizer, w2_gaussian_sq,
};
use crate::process::{common_dynamics_projection, martingale_projection, BlockLowerCholesky, FilteredGaussianProcess};

pub const RANK_TOL_ENV: &str = "AOT_RANK_TOL";

#[derive(Debug, Parser)]
#[command(name = "aot", version, about = "Adapted optimal transport between filtered Gaussian processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print a distance between two laws or processes.
    ///
    /// bw, w2, aw and aw-laws print distances; ab prints the adapted Brenier
    /// divergence, which is on the squared scale.
    Distance(DistanceArgs),
    /// Project a factor onto a structured class.
    #[command(subcommand)]
    Project(ProjectCommand),
    /// Write a point on the geodesic between two processes.
    Geodesic(GeodesicArgs),
    /// Build, evaluate or sample Gaussian couplings.
    #[command(subcommand)]
    Coupling(CouplingCommand),
    /// Run the random-factor ensemble and write per-path records.
    Ensemble(EnsembleArgs),
    /// Evaluate the non-Gaussian pair that beats the Gaussian adapted bound.
    Gelbrich(GelbrichArgs),
    /// Run the randomized invariant suite.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DistanceKind {
    Bw,
    W2,
    Aw,
    AwLaws,
    Ab,
}

#[derive(Debug, Args)]
pub struct InputDim {
    /// Spatial dimension d for matrix files without block metadata.
    #[arg(long = "d", default_value_t = 1)]
    pub d: usize,
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    #[arg(value_enum)]
    pub kind: DistanceKind,
    /// First input: factor, process file, or covariance with --cov.
    pub x: PathBuf,
    /// Second input.
    pub y: PathBuf,
    /// Inputs are covariance matrices rather than factors.
    #[arg(long)]
    pub cov: bool,
    /// Mean of the first input (JSON array); overrides a process file mean.
    #[arg(long)]
    pub mean_x: Option<PathBuf>,
    /// Mean of the second input.
    #[arg(long)]
    pub mean_y: Option<PathBuf>,
    /// Write a JSON report with per-step nuclear norms and the optimizer Q.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub dim: InputDim,
}

#[derive(Debug, Subcommand)]
pub enum ProjectCommand {
    /// Nearest martingale factor.
    Martingale {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        dim: InputDim,
    },
    /// Nearest factor with the given common dynamics.
    CommonDynamics {
        input: PathBuf,
        /// JSON array of N−1 matrix objects Φ_1 … Φ_{N−1}.
        #[arg(long)]
        phi: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        dim: InputDim,
    },
}

#[derive(Debug, Args)]
pub struct GeodesicArgs {
    pub x0: PathBuf,
    pub x1: PathBuf,
    /// Position in [0, 1].
    #[arg(long, allow_negative_numbers = true)]
    pub u: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub dim: InputDim,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CouplingKind {
    Aw,
    Ab,
    Sync,
    Indep,
    /// Classical Brenier coupling of the full paths (not bicausal).
    Brenier,
}

#[derive(Debug, Subcommand)]
pub enum CouplingCommand {
    /// Write the correlation of a coupling.
    Build {
        #[arg(long, value_enum)]
        kind: CouplingKind,
        x: PathBuf,
        y: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        dim: InputDim,
    },
    /// Print the analytic transport cost of a coupling.
    Evaluate {
        x: PathBuf,
        y: PathBuf,
        #[arg(long)]
        corr: PathBuf,
        #[command(flatten)]
        dim: InputDim,
    },
    /// Sample coupled path pairs to CSV (x_1..x_n, y_1..y_n per row).
    Sample {
        x: PathBuf,
        y: PathBuf,
        #[arg(long)]
        corr: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        dim: InputDim,
    },
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[arg(long = "d")]
    pub d: usize,
    /// Comma-separated horizons.
    #[arg(long = "N-list", value_delimiter = ',', required = true)]
    pub n_list: Vec<usize>,
    #[arg(long)]
    pub paths: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated subset of sync, indep, aw, ab, bw.
    #[arg(long, value_delimiter = ',', default_value = "sync,indep,aw,ab,bw")]
    pub couplings: Vec<String>,
    /// Per-N quartiles of each cost ratio.
    #[arg(long)]
    pub plot_out: Option<PathBuf>,
    /// Per-N quartiles of the scaled norms against their limits.
    #[arg(long)]
    pub asymptotics_out: Option<PathBuf>,
    /// Worker threads (0 = all cores); output does not depend on it.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct GelbrichArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub delta: f64,
    #[arg(long)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long)]
    pub seed: u64,
}

fn rank_tol(d: usize) -> Result<f64> {
    match std::env::var(RANK_TOL_ENV) {
        Ok(s) => {
            let v: f64 = s.trim().parse().map_err(|_| Error::Parse(format!("{RANK_TOL_ENV}='{s}' is not a number")))?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Range(format!("{RANK_TOL_ENV} must be a finite non-negative number")));
            }
            Ok(v)
        }
        Err(_) => Ok(default_rank_tol(d)),
    }
}

fn with_mean(mut x: FilteredGaussianProcess, mean: &Option<PathBuf>) -> Result<FilteredGaussianProcess> {
    if let Some(p) = mean {
        x = FilteredGaussianProcess::new(load_vector(p)?, x.factor)?;
    }
    Ok(x)
}

fn mean_or_zero(mean: &Option<PathBuf>, n: usize) -> Result<Vector> {
    match mean {
        Some(p) => {
            let v = load_vector(p)?;
            if v.len() != n {
                return Err(Error::Dimension(format!("mean has length {}, expected {n}", v.len())));
            }
            Ok(v)
        }
        None => Ok(Vector::zeros(n)),
    }
}

#[derive(Serialize)]
struct DistanceReport {
    kind: &'static str,
    value: f64,
    value_sq: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    block_nuclear: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<Vec<MatrixFile>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gammas: Option<Vec<f64>>,
}

fn aw_report_parts(l: &BlockLowerCholesky, m: &BlockLowerCholesky) -> Result<(Vec<f64>, Vec<MatrixFile>)> {
    let nuc = diagonal_cross_nuclear(l, m)?;
    let q = procrustes_optimizer(l, m)?.q.iter().map(MatrixFile::from_matrix).collect();
    Ok((nuc, q))
}

fn covariances(a: &DistanceArgs) -> Result<(Matrix, Matrix, Vector, Vector)> {
    if a.cov {
        let (ca, cb) = (load_matrix(&a.x)?, load_matrix(&a.y)?);
        let (ma, mb) = (mean_or_zero(&a.mean_x, ca.nrows())?, mean_or_zero(&a.mean_y, cb.nrows())?);
        Ok((ca, cb, ma, mb))
    } else {
        let x = with_mean(load_process(&a.x, a.dim.d)?, &a.mean_x)?;
        let y = with_mean(load_process(&a.y, a.dim.d)?, &a.mean_y)?;
        Ok((x.covariance(), y.covariance(), x.mean, y.mean))
    }
}

fn cmd_distance(a: &DistanceArgs) -> Result<()> {
    let report = match a.kind {
        DistanceKind::Bw | DistanceKind::W2 => {
            let (ca, cb, ma, mb) = covariances(a)?;
            let (kind, sq) = match a.kind {
                DistanceKind::Bw => ("bw", bures_wasserstein_sq(&ca, &cb)?),
                _ => ("w2", w2_gaussian_sq(&ma, &ca, &mb, &cb)?),
            };
            DistanceReport { kind, value: sq.sqrt(), value_sq: sq, block_nuclear: None, q: None, gammas: None }
        }
        DistanceKind::AwLaws => {
            let (ca, cb, ma, mb) = covariances(a)?;
            let n = ca.nrows();
            if cb.nrows() != n || ma.len() != n || mb.len() != n || n % a.dim.d != 0 {
                return Err(Error::Dimension("covariances, means and d are inconsistent".into()));
            }
            let steps = n / a.dim.d;
            let l = BlockLowerCholesky::new(minimal_cholesky(&ca, PSD_TOL)?.factor, steps, a.dim.d)?;
            let m = BlockLowerCholesky::new(minimal_cholesky(&cb, PSD_TOL)?.factor, steps, a.dim.d)?;
            let sq = aw2_filtered_sq(
                &FilteredGaussianProcess::new(ma, l.clone())?,
                &FilteredGaussianProcess::new(mb, m.clone())?,
            )?;
            let (nuc, q) = aw_report_parts(&l, &m)?;
            DistanceReport {
                kind: "aw-laws",
                value: sq.sqrt(),
                value_sq: sq,
                block_nuclear: Some(nuc),
                q: Some(q),
                gammas: None,
            }
        }
        DistanceKind::Aw | DistanceKind::Ab => {
            if a.cov {
                return Err(Error::Precondition("--cov applies to bw, w2 and aw-laws only".into()));
            }
            let x = with_mean(load_process(&a.x, a.dim.d)?, &a.mean_x)?;
            let y = with_mean(load_process(&a.y, a.dim.d)?, &a.mean_y)?;
            x.factor.same_shape(&y.factor)?;
            let (nuc, q) = aw_report_parts(&x.factor, &y.factor)?;
            if matches!(a.kind, DistanceKind::Aw) {
                let sq = aw2_filtered_sq(&x, &y)?;
                DistanceReport {
                    kind: "aw",
                    value: sq.sqrt(),
                    value_sq: sq,
                    block_nuclear: Some(nuc),
                    q: Some(q),
                    gammas: None,
                }
            } else {
                let ab = adapted_brenier_with_tol(&x.factor, &y.factor, rank_tol(x.dim())?)?;
                let value = (&x.mean - &y.mean).norm_squared() + ab.divergence;
                let q = ab.correlation.blocks().iter().map(MatrixFile::from_matrix).collect();
                DistanceReport {
                    kind: "ab",
                    value,
                    value_sq: value,
                    block_nuclear: Some(nuc),
                    q: Some(q),
                    gammas: Some(ab.gammas),
                }
            }
        }
    };
    println!("{}", format_sig17(report.value));
    if let Some(path) = &a.report {
        write_json(path, &report)?;
    }
    Ok(())
}

fn cmd_project(c: &ProjectCommand) -> Result<()> {
    match c {
        ProjectCommand::Martingale { input, out, dim } => {
            let x = load_process(input, dim.d)?;
            write_json(out, &MatrixFile::from_factor(&martingale_projection(&x.factor)))
        }
        ProjectCommand::CommonDynamics { input, phi, out, dim } => {
            let x = load_process(input, dim.d)?;
            let files: Vec<MatrixFile> = read_json(phi)?;
            let phis = files.iter().map(MatrixFile::to_matrix).collect::<Result<Vec<_>>>()?;
            write_json(out, &MatrixFile::from_factor(&common_dynamics_projection(&x.factor, &phis)?))
        }
    }
}

fn cmd_geodesic(a: &GeodesicArgs) -> Result<()> {
    let x0 = load_process(&a.x0, a.dim.d)?;
    let x1 = load_process(&a.x1, a.dim.d)?;
    write_json(&a.out, &ProcessFile::from_process(&geodesic_point(&x0, &x1, a.u)?))
}

fn load_pair(x: &Path, y: &Path, d: usize) -> Result<(FilteredGaussianProcess, FilteredGaussianProcess)> {
    let x = load_process(x, d)?;
    let y = load_process(y, d)?;
    x.factor.same_shape(&y.factor)?;
    Ok((x, y))
}

fn cmd_coupling(c: &CouplingCommand) -> Result<()> {
    match c {
        CouplingCommand::Build { kind, x, y, out, dim } => {
            let (x, y) = load_pair(x, y, dim.d)?;
            let (l, m) = (&x.factor, &y.factor);
            let file = match kind {
                CouplingKind::Aw => CorrelationFile::from_block("aw", &optimal_aw_correlation(l, m)?),
                CouplingKind::Ab => {
                    CorrelationFile::from_block("ab", &adapted_brenier_with_tol(l, m, rank_tol(l.dim())?)?.correlation)
                }
                CouplingKind::Sync => {
                    CorrelationFile::from_block("sync", &BlockCorrelation::identity(l.n_steps(), l.dim()))
                }
                CouplingKind::Indep => {
                    CorrelationFile::from_block("indep", &BlockCorrelation::zeros(l.n_steps(), l.dim()))
                }
                CouplingKind::Brenier => CorrelationFile::from_full("brenier", &classical_brenier_correlation(l, m)?),
            };
            write_json(out, &file)
        }
        CouplingCommand::Evaluate { x, y, corr, dim } => {
            let (x, y) = load_pair(x, y, dim.d)?;
            let mean_gap = (&x.mean - &y.mean).norm_squared();
            let cost = match read_json::<CorrelationFile>(corr)?.to_correlation(x.dim())? {
                Correlation::Block(p) => factor_coupling_cost(&x.factor, &y.factor, &p)?,
                Correlation::Full(p) => full_coupling_cost(&x.factor, &y.factor, &p)?,
            };
            println!("{}", format_sig17(mean_gap + cost));
            Ok(())
        }
        CouplingCommand::Sample { x, y, corr, n, seed, out, dim } => {
            let (x, y) = load_pair(x, y, dim.d)?;
            let (px, py) = match read_json::<CorrelationFile>(corr)?.to_correlation(x.dim())? {
                Correlation::Block(p) => sample_coupled_paths(&x, &y, &p, *n, *seed)?,
                Correlation::Full(p) => sample_full_coupled_paths(&x, &y, &p, *n, *seed)?,
            };
            write_pair_csv(out, &px, &py)?;
            let (mean, se) = empirical_cost(&px, &py);
            eprintln!("empirical cost {} (standard error {})", format_sig17(mean), format_sig17(se));
            Ok(())
        }
    }
}

fn write_pair_csv(path: &Path, px: &Matrix, py: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let k = px.ncols();
    let header: Vec<String> = (1..=k).map(|i| format!("x_{i}")).chain((1..=k).map(|i| format!("y_{i}"))).collect();
    w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for i in 0..px.nrows() {
        let row: Vec<String> = px.row(i).iter().chain(py.row(i).iter()).map(|v| v.to_string()).collect();
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_ensemble(a: &EnsembleArgs) -> Result<()> {
    let couplings = a.couplings.iter().map(|s| s.trim().parse::<Coupling>()).collect::<Result<Vec<_>>>()?;
    let cfg = EnsembleConfig {
        d: a.d,
        n_values: a.n_list.clone(),
        paths: a.paths,
        base_seed: a.seed,
        couplings,
        workers: a.workers,
    };
    let (records, summary) = run_ensemble(&cfg)?;
    emit_csv(&records, &a.out)?;
    if let Some(p) = &a.plot_out {
        emit_plot_data(&summary, p)?;
    }
    if let Some(p) = &a.asymptotics_out {
        let rows = asymptotics_from_records(&records, a.d);
        let mut w = csv::Writer::from_path(p).map_err(|e| Error::Io(e.to_string()))?;
        w.write_record(["N", "quantity", "target", "q1", "median", "q3", "count"])
            .map_err(|e| Error::Io(e.to_string()))?;
        for r in rows {
            let s = &r.summary;
            w.serialize((s.n, &s.quantity, r.target, s.q1, s.median, s.q3, s.count))
                .map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
    }
    Ok(())
}

#[derive(Serialize)]
struct GelbrichReport {
    delta: f64,
    analytic_gaussian: f64,
    analytic_coupling: f64,
    mc_estimate: f64,
    mc_se: Option<f64>,
    bound_violated: bool,
}

fn cmd_gelbrich(a: &GelbrichArgs) -> Result<()> {
    let inst = build_counterexample(a.delta)?;
    let (est, se) = monte_carlo_counterexample_cost(a.delta, a.samples, a.seed)?;
    let report = GelbrichReport {
        delta: a.delta,
        analytic_gaussian: inst.analytic_gaussian_aw2,
        analytic_coupling: inst.analytic_coupling_cost,
        mc_estimate: est,
        // JSON has no infinity; a single sample reports null
        mc_se: se.is_finite().then_some(se),
        bound_violated: est + 3.0 * se < inst.analytic_gaussian_aw2,
    };
    println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?);
    Ok(())
}

fn cmd_check(a: &CheckArgs) -> Result<bool> {
    let outcomes = crate::checks::run_checks(a.trials, a.seed)?;
    let mut all = true;
    for o in &outcomes {
        all &= o.passed();
        println!(
            "{} {:<36} {}/{} trials{}",
            if o.passed() { "PASS" } else { "FAIL" },
            o.name,
            o.trials - o.failures,
            o.trials,
            if o.passed() { String::new() } else { format!(", worst violation {:e}", o.worst) }
        );
    }
    Ok(all)
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        3
    } else {
        2
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Distance(a) => cmd_distance(a).map(|_| true),
        Command::Project(c) => cmd_project(c).map(|_| true),
        Command::Geodesic(a) => cmd_geodesic(a).map(|_| true),
        Command::Coupling(c) => cmd_coupling(c).map(|_| true),
        Command::Ensemble(a) => cmd_ensemble(a).map(|_| true),
        Command::Gelbrich(a) => cmd_gelbrich(a).map(|_| true),
        Command::Check(a) => cmd_check(a),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 3,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
