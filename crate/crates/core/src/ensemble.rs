//! Random Cholesky ensembles.
//!
//! Each path draws two independent factors `L, M ∈ 𝓛(N_max, d)` whose lower
//! blocks (diagonal blocks included) have i.i.d. standard normal entries, and
//! evaluates transport costs of the leading `N`-step sub-factors for every
//! requested horizon. Costs are analytic; nothing is path-sampled here.
//!
//! Factor entries are drawn block row by block row, so the factor for `N`
//! steps is exactly the leading part of the factor for `N' > N` steps with the
//! same seed.

use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

use crate::couplings::{adapted_brenier, factor_coupling_cost, optimal_aw_correlation};
use crate::error::{Error, Result};
use crate::linalg::{nuclear_norm, Matrix};
use crate::metrics::{clamp_radicand, diagonal_cross_blocks};
use crate::process::BlockLowerCholesky;

pub const CSV_HEADER: [&str; 12] = [
    "N",
    "path",
    "cost_sync",
    "cost_indep",
    "cost_aw",
    "cost_ab",
    "bw2",
    "aw2",
    "frobL2",
    "frobM2",
    "nuc_diag",
    "cross_frob2",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coupling {
    Sync,
    Indep,
    Aw,
    Ab,
    Bw,
}

impl Coupling {
    pub const ALL: [Coupling; 5] = [Coupling::Sync, Coupling::Indep, Coupling::Aw, Coupling::Ab, Coupling::Bw];

    pub fn name(self) -> &'static str {
        match self {
            Coupling::Sync => "sync",
            Coupling::Indep => "indep",
            Coupling::Aw => "aw",
            Coupling::Ab => "ab",
            Coupling::Bw => "bw",
        }
    }
}

impl FromStr for Coupling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Coupling::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown coupling '{s}' (expected sync, indep, aw, ab or bw)")))
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub d: usize,
    pub n_values: Vec<usize>,
    pub paths: usize,
    pub base_seed: u64,
    pub couplings: Vec<Coupling>,
    /// Worker threads; 0 uses the global rayon pool.
    pub workers: usize,
}

impl EnsembleConfig {
    pub fn new(d: usize, n_values: Vec<usize>, paths: usize, base_seed: u64) -> Self {
        Self { d, n_values, paths, base_seed, couplings: Coupling::ALL.to_vec(), workers: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Range("d must be at least 1".into()));
        }
        if self.paths == 0 {
            return Err(Error::Range("paths must be at least 1".into()));
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(Error::Range("horizons must be a non-empty list of positive integers".into()));
        }
        Ok(())
    }

    fn wants(&self, c: Coupling) -> bool {
        self.couplings.contains(&c)
    }
}

/// One (N, path) evaluation. Costs are on the squared scale; columns for
/// couplings that were not requested are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    #[serde(rename = "N")]
    pub n: usize,
    pub path: usize,
    pub cost_sync: Option<f64>,
    pub cost_indep: Option<f64>,
    pub cost_aw: Option<f64>,
    pub cost_ab: Option<f64>,
    pub bw2: Option<f64>,
    pub aw2: f64,
    #[serde(rename = "frobL2")]
    pub frob_l2: f64,
    #[serde(rename = "frobM2")]
    pub frob_m2: f64,
    /// `Σ_t ‖(LᵀM)_{t,t}‖_*`
    pub nuc_diag: f64,
    /// `‖LᵀM‖_F²`
    pub cross_frob2: f64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of factor `which` (0 for L, 1 for M) on a given path.
pub fn path_seed(base_seed: u64, path: usize, which: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64((path as u64).wrapping_mul(2).wrapping_add(which)))
}

pub fn sample_ensemble_factor(n_steps: usize, d: usize, seed: u64) -> Result<BlockLowerCholesky> {
    if n_steps == 0 || d == 0 {
        return Err(Error::Range("N and d must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BlockLowerCholesky::from_blocks(n_steps, d, |_, _| Matrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng)))
}

fn evaluate(
    l: &BlockLowerCholesky,
    m: &BlockLowerCholesky,
    n: usize,
    path: usize,
    cfg: &EnsembleConfig,
) -> Result<EnsembleRecord> {
    let frob_l2 = l.frobenius_sq();
    let frob_m2 = m.frobenius_sq();
    let scale = frob_l2 + frob_m2;
    let cross = diagonal_cross_blocks(l, m)?;
    let mut nuc_diag = 0.0;
    let mut trace_diag = 0.0;
    for g in &cross {
        nuc_diag += nuclear_norm(g)?;
        trace_diag += g.trace();
    }
    let aw2 = clamp_radicand(scale - 2.0 * nuc_diag, scale)?;
    let full_cross = l.as_matrix().transpose() * m.as_matrix();
    let cross_frob2 = full_cross.norm_squared();

    let cost_aw =
        if cfg.wants(Coupling::Aw) { Some(factor_coupling_cost(l, m, &optimal_aw_correlation(l, m)?)?) } else { None };
    let cost_ab = if cfg.wants(Coupling::Ab) { Some(adapted_brenier(l, m)?.divergence) } else { None };
    // Same as factor_bw_sq, reusing the cross product computed above.
    let bw2 = if cfg.wants(Coupling::Bw) {
        Some(clamp_radicand(scale - 2.0 * nuclear_norm(&full_cross)?, scale)?)
    } else {
        None
    };
    Ok(EnsembleRecord {
        n,
        path,
        cost_sync: cfg.wants(Coupling::Sync).then_some(scale - 2.0 * trace_diag),
        cost_indep: cfg.wants(Coupling::Indep).then_some(scale),
        cost_aw,
        cost_ab,
        bw2,
        aw2,
        frob_l2,
        frob_m2,
        nuc_diag,
        cross_frob2,
    })
}

fn run_path(cfg: &EnsembleConfig, path: usize) -> Result<Vec<EnsembleRecord>> {
    let n_max = *cfg.n_values.iter().max().expect("validated");
    let l_full = sample_ensemble_factor(n_max, cfg.d, path_seed(cfg.base_seed, path, 0))?;
    let m_full = sample_ensemble_factor(n_max, cfg.d, path_seed(cfg.base_seed, path, 1))?;
    cfg.n_values.iter().map(|&n| evaluate(&l_full.leading(n)?, &m_full.leading(n)?, n, path, cfg)).collect()
}

/// Records sorted by (N, path).
pub fn run_ensemble_records(cfg: &EnsembleConfig) -> Result<Vec<EnsembleRecord>> {
    cfg.validate()?;
    let work =
        || -> Result<Vec<Vec<EnsembleRecord>>> { (0..cfg.paths).into_par_iter().map(|p| run_path(cfg, p)).collect() };
    let nested = if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Io(format!("cannot start worker pool: {e}")))?
            .install(work)?
    } else {
        work()?
    };
    let mut records: Vec<EnsembleRecord> = nested.into_iter().flatten().collect();
    records.sort_by_key(|r| (r.n, r.path));
    Ok(records)
}

/// Median and quartiles of one quantity at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n: usize,
    pub quantity: String,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub count: usize,
}

fn summarize(n: usize, quantity: &str, values: Vec<f64>) -> Option<SummaryRow> {
    if values.is_empty() {
        return None;
    }
    let count = values.len();
    let mut data = Data::new(values);
    Some(SummaryRow {
        n,
        quantity: quantity.to_string(),
        q1: data.lower_quartile(),
        median: data.median(),
        q3: data.upper_quartile(),
        count,
    })
}

fn horizons(records: &[EnsembleRecord]) -> Vec<usize> {
    let mut ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    ns
}

type Extractor = fn(&EnsembleRecord) -> Option<f64>;

fn ratio(num: Option<f64>, den: f64) -> Option<f64> {
    num.map(|v| v / den)
}

const RATIOS: [(&str, Extractor); 4] = [
    ("sync/aw", |r| ratio(r.cost_sync, r.aw2)),
    ("indep/aw", |r| ratio(r.cost_indep, r.aw2)),
    ("ab/aw", |r| ratio(r.cost_ab, r.aw2)),
    ("bw/aw", |r| ratio(r.bw2, r.aw2)),
];

/// Per-N quartiles of each cost ratio `T(π)/AW₂²` and `BW²/AW₂²`.
pub fn ratio_summary(records: &[EnsembleRecord]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for n in horizons(records) {
        for (name, f) in RATIOS {
            let vals: Vec<f64> = records.iter().filter(|r| r.n == n).filter_map(f).collect();
            out.extend(summarize(n, name, vals));
        }
    }
    out
}

pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<(Vec<EnsembleRecord>, Vec<SummaryRow>)> {
    let records = run_ensemble_records(cfg)?;
    let summary = ratio_summary(&records);
    Ok((records, summary))
}

/// Scaled quantity with its limiting value as N → ∞.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticRow {
    pub summary: SummaryRow,
    pub target: f64,
}

/// Medians of `‖L‖²/N²`, `Σ‖(LᵀM)_{t,t}‖_*/N²`, `‖LᵀM‖²/N³` and
/// `‖L − M‖²/N²` against their limits `d²/2`, `0`, `d³/3` and `d²`.
pub fn asymptotics_from_records(records: &[EnsembleRecord], d: usize) -> Vec<AsymptoticRow> {
    let d = d as f64;
    let mut out = Vec::new();
    for n in horizons(records) {
        let nf = n as f64;
        let at_n: Vec<&EnsembleRecord> = records.iter().filter(|r| r.n == n).collect();
        let rows: [(&str, f64, Vec<f64>); 4] = [
            ("frobL2/N^2", d * d / 2.0, at_n.iter().map(|r| r.frob_l2 / (nf * nf)).collect()),
            ("nuc_diag/N^2", 0.0, at_n.iter().map(|r| r.nuc_diag / (nf * nf)).collect()),
            ("cross_frob2/N^3", d.powi(3) / 3.0, at_n.iter().map(|r| r.cross_frob2 / nf.powi(3)).collect()),
            ("cost_sync/N^2", d * d, at_n.iter().filter_map(|r| r.cost_sync).map(|c| c / (nf * nf)).collect()),
        ];
        for (name, target, vals) in rows {
            if let Some(summary) = summarize(n, name, vals) {
                out.push(AsymptoticRow { summary, target });
            }
        }
    }
    out
}

pub fn verify_asymptotics(cfg: &EnsembleConfig) -> Result<Vec<AsymptoticRow>> {
    let mut cheap = cfg.clone();
    cheap.couplings = vec![Coupling::Sync];
    let records = run_ensemble_records(&cheap)?;
    Ok(asymptotics_from_records(&records, cfg.d))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// Header row always, then one row per record.
pub fn write_csv<W: Write>(records: &[EnsembleRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<EnsembleRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected CSV header {header:?}")));
    }
    rdr.deserialize().map(|r| r.map_err(csv_err)).collect()
}

pub fn emit_csv(records: &[EnsembleRecord], path: &Path) -> Result<()> {
    write_csv(records, std::fs::File::create(path)?)
}

pub fn parse_csv(path: &Path) -> Result<Vec<EnsembleRecord>> {
    read_csv(std::fs::File::open(path)?)
}

pub fn write_plot_data<W: Write>(summary: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["N", "quantity", "q1", "median", "q3", "count"]).map_err(csv_err)?;
    for s in summary {
        w.serialize((s.n, &s.quantity, s.q1, s.median, s.q3, s.count)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_plot_data(summary: &[SummaryRow], path: &Path) -> Result<()> {
    write_plot_data(summary, std::fs::File::create(path)?)
}
