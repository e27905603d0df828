//! JSON file formats and number formatting for the command-line tool.
//!
//! * matrix: `{"rows": r, "cols": c, "data": [row-major], "block_N": N, "block_d": d}`
//!   with the block fields optional
//! * process: `{"mean": [...], "factor": <matrix>}`
//! * correlation: `{"kind": "...", "bicausal": bool, "correlation": <matrix>}`
//! * vector: a plain JSON array

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::couplings::{BlockCorrelation, FullCorrelation};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::process::{BlockLowerCholesky, FilteredGaussianProcess};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    #[serde(rename = "block_N", default, skip_serializing_if = "Option::is_none")]
    pub block_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_d: Option<usize>,
}

impl MatrixFile {
    pub fn from_matrix(m: &Matrix) -> Self {
        let data = m.transpose().as_slice().to_vec();
        Self { rows: m.nrows(), cols: m.ncols(), data, block_n: None, block_d: None }
    }

    pub fn from_factor(l: &BlockLowerCholesky) -> Self {
        let mut f = Self::from_matrix(l.as_matrix());
        f.block_n = Some(l.n_steps());
        f.block_d = Some(l.dim());
        f
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Dimension("matrix must have positive dimensions".into()));
        }
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Dimension(format!(
                "data has {} entries, expected rows*cols = {}",
                self.data.len(),
                self.rows * self.cols
            )));
        }
        if self.data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("matrix data".into()));
        }
        if self.block_n.is_some() != self.block_d.is_some() {
            return Err(Error::Parse("block_N and block_d must be given together".into()));
        }
        let m = Matrix::from_row_slice(self.rows, self.cols, &self.data);
        if let (Some(n), Some(d)) = (self.block_n, self.block_d) {
            BlockLowerCholesky::new(m.clone(), n, d)?;
        }
        Ok(m)
    }

    /// Block factor using the file's block metadata, else `fallback_dim`.
    pub fn to_factor(&self, fallback_dim: usize) -> Result<BlockLowerCholesky> {
        let m = self.to_matrix()?;
        let d = self.block_d.unwrap_or(fallback_dim);
        if d == 0 || self.rows % d != 0 {
            return Err(Error::Dimension(format!("size {} is not a multiple of d = {d}", self.rows)));
        }
        BlockLowerCholesky::new(m, self.rows / d, d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessFile {
    pub mean: Vec<f64>,
    pub factor: MatrixFile,
}

impl ProcessFile {
    pub fn from_process(x: &FilteredGaussianProcess) -> Self {
        Self { mean: x.mean.iter().copied().collect(), factor: MatrixFile::from_factor(&x.factor) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationFile {
    pub kind: String,
    pub bicausal: bool,
    pub correlation: MatrixFile,
}

/// A correlation loaded from file.
#[derive(Debug, Clone)]
pub enum Correlation {
    Block(BlockCorrelation),
    Full(FullCorrelation),
}

impl CorrelationFile {
    pub fn from_block(kind: &str, p: &BlockCorrelation) -> Self {
        let mut m = MatrixFile::from_matrix(&p.to_matrix());
        m.block_n = Some(p.n_steps());
        m.block_d = Some(p.dim());
        Self { kind: kind.to_string(), bicausal: true, correlation: m }
    }

    pub fn from_full(kind: &str, p: &FullCorrelation) -> Self {
        Self { kind: kind.to_string(), bicausal: false, correlation: MatrixFile::from_matrix(&p.matrix) }
    }

    pub fn to_correlation(&self, dim: usize) -> Result<Correlation> {
        let mf = &self.correlation;
        if mf.data.len() != mf.rows * mf.cols || mf.rows != mf.cols {
            return Err(Error::Dimension("correlation must be a square matrix".into()));
        }
        let m = Matrix::from_row_slice(mf.rows, mf.cols, &mf.data);
        if !self.bicausal {
            return Ok(Correlation::Full(FullCorrelation::new(m)?));
        }
        let d = mf.block_d.unwrap_or(dim);
        if d == 0 || mf.rows % d != 0 {
            return Err(Error::Dimension(format!("size {} is not a multiple of d = {d}", mf.rows)));
        }
        let n = mf.rows / d;
        for s in 0..n {
            for t in 0..n {
                if s != t && m.view((s * d, t * d), (d, d)).iter().any(|&x| x != 0.0) {
                    return Err(Error::Precondition(format!(
                        "bicausal correlation has a nonzero off-diagonal block ({}, {})",
                        s + 1,
                        t + 1
                    )));
                }
            }
        }
        let blocks = (0..n).map(|t| m.view((t * d, t * d), (d, d)).into_owned()).collect();
        Ok(Correlation::Block(BlockCorrelation::new(blocks)?))
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string(value).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn load_matrix(path: &Path) -> Result<Matrix> {
    read_json::<MatrixFile>(path)?.to_matrix()
}

pub fn load_vector(path: &Path) -> Result<Vector> {
    let v: Vec<f64> = read_json(path)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(path.display().to_string()));
    }
    Ok(Vector::from_vec(v))
}

/// Accepts a process file, or a bare factor matrix (zero mean).
pub fn load_process(path: &Path, fallback_dim: usize) -> Result<FilteredGaussianProcess> {
    let value: serde_json::Value = read_json(path)?;
    let parse = |e: serde_json::Error| Error::Parse(format!("{}: {e}", path.display()));
    if value.get("factor").is_some() {
        let pf: ProcessFile = serde_json::from_value(value).map_err(parse)?;
        let factor = pf.factor.to_factor(fallback_dim)?;
        FilteredGaussianProcess::new(Vector::from_vec(pf.mean), factor)
    } else {
        let mf: MatrixFile = serde_json::from_value(value).map_err(parse)?;
        Ok(FilteredGaussianProcess::centered(mf.to_factor(fallback_dim)?))
    }
}

/// `%.17g`-style formatting: 17 significant digits, trailing zeros dropped.
pub fn format_sig17(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let fixed = format!("{:.*}", (16 - exp) as usize, x);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
