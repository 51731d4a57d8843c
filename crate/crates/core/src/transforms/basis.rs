//! Matrix files: little-endian `f32`, row-major, with a JSON sidecar at
//! `<path>.json` holding `{"rows": R, "cols": C, "role": ...}`.
//!
//! The same container carries learned transform bases, per-hop FBE filters
//! and per-frame enhancement coefficients.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{TransformBasis, TransformError};
use crate::config::StreamConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Analysis,
    Synthesis,
    /// One FBE filter spectrum per hop, complex interleaved.
    FbeFilter,
    /// One set of 3x3 deep-filter taps per frame, complex interleaved.
    DeepFilter,
    /// One compressed spectrum per frame, complex interleaved.
    Mapping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixHeader {
    pub rows: usize,
    pub cols: usize,
    pub role: Role,
    /// Effective FIR length of FBE filter records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective_len: Option<usize>,
}

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

pub fn write_matrix(
    path: &Path,
    matrix: &Matrix,
    role: Role,
    effective_len: Option<usize>,
) -> Result<(), TransformError> {
    let header = MatrixHeader {
        rows: matrix.rows,
        cols: matrix.cols,
        role,
        effective_len,
    };
    let mut bytes = Vec::with_capacity(matrix.data.len() * 4);
    for v in &matrix.data {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| TransformError::Io(format!("{}: {e}", path.display())))?;
    let json = serde_json::to_string(&header).expect("header serializes");
    let side = sidecar_path(path);
    fs::write(&side, json).map_err(|e| TransformError::Io(format!("{}: {e}", side.display())))
}

/// Reads a matrix file and its sidecar, checking size and finiteness.
pub fn read_matrix(path: &Path) -> Result<(MatrixHeader, Matrix), TransformError> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side)
        .map_err(|e| TransformError::Io(format!("{}: {e}", side.display())))?;
    let header: MatrixHeader =
        serde_json::from_str(&text).map_err(|e| TransformError::Header(e.to_string()))?;
    let bytes = fs::read(path).map_err(|e| TransformError::Io(format!("{}: {e}", path.display())))?;
    let expected = header.rows * header.cols * 4;
    if bytes.len() != expected {
        return Err(TransformError::Header(format!(
            "{} holds {} bytes, header implies {expected}",
            path.display(),
            bytes.len()
        )));
    }
    let mut data = Vec::with_capacity(header.rows * header.cols);
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        if !v.is_finite() {
            return Err(TransformError::NonFinite(i));
        }
        data.push(f64::from(v));
    }
    let matrix = Matrix {
        rows: header.rows,
        cols: header.cols,
        data,
    };
    Ok((header, matrix))
}

/// Reads a matrix and checks its role and dimensions.
pub fn load_matrix(
    path: &Path,
    role: Role,
    rows: usize,
    cols: usize,
) -> Result<Matrix, TransformError> {
    let (header, matrix) = read_matrix(path)?;
    if header.role != role {
        return Err(TransformError::Header(format!(
            "expected role {role:?}, file has {:?}",
            header.role
        )));
    }
    if (header.rows, header.cols) != (rows, cols) {
        return Err(TransformError::Dimension {
            expected: (rows, cols),
            got: (header.rows, header.cols),
        });
    }
    Ok(matrix)
}

/// Loads a learned analysis (`N x L_a`) and synthesis (`N x L_s`) basis.
pub fn load_basis(
    analysis: &Path,
    synthesis: &Path,
    config: &StreamConfig,
    rectify: bool,
) -> Result<TransformBasis, TransformError> {
    let n = config.transform_size;
    let analysis = load_matrix(analysis, Role::Analysis, n, config.analysis_len)?;
    let synthesis = load_matrix(synthesis, Role::Synthesis, n, config.synthesis_len)?;
    Ok(TransformBasis::Learned {
        analysis,
        synthesis,
        rectify,
    })
}

/// Real-valued DFT basis with real parts of bins `0..=N/2` stacked over the
/// imaginary parts of bins `1..N/2`, giving `N` features.
///
/// The synthesis matrix reproduces the samples `[L_a - L_s, L_a)` of the
/// inverse transform, matching the canonical synthesis path.
pub fn dft_stacked_basis(n: usize, analysis_len: usize, synthesis_len: usize) -> (Matrix, Matrix) {
    let half = n / 2;
    let angle = |f: usize, t: usize| 2.0 * PI * ((f * t) % n) as f64 / n as f64;
    let analysis = Matrix::from_fn(n, analysis_len, |r, t| {
        if r <= half {
            angle(r, t).cos()
        } else {
            -angle(r - half, t).sin()
        }
    });
    let offset = analysis_len - synthesis_len;
    let synthesis = Matrix::from_fn(n, synthesis_len, |r, m| {
        let t = offset + m;
        if r <= half {
            let weight = if r == 0 || r == half { 1.0 } else { 2.0 };
            weight * angle(r, t).cos() / n as f64
        } else {
            -2.0 * angle(r - half, t).sin() / n as f64
        }
    });
    (analysis, synthesis)
}
