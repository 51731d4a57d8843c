//! Externally computed enhancement outputs replayed frame by frame.

use std::path::Path;

use num_complex::Complex64;

use super::{apply_deep_filter, decompress, DeepFilterCoeffs, EnhanceError, Enhancer, Target};
use crate::transforms::{read_matrix, Matrix, Role, SpectralFrame};

pub trait CoeffSource: Send {
    fn coeffs(&mut self, frame: usize, bins: usize) -> Result<DeepFilterCoeffs, EnhanceError>;
}

/// Compressed spectra, one per frame.
pub trait SpectrumSource: Send {
    fn spectrum(&mut self, frame: usize, bins: usize) -> Result<Vec<Complex64>, EnhanceError>;
}

impl CoeffSource for Vec<DeepFilterCoeffs> {
    fn coeffs(&mut self, frame: usize, bins: usize) -> Result<DeepFilterCoeffs, EnhanceError> {
        let c = self
            .get(frame)
            .ok_or_else(|| EnhanceError::Source(format!("no coefficients for frame {frame}")))?;
        if c.bins() != bins {
            return Err(EnhanceError::Shape {
                expected: bins,
                got: c.bins(),
            });
        }
        Ok(c.clone())
    }
}

impl SpectrumSource for Vec<Vec<Complex64>> {
    fn spectrum(&mut self, frame: usize, bins: usize) -> Result<Vec<Complex64>, EnhanceError> {
        let s = self
            .get(frame)
            .ok_or_else(|| EnhanceError::Source(format!("no spectrum for frame {frame}")))?;
        if s.len() != bins {
            return Err(EnhanceError::Shape {
                expected: bins,
                got: s.len(),
            });
        }
        Ok(s.clone())
    }
}

fn complex_row(matrix: &Matrix, r: usize) -> Vec<Complex64> {
    matrix
        .row(r)
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect()
}

fn load_records(path: &Path, role: Role) -> Result<Matrix, EnhanceError> {
    let (header, matrix) = read_matrix(path).map_err(|e| EnhanceError::Source(e.to_string()))?;
    if header.role != role {
        return Err(EnhanceError::Source(format!(
            "{}: expected role {role:?}, found {:?}",
            path.display(),
            header.role
        )));
    }
    Ok(matrix)
}

/// Deep-filter taps from a matrix file: one row per frame, per bin the nine
/// taps `(i, j)` in row-major order, complex interleaved.
#[derive(Debug, Clone)]
pub struct FileCoeffSource {
    records: Matrix,
}

impl FileCoeffSource {
    pub fn open(path: &Path) -> Result<Self, EnhanceError> {
        Ok(Self {
            records: load_records(path, Role::DeepFilter)?,
        })
    }

    pub fn encode(frames: &[DeepFilterCoeffs]) -> Matrix {
        let cols = frames.first().map_or(0, |c| c.bins() * 18);
        let mut data = Vec::with_capacity(frames.len() * cols);
        for c in frames {
            for t in &c.taps {
                for row in t {
                    for z in row {
                        data.push(z.re);
                        data.push(z.im);
                    }
                }
            }
        }
        Matrix {
            rows: frames.len(),
            cols,
            data,
        }
    }
}

impl CoeffSource for FileCoeffSource {
    fn coeffs(&mut self, frame: usize, bins: usize) -> Result<DeepFilterCoeffs, EnhanceError> {
        if frame >= self.records.rows {
            return Err(EnhanceError::Source(format!("no coefficients for frame {frame}")));
        }
        if self.records.cols != bins * 18 {
            return Err(EnhanceError::Shape {
                expected: bins,
                got: self.records.cols / 18,
            });
        }
        let values = complex_row(&self.records, frame);
        let mut c = DeepFilterCoeffs::zeros(bins);
        for (f, t) in c.taps.iter_mut().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    t[i][j] = values[f * 9 + i * 3 + j];
                }
            }
        }
        Ok(c)
    }
}

/// Compressed spectra from a matrix file, one complex-interleaved row per frame.
#[derive(Debug, Clone)]
pub struct FileSpectrumSource {
    records: Matrix,
}

impl FileSpectrumSource {
    pub fn open(path: &Path) -> Result<Self, EnhanceError> {
        Ok(Self {
            records: load_records(path, Role::Mapping)?,
        })
    }
}

impl SpectrumSource for FileSpectrumSource {
    fn spectrum(&mut self, frame: usize, bins: usize) -> Result<Vec<Complex64>, EnhanceError> {
        if frame >= self.records.rows {
            return Err(EnhanceError::Source(format!("no spectrum for frame {frame}")));
        }
        if self.records.cols != bins * 2 {
            return Err(EnhanceError::Shape {
                expected: bins,
                got: self.records.cols / 2,
            });
        }
        Ok(complex_row(&self.records, frame))
    }
}

/// Applies per-frame deep-filter taps from a source to the last three frames.
pub struct DeepFilterApply<S> {
    source: S,
    history: Vec<SpectralFrame>,
}

impl<S: CoeffSource> DeepFilterApply<S> {
    pub fn new(source: S) -> Self {
        Self {
            source,
            history: Vec::with_capacity(3),
        }
    }
}

impl<S: CoeffSource> Enhancer for DeepFilterApply<S> {
    fn target(&self) -> Target {
        Target::Filtering
    }
    fn name(&self) -> String {
        "deep_filter".into()
    }
    fn enhance(&mut self, frame: &SpectralFrame, slot: usize) -> Result<SpectralFrame, EnhanceError> {
        if self.history.len() == 3 {
            self.history.remove(0);
        }
        self.history.push(frame.clone());
        let coeffs = self.source.coeffs(frame.index, frame.len())?;
        let refs: Vec<&SpectralFrame> = self.history.iter().collect();
        let mut out = apply_deep_filter(&refs, &coeffs)?;
        out.index = slot;
        Ok(out)
    }
}

/// Decompresses a predicted compressed spectrum per frame.
///
/// Record `k` is the estimate produced after observing frame `k`; under a
/// predictor it lands in slot `k + a`.
pub struct Mapping<S> {
    source: S,
    exponent: f64,
}

impl<S: SpectrumSource> Mapping<S> {
    pub fn new(source: S, exponent: f64) -> Result<Self, EnhanceError> {
        if !(exponent > 0.0 && exponent <= 1.0) {
            return Err(EnhanceError::BadExponent(exponent));
        }
        Ok(Self { source, exponent })
    }
}

impl<S: SpectrumSource> Enhancer for Mapping<S> {
    fn target(&self) -> Target {
        Target::Mapping
    }
    fn name(&self) -> String {
        "mapping".into()
    }
    fn enhance(&mut self, frame: &SpectralFrame, slot: usize) -> Result<SpectralFrame, EnhanceError> {
        let bins = self.source.spectrum(frame.index, frame.len())?;
        decompress(&SpectralFrame { bins, index: slot }, self.exponent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enhance::compress;
    use crate::transforms::write_matrix;

    #[test]
    fn file_coefficients_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("df.bin");
        let mut c = DeepFilterCoeffs::identity(4);
        c.taps[2][1][0] = Complex64::new(0.25, -0.5);
        write_matrix(&path, &FileCoeffSource::encode(&[c.clone(), c.clone()]), Role::DeepFilter, None).unwrap();
        let mut src = FileCoeffSource::open(&path).unwrap();
        assert_eq!(src.coeffs(1, 4).unwrap(), c);
        assert!(src.coeffs(2, 4).is_err());
        assert!(matches!(src.coeffs(0, 5), Err(EnhanceError::Shape { .. })));
    }

    #[test]
    fn mapping_decompresses_records() {
        let target = SpectralFrame {
            bins: vec![Complex64::new(0.5, 0.25), Complex64::new(-2.0, 1.0)],
            index: 0,
        };
        let compressed = compress(&target, 0.3).unwrap();
        let mut m = Mapping::new(vec![compressed.bins], 0.3).unwrap();
        let out = m.enhance(&SpectralFrame::zeros(2, 0), 0).unwrap();
        for (a, b) in out.bins.iter().zip(&target.bins) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn wrong_role_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        write_matrix(&path, &Matrix::zeros(1, 4), Role::Mapping, None).unwrap();
        assert!(FileCoeffSource::open(&path).is_err());
        assert!(FileSpectrumSource::open(&path).is_ok());
    }
}
