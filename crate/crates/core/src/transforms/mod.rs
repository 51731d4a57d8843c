//! Frame-wise analysis and synthesis transforms and the overlap-add engine.
//!
//! Analysis windows a frame, zero-pads it at the tail to `N` samples and
//! applies the basis. Synthesis inverts the basis and keeps the samples
//! `[L_a - L_s, L_a)` of the frame, i.e. the most recent `L_s` samples the
//! analysis window saw, before applying the synthesis window.

pub mod basis;
mod ola;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use thiserror::Error;

pub use basis::{dft_stacked_basis, load_basis, load_matrix, read_matrix, write_matrix, Matrix, Role};
pub use ola::{analyze_signal, stream_ola, OlaEngine};

use crate::enhance::EnhanceError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("{what}: expected length {expected}, got {got}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("canonical transform size must be even, got {0}")]
    OddTransform(usize),
    #[error("transform size {n} smaller than analysis window {analysis}")]
    TransformTooShort { n: usize, analysis: usize },
    #[error("matrix dimensions {got:?} do not match expected {expected:?}")]
    Dimension {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("io: {0}")]
    Io(String),
    #[error("window pair is not normalized for perfect reconstruction")]
    Unnormalized,
    #[error("configuration: {0}")]
    Config(String),
    #[error("enhancer: {0}")]
    Enhancer(#[from] EnhanceError),
}

/// One frame of the time-frequency representation.
///
/// Canonical frames hold `N/2 + 1` complex bins; learned-basis frames hold
/// `N` real features stored with zero imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrame {
    pub bins: Vec<Complex64>,
    pub index: usize,
}

impl SpectralFrame {
    pub fn zeros(len: usize, index: usize) -> Self {
        Self {
            bins: vec![Complex64::new(0.0, 0.0); len],
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

#[derive(Clone, PartialEq)]
pub enum TransformBasis {
    /// Discrete Fourier transform with real-input symmetry reduction.
    Canonical,
    /// Explicit matrices: analysis `N x L_a`, synthesis `N x L_s`.
    Learned {
        analysis: Matrix,
        synthesis: Matrix,
        /// Clamp negative analysis features to zero.
        rectify: bool,
    },
}

impl fmt::Debug for TransformBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformBasis::Canonical => write!(f, "Canonical"),
            TransformBasis::Learned {
                analysis,
                synthesis,
                rectify,
            } => write!(
                f,
                "Learned {{ analysis: {}x{}, synthesis: {}x{}, rectify: {rectify} }}",
                analysis.rows, analysis.cols, synthesis.rows, synthesis.cols
            ),
        }
    }
}

/// Planned transform for one frame geometry.
#[derive(Clone)]
pub struct Transform {
    n: usize,
    analysis_len: usize,
    synthesis_len: usize,
    basis: Arc<TransformBasis>,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl fmt::Debug for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transform")
            .field("n", &self.n)
            .field("analysis_len", &self.analysis_len)
            .field("synthesis_len", &self.synthesis_len)
            .field("basis", &self.basis)
            .finish()
    }
}

impl Transform {
    pub fn new(
        n: usize,
        analysis_len: usize,
        synthesis_len: usize,
        basis: Arc<TransformBasis>,
    ) -> Result<Self, TransformError> {
        if synthesis_len > analysis_len {
            return Err(TransformError::Length {
                what: "synthesis window",
                expected: analysis_len,
                got: synthesis_len,
            });
        }
        match basis.as_ref() {
            TransformBasis::Canonical => {
                if n % 2 != 0 || n == 0 {
                    return Err(TransformError::OddTransform(n));
                }
                if n < analysis_len {
                    return Err(TransformError::TransformTooShort {
                        n,
                        analysis: analysis_len,
                    });
                }
            }
            TransformBasis::Learned {
                analysis,
                synthesis,
                ..
            } => {
                if (analysis.rows, analysis.cols) != (n, analysis_len) {
                    return Err(TransformError::Dimension {
                        expected: (n, analysis_len),
                        got: (analysis.rows, analysis.cols),
                    });
                }
                if (synthesis.rows, synthesis.cols) != (n, synthesis_len) {
                    return Err(TransformError::Dimension {
                        expected: (n, synthesis_len),
                        got: (synthesis.rows, synthesis.cols),
                    });
                }
            }
        }
        let mut planner = RealFftPlanner::<f64>::new();
        // learned bases never touch the plans; keep them tiny
        let plan_len = if matches!(basis.as_ref(), TransformBasis::Canonical) { n } else { 2 };
        Ok(Self {
            n,
            analysis_len,
            synthesis_len,
            forward: planner.plan_fft_forward(plan_len),
            inverse: planner.plan_fft_inverse(plan_len),
            basis,
        })
    }

    pub fn for_config(
        config: &crate::config::StreamConfig,
        basis: Arc<TransformBasis>,
    ) -> Result<Self, TransformError> {
        Self::new(
            config.transform_size,
            config.analysis_len,
            config.synthesis_len,
            basis,
        )
    }

    pub fn canonical(n: usize, analysis_len: usize, synthesis_len: usize) -> Result<Self, TransformError> {
        Self::new(n, analysis_len, synthesis_len, Arc::new(TransformBasis::Canonical))
    }

    pub fn transform_size(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> &TransformBasis {
        &self.basis
    }

    /// Length of the frames this transform produces.
    pub fn frame_len(&self) -> usize {
        match self.basis.as_ref() {
            TransformBasis::Canonical => self.n / 2 + 1,
            TransformBasis::Learned { .. } => self.n,
        }
    }

    /// `X_k = (x_k * w_a) W`, with tail zero-padding to `N`.
    pub fn analyze(
        &self,
        frame: &[f64],
        window: &[f64],
        index: usize,
    ) -> Result<SpectralFrame, TransformError> {
        check_len("analysis frame", self.analysis_len, frame.len())?;
        check_len("analysis window", self.analysis_len, window.len())?;
        let bins = match self.basis.as_ref() {
            TransformBasis::Canonical => {
                let mut input = self.forward.make_input_vec();
                for ((dst, x), w) in input.iter_mut().zip(frame).zip(window) {
                    *dst = x * w;
                }
                let mut output = self.forward.make_output_vec();
                self.forward
                    .process(&mut input, &mut output)
                    .expect("buffer sizes come from the plan");
                output
            }
            TransformBasis::Learned {
                analysis, rectify, ..
            } => {
                let windowed: Vec<f64> = frame.iter().zip(window).map(|(x, w)| x * w).collect();
                (0..analysis.rows)
                    .map(|r| {
                        let v: f64 = analysis.row(r).iter().zip(&windowed).map(|(a, x)| a * x).sum();
                        let v = if *rectify { v.max(0.0) } else { v };
                        Complex64::new(v, 0.0)
                    })
                    .collect()
            }
        };
        Ok(SpectralFrame { bins, index })
    }

    /// `s_k = (S_k W^-1) * w_s` over the most recent `L_s` samples of the frame.
    pub fn synthesize(
        &self,
        spec: &SpectralFrame,
        window: &[f64],
    ) -> Result<Vec<f64>, TransformError> {
        check_len("spectral frame", self.frame_len(), spec.len())?;
        check_len("synthesis window", self.synthesis_len, window.len())?;
        let offset = self.analysis_len - self.synthesis_len;
        match self.basis.as_ref() {
            TransformBasis::Canonical => {
                let mut input = spec.bins.clone();
                // imaginary parts of DC and Nyquist do not survive the
                // conjugate-symmetric extension
                input[0].im = 0.0;
                let last = input.len() - 1;
                input[last].im = 0.0;
                let mut output = self.inverse.make_output_vec();
                self.inverse
                    .process(&mut input, &mut output)
                    .expect("buffer sizes come from the plan");
                let scale = 1.0 / self.n as f64;
                Ok(output[offset..offset + self.synthesis_len]
                    .iter()
                    .zip(window)
                    .map(|(y, w)| y * scale * w)
                    .collect())
            }
            TransformBasis::Learned { synthesis, .. } => {
                let mut out = vec![0.0; self.synthesis_len];
                for (r, bin) in spec.bins.iter().enumerate() {
                    let v = bin.re;
                    if v == 0.0 {
                        continue;
                    }
                    for (o, s) in out.iter_mut().zip(synthesis.row(r)) {
                        *o += v * s;
                    }
                }
                out.iter_mut().zip(window).for_each(|(o, w)| *o *= w);
                Ok(out)
            }
        }
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), TransformError> {
    if expected != got {
        return Err(TransformError::Length {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

/// One-shot analysis of a single frame; plans a transform per call.
pub fn analyze_frame(
    frame: &[f64],
    window: &[f64],
    basis: &TransformBasis,
    n: usize,
) -> Result<SpectralFrame, TransformError> {
    let transform = Transform::new(n, frame.len(), frame.len(), Arc::new(basis.clone()))?;
    transform.analyze(frame, window, 0)
}

/// One-shot synthesis of a single frame whose analysis window had
/// `analysis_len` samples.
pub fn synthesize_frame(
    spec: &SpectralFrame,
    window: &[f64],
    basis: &TransformBasis,
    n: usize,
    analysis_len: usize,
) -> Result<Vec<f64>, TransformError> {
    let transform = Transform::new(n, analysis_len, window.len(), Arc::new(basis.clone()))?;
    transform.synthesize(spec, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::windows::asym_pair;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn delta_has_flat_spectrum() {
        let mut x = vec![0.0; 16];
        x[0] = 1.0;
        let spec = analyze_frame(&x, &[1.0; 16], &TransformBasis::Canonical, 16).unwrap();
        assert_eq!(spec.len(), 9);
        for b in &spec.bins {
            assert!((b - c(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn dc_concentrates_in_bin_zero() {
        let spec = analyze_frame(&[1.0; 32], &[1.0; 32], &TransformBasis::Canonical, 32).unwrap();
        assert!((spec.bins[0] - c(32.0, 0.0)).norm() < 1e-12);
        assert!(spec.bins[1..].iter().all(|b| b.norm() < 1e-12));
    }

    #[test]
    fn rectangular_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ones = vec![1.0; 64];
        let spec = analyze_frame(&x, &ones, &TransformBasis::Canonical, 64).unwrap();
        let y = synthesize_frame(&spec, &ones, &TransformBasis::Canonical, 64, 64).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_spectrum_synthesizes_silence() {
        let spec = SpectralFrame::zeros(161, 0);
        let y = synthesize_frame(&spec, &[1.0; 320], &TransformBasis::Canonical, 320, 320).unwrap();
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn asym_round_trip_keeps_recent_samples() {
        let pair = asym_pair(320, 80).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x = vec![0.0; 320];
        for v in &mut x[240..] {
            *v = rng.random_range(-1.0..1.0);
        }
        let t = Transform::canonical(320, 320, 80).unwrap();
        let spec = t.analyze(&x, &pair.analysis, 0).unwrap();
        let y = t.synthesize(&spec, &pair.synthesis).unwrap();
        for m in 0..80 {
            let expected = x[240 + m] * pair.analysis[240 + m] * pair.synthesis[m];
            assert!((y[m] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_padding_keeps_frame_at_head() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..48).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ones = vec![1.0; 48];
        let t = Transform::canonical(320, 48, 48).unwrap();
        let spec = t.analyze(&x, &ones, 0).unwrap();
        assert_eq!(spec.len(), 161);
        let y = t.synthesize(&spec, &ones).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn parseval_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 256;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spec = analyze_frame(&x, &vec![1.0; n], &TransformBasis::Canonical, n).unwrap();
        let time: f64 = x.iter().map(|v| v * v).sum();
        let b = &spec.bins;
        let inner: f64 = b[1..n / 2].iter().map(|z| z.norm_sqr()).sum();
        let freq = (b[0].norm_sqr() + 2.0 * inner + b[n / 2].norm_sqr()) / n as f64;
        assert!(((time - freq) / time).abs() < 1e-6);
    }

    #[test]
    fn length_mismatch_is_reported() {
        let t = Transform::canonical(32, 32, 32).unwrap();
        assert!(matches!(
            t.analyze(&[0.0; 31], &[1.0; 32], 0),
            Err(TransformError::Length { .. })
        ));
        let spec = SpectralFrame::zeros(16, 0);
        assert!(matches!(t.synthesize(&spec, &[1.0; 32]), Err(TransformError::Length { .. })));
        assert!(matches!(Transform::canonical(31, 16, 16), Err(TransformError::OddTransform(31))));
    }

    #[test]
    fn stacked_dft_basis_matches_canonical_bins() {
        let n = 64;
        let (a, s) = dft_stacked_basis(n, 48, 24);
        let learned = Arc::new(TransformBasis::Learned {
            analysis: a,
            synthesis: s,
            rectify: false,
        });
        let tl = Transform::new(n, 48, 24, learned).unwrap();
        let tc = Transform::canonical(n, 48, 24).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..48).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..48).map(|_| rng.random_range(0.0..1.0)).collect();
        let ws: Vec<f64> = (0..24).map(|_| rng.random_range(0.0..1.0)).collect();
        let fl = tl.analyze(&x, &w, 0).unwrap();
        let fc = tc.analyze(&x, &w, 0).unwrap();
        for f in 0..=n / 2 {
            assert!((fl.bins[f].re - fc.bins[f].re).abs() < 1e-9);
        }
        for f in 1..n / 2 {
            assert!((fl.bins[n / 2 + f].re - fc.bins[f].im).abs() < 1e-9);
        }
        let yl = tl.synthesize(&fl, &ws).unwrap();
        let yc = tc.synthesize(&fc, &ws).unwrap();
        for (a, b) in yl.iter().zip(&yc) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rectifier_clamps_learned_features() {
        let analysis = Matrix::from_fn(4, 4, |r, c| if r == c { if r % 2 == 0 { 1.0 } else { -1.0 } } else { 0.0 });
        let synthesis = Matrix::from_fn(4, 4, |r, c| if r == c { 1.0 } else { 0.0 });
        let basis = TransformBasis::Learned {
            analysis,
            synthesis,
            rectify: true,
        };
        let spec = analyze_frame(&[1.0, 1.0, -1.0, -1.0], &[1.0; 4], &basis, 4).unwrap();
        let re: Vec<f64> = spec.bins.iter().map(|b| b.re).collect();
        assert_eq!(re, vec![1.0, 0.0, 0.0, 1.0]);
    }
}
