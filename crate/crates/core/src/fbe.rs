//! Filterbank-equalizer path: one short time-variant FIR filter per hop,
//! applied by frequency-domain multiplication over the last `F = 2P` input
//! samples, keeping the last `P` output samples (overlap-discard).
//!
//! A filter with at most `F - P + 1` taps is applied exactly (linear
//! convolution). Longer filters, up to `F` taps, wrap circularly into the
//! kept samples.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use thiserror::Error;

use crate::config::{Mode, Signal, StreamConfig};
use crate::enhance::wiener_gain;
use crate::transforms::{read_matrix, Matrix, Role};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FbeError {
    #[error("need {needed} samples of history up to index {chunk_end}, have {available}")]
    InsufficientHistory {
        needed: usize,
        chunk_end: usize,
        available: usize,
    },
    #[error("filter geometry: {0}")]
    Geometry(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("configuration: {0}")]
    Config(String),
    #[error("filter source: {0}")]
    Source(String),
}

/// FIR filter held as the spectrum of its zero-padded taps.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFilter {
    /// `fft_size / 2 + 1` bins.
    pub taps: Vec<Complex64>,
    pub fft_size: usize,
    pub effective_len: usize,
}

impl FrameFilter {
    pub fn identity(fft_size: usize) -> Self {
        Self {
            taps: vec![Complex64::new(1.0, 0.0); fft_size / 2 + 1],
            fft_size,
            effective_len: 1,
        }
    }

    pub fn zero(fft_size: usize) -> Self {
        Self {
            taps: vec![Complex64::new(0.0, 0.0); fft_size / 2 + 1],
            fft_size,
            effective_len: 1,
        }
    }

    pub fn from_time_taps(taps: &[f64], fft_size: usize) -> Result<Self, FbeError> {
        if taps.is_empty() || taps.len() > fft_size {
            return Err(FbeError::Geometry(format!(
                "{} taps do not fit an FFT of size {fft_size}",
                taps.len()
            )));
        }
        let fft = RealFftPlanner::<f64>::new().plan_fft_forward(fft_size);
        let mut input = fft.make_input_vec();
        input[..taps.len()].copy_from_slice(taps);
        let mut spectrum = fft.make_output_vec();
        fft.process(&mut input, &mut spectrum)
            .expect("buffer sizes come from the plan");
        Ok(Self {
            taps: spectrum,
            fft_size,
            effective_len: taps.len(),
        })
    }

    /// Pure delay of `delay` samples.
    pub fn delay(delay: usize, fft_size: usize) -> Result<Self, FbeError> {
        let mut taps = vec![0.0; delay + 1];
        taps[delay] = 1.0;
        Self::from_time_taps(&taps, fft_size)
    }

    /// Whether overlap-discard with this hop yields linear convolution.
    pub fn is_exact(&self, hop: usize) -> bool {
        self.effective_len + hop <= self.fft_size + 1
    }
}

/// Planned forward/inverse transforms for one `(F, P)` geometry.
#[derive(Clone)]
pub struct FbeKernel {
    fft_size: usize,
    hop: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl fmt::Debug for FbeKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FbeKernel {{ fft_size: {}, hop: {} }}", self.fft_size, self.hop)
    }
}

impl FbeKernel {
    pub fn new(fft_size: usize, hop: usize) -> Result<Self, FbeError> {
        if hop == 0 || hop > fft_size || fft_size % 2 != 0 {
            return Err(FbeError::Geometry(format!(
                "hop {hop} with FFT size {fft_size}"
            )));
        }
        let mut planner = RealFftPlanner::<f64>::new();
        Ok(Self {
            fft_size,
            hop,
            forward: planner.plan_fft_forward(fft_size),
            inverse: planner.plan_fft_inverse(fft_size),
        })
    }

    pub fn check(&self, filter: &FrameFilter) -> Result<(), FbeError> {
        if filter.fft_size != self.fft_size || filter.taps.len() != self.fft_size / 2 + 1 {
            return Err(FbeError::Geometry(format!(
                "filter FFT size {} ({} bins), expected {}",
                filter.fft_size,
                filter.taps.len(),
                self.fft_size
            )));
        }
        if filter.effective_len == 0 || filter.effective_len > self.fft_size {
            return Err(FbeError::Geometry(format!(
                "effective length {} outside 1..={}",
                filter.effective_len, self.fft_size
            )));
        }
        Ok(())
    }

    /// Filters one chunk of `F` samples and returns its last `P` samples.
    pub fn step(&self, chunk: &[f64], filter: &FrameFilter) -> Result<Vec<f64>, FbeError> {
        if chunk.len() != self.fft_size {
            return Err(FbeError::Dimension {
                expected: self.fft_size,
                got: chunk.len(),
            });
        }
        self.check(filter)?;
        let mut input = chunk.to_vec();
        let mut spectrum = self.forward.make_output_vec();
        self.forward
            .process(&mut input, &mut spectrum)
            .expect("buffer sizes come from the plan");
        for (s, h) in spectrum.iter_mut().zip(&filter.taps) {
            *s *= h;
        }
        spectrum[0].im = 0.0;
        let last = spectrum.len() - 1;
        spectrum[last].im = 0.0;
        let mut output = self.inverse.make_output_vec();
        self.inverse
            .process(&mut spectrum, &mut output)
            .expect("buffer sizes come from the plan");
        let scale = 1.0 / self.fft_size as f64;
        Ok(output[self.fft_size - self.hop..]
            .iter()
            .map(|y| y * scale)
            .collect())
    }
}

/// One overlap-discard step on `history[chunk_end + 1 - F ..= chunk_end]`.
pub fn fbe_step(
    history: &[f64],
    chunk_end: usize,
    filter: &FrameFilter,
    hop: usize,
) -> Result<Vec<f64>, FbeError> {
    let f = filter.fft_size;
    if chunk_end >= history.len() || chunk_end + 1 < f {
        return Err(FbeError::InsufficientHistory {
            needed: f,
            chunk_end,
            available: history.len().min(chunk_end + 1),
        });
    }
    let kernel = FbeKernel::new(f, hop)?;
    kernel.step(&history[chunk_end + 1 - f..=chunk_end], filter)
}

/// Linear map from an `N`-coefficient filter to `2P` FIR taps.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterShortener {
    /// `N x 2P`, row-major.
    pub matrix: Matrix,
}

impl FilterShortener {
    pub fn new(matrix: Matrix) -> Self {
        Self { matrix }
    }

    /// Keeps the first `taps` coefficients.
    pub fn truncation(n: usize, taps: usize) -> Self {
        Self {
            matrix: Matrix::from_fn(n, taps, |r, c| if r == c { 1.0 } else { 0.0 }),
        }
    }
}

pub fn shorten_filters(long: &[f64], shortener: &FilterShortener) -> Result<Vec<f64>, FbeError> {
    let m = &shortener.matrix;
    if long.len() != m.rows {
        return Err(FbeError::Dimension {
            expected: m.rows,
            got: long.len(),
        });
    }
    let mut taps = vec![0.0; m.cols];
    for (r, x) in long.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (t, w) in taps.iter_mut().zip(m.row(r)) {
            *t += x * w;
        }
    }
    Ok(taps)
}

/// Produces the filter for each hop from the input seen so far.
pub trait FilterPredictor: Send {
    /// `chunk` holds the last `F` input samples up to the end of hop
    /// `chunk_index` (zeros before the stream start).
    fn predict(&mut self, chunk_index: usize, chunk: &[f64]) -> Result<FrameFilter, FbeError>;

    fn is_identity(&self) -> bool {
        false
    }

    fn name(&self) -> String;
}

impl<P: FilterPredictor + ?Sized> FilterPredictor for Box<P> {
    fn predict(&mut self, chunk_index: usize, chunk: &[f64]) -> Result<FrameFilter, FbeError> {
        (**self).predict(chunk_index, chunk)
    }
    fn is_identity(&self) -> bool {
        (**self).is_identity()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPredictor;

impl FilterPredictor for IdentityPredictor {
    fn predict(&mut self, _: usize, chunk: &[f64]) -> Result<FrameFilter, FbeError> {
        Ok(FrameFilter::identity(chunk.len()))
    }
    fn is_identity(&self) -> bool {
        true
    }
    fn name(&self) -> String {
        "identity".into()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPredictor;

impl FilterPredictor for ZeroPredictor {
    fn predict(&mut self, _: usize, chunk: &[f64]) -> Result<FrameFilter, FbeError> {
        Ok(FrameFilter::zero(chunk.len()))
    }
    fn name(&self) -> String {
        "zero".into()
    }
}

/// The same filter every hop.
#[derive(Debug, Clone)]
pub struct FixedFilter(pub FrameFilter);

impl FilterPredictor for FixedFilter {
    fn predict(&mut self, _: usize, _: &[f64]) -> Result<FrameFilter, FbeError> {
        Ok(self.0.clone())
    }
    fn name(&self) -> String {
        "fixed_fir".into()
    }
}

/// Filters replayed from a matrix file, one complex-interleaved spectrum per hop.
#[derive(Debug, Clone)]
pub struct FilePredictor {
    records: Matrix,
    effective_len: Option<usize>,
}

impl FilePredictor {
    pub fn open(path: &std::path::Path) -> Result<Self, FbeError> {
        let (header, records) = read_matrix(path).map_err(|e| FbeError::Source(e.to_string()))?;
        if header.role != Role::FbeFilter {
            return Err(FbeError::Source(format!(
                "expected role FbeFilter, found {:?}",
                header.role
            )));
        }
        Ok(Self {
            records,
            effective_len: header.effective_len,
        })
    }

    pub fn encode(filters: &[FrameFilter]) -> Matrix {
        let cols = filters.first().map_or(0, |f| f.taps.len() * 2);
        let data = filters
            .iter()
            .flat_map(|f| f.taps.iter().flat_map(|z| [z.re, z.im]))
            .collect();
        Matrix {
            rows: filters.len(),
            cols,
            data,
        }
    }
}

impl FilterPredictor for FilePredictor {
    fn predict(&mut self, chunk_index: usize, chunk: &[f64]) -> Result<FrameFilter, FbeError> {
        let f = chunk.len();
        if chunk_index >= self.records.rows {
            return Err(FbeError::Source(format!("no filter for hop {chunk_index}")));
        }
        if self.records.cols != 2 * (f / 2 + 1) {
            return Err(FbeError::Dimension {
                expected: 2 * (f / 2 + 1),
                got: self.records.cols,
            });
        }
        let taps = self
            .records
            .row(chunk_index)
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        Ok(FrameFilter {
            taps,
            fft_size: f,
            effective_len: self.effective_len.unwrap_or(f),
        })
    }
    fn name(&self) -> String {
        "file".into()
    }
}

/// Oracle Wiener gains from the current chunk of noisy and clean input,
/// used directly as a full-length (circular) filter spectrum.
#[derive(Clone)]
pub struct OracleWienerFbe {
    clean: Vec<f64>,
    hop: usize,
    forward: Arc<dyn RealToComplex<f64>>,
}

impl fmt::Debug for OracleWienerFbe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OracleWienerFbe {{ hop: {}, clean: {} samples }}", self.hop, self.clean.len())
    }
}

impl OracleWienerFbe {
    pub fn new(clean: Vec<f64>, hop: usize) -> Self {
        Self {
            clean,
            hop,
            forward: RealFftPlanner::<f64>::new().plan_fft_forward(2 * hop),
        }
    }

    fn spectrum(&self, samples: &[f64]) -> Vec<Complex64> {
        let mut input = samples.to_vec();
        let mut out = self.forward.make_output_vec();
        self.forward
            .process(&mut input, &mut out)
            .expect("buffer sizes come from the plan");
        out
    }
}

impl FilterPredictor for OracleWienerFbe {
    fn predict(&mut self, chunk_index: usize, chunk: &[f64]) -> Result<FrameFilter, FbeError> {
        let f = 2 * self.hop;
        if chunk.len() != f {
            return Err(FbeError::Dimension {
                expected: f,
                got: chunk.len(),
            });
        }
        let end = (chunk_index + 1) * self.hop;
        let clean: Vec<f64> = (0..f)
            .map(|i| {
                (end + i)
                    .checked_sub(f)
                    .and_then(|t| self.clean.get(t))
                    .copied()
                    .unwrap_or(0.0)
            })
            .collect();
        let x = self.spectrum(chunk);
        let s = self.spectrum(&clean);
        let taps = x
            .iter()
            .zip(&s)
            .map(|(x, s)| Complex64::new(wiener_gain(*x, *s), 0.0))
            .collect();
        Ok(FrameFilter {
            taps,
            fft_size: f,
            effective_len: f,
        })
    }
    fn name(&self) -> String {
        "oracle_wiener".into()
    }
}

/// Streaming FBE for one stream. Each completed hop of `P` input samples
/// releases `P` output samples.
pub struct FbeEngine<P> {
    kernel: FbeKernel,
    predictor: P,
    hop: usize,
    history: VecDeque<f64>,
    fill: usize,
    chunk: usize,
    received: usize,
}

impl<P: FilterPredictor> FbeEngine<P> {
    pub fn new(config: &StreamConfig, predictor: P) -> Result<Self, FbeError> {
        config
            .validate()
            .map_err(|e| FbeError::Config(e.to_string()))?;
        if config.mode != Mode::Fbe {
            return Err(FbeError::Config(format!("FBE engine needs FBE mode, got {config}")));
        }
        let f = 2 * config.hop;
        Ok(Self {
            kernel: FbeKernel::new(f, config.hop)?,
            predictor,
            hop: config.hop,
            history: std::iter::repeat_n(0.0, f).collect(),
            fill: 0,
            chunk: 0,
            received: 0,
        })
    }

    pub fn received(&self) -> usize {
        self.received
    }

    pub fn predictor(&self) -> &P {
        &self.predictor
    }

    pub fn push(&mut self, samples: &[f64], out: &mut Vec<f64>) -> Result<(), FbeError> {
        for &x in samples {
            self.history.pop_front();
            self.history.push_back(x);
            self.received += 1;
            self.fill += 1;
            if self.fill == self.hop {
                self.fill = 0;
                let chunk = self.history.make_contiguous();
                let filter = self.predictor.predict(self.chunk, chunk)?;
                let y = self.kernel.step(chunk, &filter)?;
                out.extend_from_slice(&y);
                self.chunk += 1;
            }
        }
        Ok(())
    }

    /// Completes a partial final hop with zeros.
    pub fn finish(&mut self, out: &mut Vec<f64>) -> Result<(), FbeError> {
        if self.fill > 0 {
            let pad = vec![0.0; self.hop - self.fill];
            self.push(&pad, out)?;
        }
        Ok(())
    }
}

/// Offline FBE enhancement; output has the input's length.
pub fn run_fbe<P: FilterPredictor>(
    input: &Signal,
    config: &StreamConfig,
    predictor: P,
) -> Result<Signal, FbeError> {
    input
        .check_rate(config)
        .map_err(|e| FbeError::Config(e.to_string()))?;
    let mut engine = FbeEngine::new(config, predictor)?;
    let mut out = Vec::with_capacity(input.len() + config.hop);
    engine.push(&input.samples, &mut out)?;
    engine.finish(&mut out)?;
    out.truncate(input.len());
    Ok(Signal {
        samples: out,
        sample_rate: input.sample_rate,
    })
}
