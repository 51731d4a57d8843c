//! Enhancers that cheat with a clean reference.
//!
//! They stand in for a trained model so that window geometry, prediction and
//! filtering structure can be compared in isolation. The reference frames
//! must come from the same transform and windows as the noisy stream.

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;

use super::{apply_deep_filter, compress, decompress, DeepFilterCoeffs, EnhanceError, Enhancer, Target};
use crate::transforms::SpectralFrame;

const WIENER_EPS: f64 = 1e-12;

/// `|S|^2 / (|S|^2 + |X - S|^2 + eps)` for one bin.
pub fn wiener_gain(noisy: Complex64, clean: Complex64) -> f64 {
    let s = clean.norm_sqr();
    s / (s + (noisy - clean).norm_sqr() + WIENER_EPS)
}

fn reference_frame(reference: &[SpectralFrame], index: usize, bins: usize) -> Result<&SpectralFrame, EnhanceError> {
    let frame = reference
        .get(index)
        .ok_or(EnhanceError::MissingReference(index))?;
    if frame.len() != bins {
        return Err(EnhanceError::Shape {
            expected: bins,
            got: frame.len(),
        });
    }
    Ok(frame)
}

fn wiener(noisy: &SpectralFrame, clean: &SpectralFrame) -> Vec<Complex64> {
    noisy
        .bins
        .iter()
        .zip(&clean.bins)
        .map(|(x, s)| x * wiener_gain(*x, *s))
        .collect()
}

/// Per-bin oracle Wiener gain applied to the current frame.
#[derive(Debug, Clone)]
pub struct OracleWiener {
    reference: Vec<SpectralFrame>,
}

impl OracleWiener {
    pub fn new(reference: Vec<SpectralFrame>) -> Self {
        Self { reference }
    }
}

impl Enhancer for OracleWiener {
    fn target(&self) -> Target {
        Target::Filtering
    }
    fn name(&self) -> String {
        "oracle_wiener".into()
    }
    fn enhance(&mut self, frame: &SpectralFrame, slot: usize) -> Result<SpectralFrame, EnhanceError> {
        let clean = reference_frame(&self.reference, frame.index, frame.len())?;
        Ok(SpectralFrame {
            bins: wiener(frame, clean),
            index: slot,
        })
    }
}

/// Mapping form of the oracle Wiener estimate: the estimate passes through
/// the compressed-spectrum domain a mapping model would predict in.
///
/// Wrapped in a predictor, the estimate for frame `k` is committed to
/// `k + a`, i.e. the last enhanced frame is repeated.
#[derive(Debug, Clone)]
pub struct WienerMapping {
    reference: Vec<SpectralFrame>,
    exponent: f64,
}

impl WienerMapping {
    pub fn new(reference: Vec<SpectralFrame>, exponent: f64) -> Result<Self, EnhanceError> {
        if !(exponent > 0.0 && exponent <= 1.0) {
            return Err(EnhanceError::BadExponent(exponent));
        }
        Ok(Self {
            reference,
            exponent,
        })
    }
}

impl Enhancer for WienerMapping {
    fn target(&self) -> Target {
        Target::Mapping
    }
    fn name(&self) -> String {
        "oracle_wiener_mapping".into()
    }
    fn enhance(&mut self, frame: &SpectralFrame, slot: usize) -> Result<SpectralFrame, EnhanceError> {
        let clean = reference_frame(&self.reference, frame.index, frame.len())?;
        let estimate = SpectralFrame {
            bins: wiener(frame, clean),
            index: slot,
        };
        let compressed = compress(&estimate, self.exponent)?;
        decompress(&compressed, self.exponent)
    }
}

/// Returns the reference frame of the requested slot, ignoring the
/// observation. Fed the noisy stream's own frames it is a perfect predictor;
/// fed clean frames it is the best case a mapping predictor could reach.
/// Slots past the reference yield silence.
#[derive(Debug, Clone)]
pub struct OracleLookahead {
    reference: Vec<SpectralFrame>,
}

impl OracleLookahead {
    pub fn new(reference: Vec<SpectralFrame>) -> Self {
        Self { reference }
    }
}

impl Enhancer for OracleLookahead {
    fn target(&self) -> Target {
        Target::Mapping
    }
    fn name(&self) -> String {
        "oracle_lookahead".into()
    }
    fn enhance(&mut self, frame: &SpectralFrame, slot: usize) -> Result<SpectralFrame, EnhanceError> {
        match self.reference.get(slot) {
            Some(r) if r.len() == frame.len() => Ok(SpectralFrame {
                bins: r.bins.clone(),
                index: slot,
            }),
            Some(r) => Err(EnhanceError::Shape {
                expected: frame.len(),
                got: r.len(),
            }),
            None => Ok(SpectralFrame::zeros(frame.len(), slot)),
        }
    }
}

type Mat9 = SMatrix<Complex64, 9, 9>;
type Vec9 = SVector<Complex64, 9>;

/// Causal multi-frame Wiener filter over the 3x3 deep-filter neighbourhood.
///
/// Per bin, the noisy autocorrelation and the noisy/clean cross-correlation
/// are tracked with exponential smoothing; the taps solve the regularized
/// normal equations and are applied through [`apply_deep_filter`].
#[derive(Debug, Clone)]
pub struct OracleDeepFilter {
    reference: Vec<SpectralFrame>,
    smoothing: f64,
    history: Vec<SpectralFrame>,
    auto: Vec<Mat9>,
    cross: Vec<Vec9>,
}

impl OracleDeepFilter {
    pub fn new(reference: Vec<SpectralFrame>, smoothing: f64) -> Self {
        Self {
            reference,
            smoothing,
            history: Vec::with_capacity(3),
            auto: Vec::new(),
            cross: Vec::new(),
        }
    }

    fn neighbourhood(&self, f: usize, bins: usize) -> Vec9 {
        let mut v = Vec9::zeros();
        for (i, frame) in self.history.iter().rev().enumerate() {
            for j in 0..3 {
                let g = f as isize + j as isize - 1;
                if (0..bins as isize).contains(&g) {
                    v[i * 3 + j] = frame.bins[g as usize];
                }
            }
        }
        v
    }
}

impl Enhancer for OracleDeepFilter {
    fn target(&self) -> Target {
        Target::Filtering
    }
    fn name(&self) -> String {
        "oracle_deep_filter".into()
    }
    fn enhance(&mut self, frame: &SpectralFrame, slot: usize) -> Result<SpectralFrame, EnhanceError> {
        let bins = frame.len();
        let clean = reference_frame(&self.reference, frame.index, bins)?.clone();
        if self.auto.len() != bins {
            self.auto = vec![Mat9::zeros(); bins];
            self.cross = vec![Vec9::zeros(); bins];
        }
        if self.history.len() == 3 {
            self.history.remove(0);
        }
        self.history.push(frame.clone());

        let alpha = self.smoothing;
        let mut coeffs = DeepFilterCoeffs::zeros(bins);
        for f in 0..bins {
            let v = self.neighbourhood(f, bins);
            let auto = &mut self.auto[f];
            *auto = *auto * Complex64::from(alpha) + (v * v.adjoint()) * Complex64::from(1.0 - alpha);
            let cross = &mut self.cross[f];
            *cross = *cross * Complex64::from(alpha) + v * (clean.bins[f].conj() * (1.0 - alpha));

            let trace: f64 = (0..9).map(|m| auto[(m, m)].re).sum();
            let delta = 1e-3 * trace / 9.0 + 1e-12;
            let regularized = *auto + Mat9::identity() * Complex64::from(delta);
            let taps = regularized.lu().solve(cross).unwrap_or_else(Vec9::zeros);
            for i in 0..3 {
                for j in 0..3 {
                    coeffs.taps[f][i][j] = taps[i * 3 + j].conj();
                }
            }
        }
        let refs: Vec<&SpectralFrame> = self.history.iter().collect();
        let mut out = apply_deep_filter(&refs, &coeffs)?;
        out.index = slot;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(values: &[(f64, f64)], index: usize) -> SpectralFrame {
        SpectralFrame {
            bins: values.iter().map(|&(re, im)| Complex64::new(re, im)).collect(),
            index,
        }
    }

    #[test]
    fn clean_input_passes_through() {
        let x = frame(&[(1.0, 2.0), (-0.5, 0.1), (3.0, 0.0)], 0);
        let mut w = OracleWiener::new(vec![x.clone()]);
        let y = w.enhance(&x, 0).unwrap();
        for (a, b) in y.bins.iter().zip(&x.bins) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn silent_speech_is_suppressed() {
        let x = frame(&[(1.0, 2.0), (-0.5, 0.1)], 0);
        let s = frame(&[(0.0, 0.0), (0.0, 0.0)], 0);
        let mut w = OracleWiener::new(vec![s]);
        let y = w.enhance(&x, 0).unwrap();
        assert!(y.bins.iter().all(|z| z.norm() < 1e-9));
    }

    #[test]
    fn gains_stay_in_unit_interval() {
        for (x, s) in [((1.0, 0.0), (1.0, 0.0)), ((0.0, 0.0), (5.0, 1.0)), ((3.0, -1.0), (0.1, 0.2))] {
            let g = wiener_gain(Complex64::new(x.0, x.1), Complex64::new(s.0, s.1));
            assert!((0.0..=1.0).contains(&g));
        }
    }

    #[test]
    fn missing_reference_frame() {
        let x = frame(&[(1.0, 0.0)], 3);
        let mut w = OracleWiener::new(vec![x.clone()]);
        assert_eq!(w.enhance(&x, 3).unwrap_err(), EnhanceError::MissingReference(3));
    }

    #[test]
    fn lookahead_reads_requested_slot() {
        let a = frame(&[(1.0, 0.0)], 0);
        let b = frame(&[(2.0, 0.0)], 1);
        let mut o = OracleLookahead::new(vec![a.clone(), b.clone()]);
        assert_eq!(o.enhance(&a, 1).unwrap().bins, b.bins);
        assert_eq!(o.enhance(&b, 2).unwrap().bins, vec![Complex64::new(0.0, 0.0)]);
    }

    #[test]
    fn deep_filter_oracle_converges_on_clean_input() {
        let frames: Vec<SpectralFrame> = (0..40)
            .map(|k| {
                let bins: Vec<(f64, f64)> = (0..5)
                    .map(|f| (((k * 7 + f * 3) % 11) as f64 - 5.0, ((k + f) % 4) as f64))
                    .collect();
                frame(&bins, k)
            })
            .collect();
        let mut o = OracleDeepFilter::new(frames.clone(), 0.9);
        let mut last_err = 0.0;
        for f in &frames {
            let y = o.enhance(f, f.index).unwrap();
            last_err = y.bins.iter().zip(&f.bins).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        }
        assert!(last_err < 0.05, "{last_err}");
    }
}
