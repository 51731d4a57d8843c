use num_complex::Complex64;

use super::EnhanceError;
use crate::transforms::SpectralFrame;

/// Compression exponent for mapping targets.
pub const DEFAULT_COMPRESSION: f64 = 0.3;

/// Causal 3x3 deep-filter taps for one frame.
///
/// `taps[f][i][j]` weighs bin `f + j - 1` of frame `k - i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepFilterCoeffs {
    pub taps: Vec<[[Complex64; 3]; 3]>,
}

impl DeepFilterCoeffs {
    pub fn zeros(bins: usize) -> Self {
        Self {
            taps: vec![[[Complex64::new(0.0, 0.0); 3]; 3]; bins],
        }
    }

    /// Unit center tap: passes the current frame unchanged.
    pub fn identity(bins: usize) -> Self {
        let mut c = Self::zeros(bins);
        for t in &mut c.taps {
            t[0][1] = Complex64::new(1.0, 0.0);
        }
        c
    }

    pub fn bins(&self) -> usize {
        self.taps.len()
    }
}

/// `S(k, f) = sum_{i=0..2} sum_{j=-1..1} H(f, i, j) X(k - i, f + j)`.
///
/// `history` is ordered oldest to newest and ends with frame `k`; fewer than
/// three frames means the missing leading frames are zero. Bins outside the
/// frame contribute zero.
pub fn apply_deep_filter(
    history: &[&SpectralFrame],
    coeffs: &DeepFilterCoeffs,
) -> Result<SpectralFrame, EnhanceError> {
    let current = history.last().ok_or(EnhanceError::Shape {
        expected: coeffs.bins(),
        got: 0,
    })?;
    let bins = current.len();
    if coeffs.bins() != bins {
        return Err(EnhanceError::Shape {
            expected: bins,
            got: coeffs.bins(),
        });
    }
    if let Some(bad) = history.iter().find(|f| f.len() != bins) {
        return Err(EnhanceError::Shape {
            expected: bins,
            got: bad.len(),
        });
    }
    let mut out = vec![Complex64::new(0.0, 0.0); bins];
    for (i, frame) in history.iter().rev().take(3).enumerate() {
        for (f, acc) in out.iter_mut().enumerate() {
            let taps = &coeffs.taps[f][i];
            let lo = f.saturating_sub(1);
            let hi = (f + 1).min(bins - 1);
            for g in lo..=hi {
                *acc += taps[g + 1 - f] * frame.bins[g];
            }
        }
    }
    Ok(SpectralFrame {
        bins: out,
        index: current.index,
    })
}

fn power_law(spec: &SpectralFrame, exponent: f64) -> SpectralFrame {
    let bins = spec
        .bins
        .iter()
        .map(|z| {
            let mag = z.norm();
            if mag == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                z * (mag.powf(exponent) / mag)
            }
        })
        .collect();
    SpectralFrame {
        bins,
        index: spec.index,
    }
}

/// `z -> |z|^c z / |z|`, with `0 -> 0`.
pub fn compress(spec: &SpectralFrame, c: f64) -> Result<SpectralFrame, EnhanceError> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(EnhanceError::BadExponent(c));
    }
    Ok(power_law(spec, c))
}

/// Inverse of [`compress`] for the same exponent.
pub fn decompress(spec: &SpectralFrame, c: f64) -> Result<SpectralFrame, EnhanceError> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(EnhanceError::BadExponent(c));
    }
    Ok(power_law(spec, 1.0 / c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frame(rng: &mut ChaCha8Rng, bins: usize, index: usize) -> SpectralFrame {
        SpectralFrame {
            bins: (0..bins)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
            index,
        }
    }

    fn random_coeffs(rng: &mut ChaCha8Rng, bins: usize) -> DeepFilterCoeffs {
        let mut c = DeepFilterCoeffs::zeros(bins);
        for t in &mut c.taps {
            for row in t.iter_mut() {
                for v in row.iter_mut() {
                    *v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                }
            }
        }
        c
    }

    // independent triple loop over (frame lag, frequency offset)
    fn naive(history: &[SpectralFrame; 3], coeffs: &DeepFilterCoeffs) -> Vec<Complex64> {
        let bins = history[2].len();
        let mut out = vec![Complex64::new(0.0, 0.0); bins];
        for f in 0..bins as isize {
            for i in 0..3usize {
                for j in -1isize..=1 {
                    let g = f + j;
                    if g < 0 || g >= bins as isize {
                        continue;
                    }
                    let h = coeffs.taps[f as usize][i][(j + 1) as usize];
                    out[f as usize] += h * history[2 - i].bins[g as usize];
                }
            }
        }
        out
    }

    #[test]
    fn center_tap_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let frames = [random_frame(&mut rng, 17, 0), random_frame(&mut rng, 17, 1), random_frame(&mut rng, 17, 2)];
        let refs: Vec<&SpectralFrame> = frames.iter().collect();
        let out = apply_deep_filter(&refs, &DeepFilterCoeffs::identity(17)).unwrap();
        assert_eq!(out, frames[2]);
        let zero = apply_deep_filter(&refs, &DeepFilterCoeffs::zeros(17)).unwrap();
        assert!(zero.bins.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let frames = [random_frame(&mut rng, 33, 0), random_frame(&mut rng, 33, 1), random_frame(&mut rng, 33, 2)];
            let coeffs = random_coeffs(&mut rng, 33);
            let refs: Vec<&SpectralFrame> = frames.iter().collect();
            let out = apply_deep_filter(&refs, &coeffs).unwrap();
            for (a, b) in out.bins.iter().zip(naive(&frames, &coeffs)) {
                assert!((a - b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn missing_history_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let zero = SpectralFrame::zeros(9, 0);
        let cur = random_frame(&mut rng, 9, 0);
        let coeffs = random_coeffs(&mut rng, 9);
        let short = apply_deep_filter(&[&cur], &coeffs).unwrap();
        let padded = apply_deep_filter(&[&zero, &zero, &cur], &coeffs).unwrap();
        assert_eq!(short.bins, padded.bins);
    }

    #[test]
    fn shape_mismatch() {
        let f = SpectralFrame::zeros(9, 0);
        assert!(matches!(
            apply_deep_filter(&[&f], &DeepFilterCoeffs::zeros(8)),
            Err(EnhanceError::Shape { .. })
        ));
    }

    #[test]
    fn compression_fixed_points_and_round_trip() {
        let unit = SpectralFrame {
            bins: vec![Complex64::from_polar(1.0, 0.7), Complex64::new(0.0, 0.0)],
            index: 0,
        };
        let c = compress(&unit, DEFAULT_COMPRESSION).unwrap();
        assert!((c.bins[0] - unit.bins[0]).norm() < 1e-15);
        assert_eq!(c.bins[1], Complex64::new(0.0, 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = random_frame(&mut rng, 64, 0);
        let back = decompress(&compress(&spec, 0.3).unwrap(), 0.3).unwrap();
        for (a, b) in back.bins.iter().zip(&spec.bins) {
            assert!((a - b).norm() <= 1e-9 * b.norm());
        }
        assert_eq!(compress(&spec, 0.0).unwrap_err(), EnhanceError::BadExponent(0.0));
        assert!(decompress(&spec, 1.5).is_err());
    }
}
