//! Analysis/synthesis window pairs.
//!
//! The synthesis window is applied to the last `L_s` samples of each
//! analysis frame, so reconstruction depends on the product of the analysis
//! window's tail with the synthesis window. [`pr_normalize`] rescales the
//! synthesis window so that the overlapped products sum to one.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::config::{Mode, StreamConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WindowError {
    #[error("window length {0} must be even and at least 2")]
    BadLength(usize),
    #[error("synthesis window ({synthesis}) longer than analysis window ({analysis})")]
    SynthesisTooLong { synthesis: usize, analysis: usize },
    #[error("hop must be positive")]
    ZeroHop,
    #[error("hop mismatch: config has {config}, window pair expects {pair}")]
    HopMismatch { config: usize, pair: usize },
    #[error("windows do not cover output phase {phase} (overlapped product is zero)")]
    NotCovering { phase: usize },
    #[error("non-finite window weight at index {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowPair {
    pub analysis: Vec<f64>,
    pub synthesis: Vec<f64>,
    pub hop: usize,
    pub normalized: bool,
}

/// Periodic (DFT-even) Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / len as f64).cos()))
        .collect()
}

/// Square root of the periodic Hann window.
pub fn sqrt_hann(len: usize) -> Result<Vec<f64>, WindowError> {
    check_even(len)?;
    Ok(hann(len).into_iter().map(f64::sqrt).collect())
}

fn check_even(len: usize) -> Result<(), WindowError> {
    if len < 2 || len % 2 != 0 {
        return Err(WindowError::BadLength(len));
    }
    Ok(())
}

/// sqrt-Hann analysis and synthesis windows of equal length at 50% overlap.
pub fn sym_pair(len: usize) -> Result<WindowPair, WindowError> {
    let w = sqrt_hann(len)?;
    Ok(WindowPair {
        analysis: w.clone(),
        synthesis: w,
        hop: len / 2,
        normalized: false,
    })
}

/// Long analysis window built from two half-Hann segments, with a Hann
/// synthesis window of length `synthesis`. The hop is `synthesis / 2`.
///
/// The rising segment spans `analysis - synthesis / 2` samples, the falling
/// segment matches the falling half of the synthesis Hann. The junction
/// sample `analysis - synthesis / 2` is the window peak.
pub fn asym_pair(analysis: usize, synthesis: usize) -> Result<WindowPair, WindowError> {
    check_even(analysis)?;
    check_even(synthesis)?;
    if synthesis > analysis {
        return Err(WindowError::SynthesisTooLong {
            synthesis,
            analysis,
        });
    }
    let half_s = synthesis / 2;
    let rise_len = analysis - half_s;
    let rising = hann(2 * rise_len);
    let falling = hann(synthesis);
    let mut w_a = Vec::with_capacity(analysis);
    w_a.extend_from_slice(&rising[..rise_len]);
    w_a.extend_from_slice(&falling[half_s..]);
    Ok(WindowPair {
        analysis: w_a,
        synthesis: falling,
        hop: half_s,
        normalized: false,
    })
}

impl WindowPair {
    /// The normalized pair a config runs with: sqrt-Hann when the windows are
    /// equally long, the half-Hann asymmetric pair otherwise.
    pub fn for_config(config: &StreamConfig) -> Result<Self, WindowError> {
        let (la, ls) = match config.mode {
            Mode::Fbe => (2 * config.hop, 2 * config.hop),
            _ => (config.analysis_len, config.synthesis_len),
        };
        let mut pair = if la == ls {
            sym_pair(ls)?
        } else {
            asym_pair(la, ls)?
        };
        if pair.hop != config.hop {
            if la != ls {
                return Err(WindowError::HopMismatch {
                    config: config.hop,
                    pair: pair.hop,
                });
            }
            // other overlaps are handled by normalization
            pair.hop = config.hop;
        }
        pr_normalize(&pair)
    }

    pub fn analysis_len(&self) -> usize {
        self.analysis.len()
    }

    pub fn synthesis_len(&self) -> usize {
        self.synthesis.len()
    }

    /// Per-phase overlapped product `D(n)`, `n in 0..hop`.
    pub fn overlap_gain(&self) -> Vec<f64> {
        let offset = self.analysis.len() - self.synthesis.len();
        let mut gain = vec![0.0; self.hop];
        for (m, ws) in self.synthesis.iter().enumerate() {
            gain[m % self.hop] += self.analysis[offset + m] * ws;
        }
        gain
    }
}

/// Divides the synthesis window by the steady-state overlapped product so
/// that identity processing reconstructs the input exactly.
pub fn pr_normalize(pair: &WindowPair) -> Result<WindowPair, WindowError> {
    if pair.hop == 0 {
        return Err(WindowError::ZeroHop);
    }
    if pair.synthesis.len() > pair.analysis.len() {
        return Err(WindowError::SynthesisTooLong {
            synthesis: pair.synthesis.len(),
            analysis: pair.analysis.len(),
        });
    }
    if let Some(i) = pair
        .analysis
        .iter()
        .chain(&pair.synthesis)
        .position(|w| !w.is_finite())
    {
        return Err(WindowError::NonFinite(i));
    }
    let gain = pair.overlap_gain();
    if let Some(phase) = gain.iter().position(|d| d.abs() < 1e-12) {
        return Err(WindowError::NotCovering { phase });
    }
    let synthesis = pair
        .synthesis
        .iter()
        .enumerate()
        .map(|(m, w)| w / gain[m % pair.hop])
        .collect();
    Ok(WindowPair {
        analysis: pair.analysis.clone(),
        synthesis,
        hop: pair.hop,
        normalized: true,
    })
}

/// Relative steady-state reconstruction error of windowed overlap-add with
/// identity processing, measured on seeded white noise.
pub fn pr_error(pair: &WindowPair) -> f64 {
    let la = pair.analysis.len();
    let ls = pair.synthesis.len();
    let hop = pair.hop.max(1);
    let frames = 64.max(2 * la / hop + 50);
    let len = la + (frames - 1) * hop;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let x: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut y = vec![0.0; len];
    let offset = la - ls;
    for k in 0..frames {
        let start = k * hop + offset;
        for m in 0..ls {
            y[start + m] += x[start + m] * pair.analysis[offset + m] * pair.synthesis[m];
        }
    }
    let peak = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let err = (la..len - la).fold(0.0f64, |a, n| a.max((y[n] - x[n]).abs()));
    err / peak
}

/// One weight per line, nine significant digits.
pub fn to_csv(weights: &[f64]) -> String {
    let mut out = String::with_capacity(weights.len() * 12);
    for w in weights {
        let _ = writeln!(out, "{}", format_significant(*w, 9));
    }
    out
}

pub(crate) fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.*e}", digits - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_hann_closed_form() {
        let w = sqrt_hann(4).unwrap();
        let expected = [0.0, 0.5f64.sqrt(), 1.0, 0.5f64.sqrt()];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(sqrt_hann(2).unwrap(), vec![0.0, 1.0]);
        assert_eq!(sqrt_hann(5), Err(WindowError::BadLength(5)));
        assert_eq!(sqrt_hann(0), Err(WindowError::BadLength(0)));
    }

    #[test]
    fn sqrt_hann_power_complementary() {
        for len in [4, 48, 96, 160, 320] {
            let w = sqrt_hann(len).unwrap();
            for n in 0..len / 2 {
                let s = w[n] * w[n] + w[n + len / 2] * w[n + len / 2];
                assert!((s - 1.0).abs() < 1e-12, "len {len} n {n}");
            }
        }
    }

    #[test]
    fn asym_degenerates_to_hann() {
        let pair = asym_pair(160, 160).unwrap();
        let h = hann(160);
        for (a, b) in pair.analysis.iter().zip(&h) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn asym_shape() {
        let pair = asym_pair(320, 80).unwrap();
        let w = &pair.analysis;
        assert_eq!(w.len(), 320);
        assert_eq!(pair.hop, 40);
        assert!(w[..=280].windows(2).all(|p| p[1] >= p[0]));
        assert!(w[280..].windows(2).all(|p| p[1] <= p[0]));
        assert!((w[280] - 1.0).abs() < 1e-15);
        assert!(w.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(asym_pair(80, 320).is_err());
    }

    #[test]
    fn sqrt_hann_normalization_is_noop() {
        let pair = sym_pair(320).unwrap();
        let norm = pr_normalize(&pair).unwrap();
        for (a, b) in norm.synthesis.iter().zip(&pair.synthesis) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(pr_error(&norm) <= 1e-6);
    }

    #[test]
    fn asym_normalized_reconstructs() {
        let pair = asym_pair(320, 80).unwrap();
        assert!(pr_error(&pair) > 1e-3);
        let norm = pr_normalize(&pair).unwrap();
        assert!(norm.normalized);
        assert!(pr_error(&norm) <= 1e-6);
    }

    #[test]
    fn rectangular_single_frame_coverage() {
        let pair = WindowPair {
            analysis: vec![0.5; 8],
            synthesis: vec![1.0; 4],
            hop: 4,
            normalized: false,
        };
        let norm = pr_normalize(&pair).unwrap();
        assert!(norm.synthesis.iter().all(|w| (w - 2.0).abs() < 1e-15));
        assert!(pr_error(&norm) < 1e-12);
    }

    #[test]
    fn non_covering_pair_fails() {
        let pair = WindowPair {
            analysis: vec![1.0; 8],
            synthesis: vec![1.0, 1.0, 0.0, 0.0],
            hop: 4,
            normalized: false,
        };
        assert_eq!(pr_normalize(&pair), Err(WindowError::NotCovering { phase: 2 }));
    }

    #[test]
    fn doubled_synthesis_breaks_unity_gain() {
        let mut pair = pr_normalize(&sym_pair(320).unwrap()).unwrap();
        pair.synthesis.iter_mut().for_each(|w| *w *= 2.0);
        let err = pr_error(&pair);
        assert!((0.8..=1.0 + 1e-9).contains(&err), "{err}");
    }

    #[test]
    fn normalization_is_idempotent() {
        for (la, ls) in [(320, 80), (320, 48), (320, 160), (96, 96)] {
            let once = pr_normalize(&asym_pair(la, ls).unwrap()).unwrap();
            let twice = pr_normalize(&once).unwrap();
            for (a, b) in once.synthesis.iter().zip(&twice.synthesis) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn csv_has_nine_significant_digits() {
        let csv = to_csv(&sqrt_hann(4).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines, ["0", "0.707106781", "1.00000000", "0.707106781"]);
        assert_eq!(format_significant(1.234e-7, 9), "1.23400000e-7");
    }
}
