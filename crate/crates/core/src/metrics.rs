//! Sample-domain and spectral quality metrics.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::config::StreamConfig;
use crate::transforms::{analyze_signal, Transform, TransformBasis};
use crate::windows::WindowPair;

/// Ceiling reported when the error term vanishes.
pub const DB_CAP: f64 = 100.0;

const LSD_EPS: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: estimate {est}, reference {reference}")]
    Length { est: usize, reference: usize },
    #[error("reference is all zero")]
    ZeroReference,
    #[error("signal shorter than one analysis frame")]
    TooShort,
    #[error("{0}")]
    Setup(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub id: String,
    pub si_sdr_db: f64,
    pub snr_db: f64,
    pub lsd_db: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check(est: &[f64], reference: &[f64]) -> Result<f64, MetricError> {
    if est.len() != reference.len() {
        return Err(MetricError::Length {
            est: est.len(),
            reference: reference.len(),
        });
    }
    let energy = dot(reference, reference);
    if energy == 0.0 {
        return Err(MetricError::ZeroReference);
    }
    Ok(energy)
}

/// Ratio in dB clamped to `[-DB_CAP, DB_CAP]`.
fn capped_ratio_db(signal: f64, error: f64) -> f64 {
    if signal == 0.0 {
        return -DB_CAP;
    }
    if error == 0.0 {
        return DB_CAP;
    }
    (10.0 * (signal / error).log10()).clamp(-DB_CAP, DB_CAP)
}

/// Scale-invariant SDR in dB.
pub fn si_sdr(est: &[f64], reference: &[f64]) -> Result<f64, MetricError> {
    let energy = check(est, reference)?;
    let scale = dot(est, reference) / energy;
    let mut target_energy = 0.0;
    let mut error_energy = 0.0;
    for (e, r) in est.iter().zip(reference) {
        let t = scale * r;
        target_energy += t * t;
        error_energy += (e - t) * (e - t);
    }
    Ok(capped_ratio_db(target_energy, error_energy))
}

pub fn snr(est: &[f64], reference: &[f64]) -> Result<f64, MetricError> {
    let energy = check(est, reference)?;
    let error: f64 = est
        .iter()
        .zip(reference)
        .map(|(e, r)| (r - e) * (r - e))
        .sum();
    Ok(capped_ratio_db(energy, error))
}

/// Mean over frames of the RMS difference of log magnitudes (dB), computed
/// with the canonical transform and the config's analysis window.
pub fn log_spectral_distance(
    est: &[f64],
    reference: &[f64],
    config: &StreamConfig,
) -> Result<f64, MetricError> {
    check(est, reference)?;
    let pair = WindowPair::for_config(config).map_err(|e| MetricError::Setup(e.to_string()))?;
    let transform = Transform::new(
        config.transform_size,
        pair.analysis_len(),
        pair.synthesis_len(),
        Arc::new(TransformBasis::Canonical),
    )
    .map_err(|e| MetricError::Setup(e.to_string()))?;
    let fe = analyze_signal(est, &transform, &pair).map_err(|e| MetricError::Setup(e.to_string()))?;
    let fr = analyze_signal(reference, &transform, &pair)
        .map_err(|e| MetricError::Setup(e.to_string()))?;
    if fr.is_empty() {
        return Err(MetricError::TooShort);
    }
    let total: f64 = fe
        .iter()
        .zip(&fr)
        .map(|(a, b)| {
            let mean_sq = a
                .bins
                .iter()
                .zip(&b.bins)
                .map(|(x, y)| {
                    let d = 20.0 * (x.norm() + LSD_EPS).log10() - 20.0 * (y.norm() + LSD_EPS).log10();
                    d * d
                })
                .sum::<f64>()
                / a.len() as f64;
            mean_sq.sqrt()
        })
        .sum();
    Ok(total / fr.len() as f64)
}

pub fn report(
    id: &str,
    est: &[f64],
    reference: &[f64],
    config: &StreamConfig,
) -> Result<MetricReport, MetricError> {
    Ok(MetricReport {
        id: id.to_string(),
        si_sdr_db: si_sdr(est, reference)?,
        snr_db: snr(est, reference)?,
        lsd_db: log_spectral_distance(est, reference, config)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_estimate_hits_cap() {
        let x = [0.3, -1.0, 2.0, 0.5];
        assert_eq!(si_sdr(&x, &x).unwrap(), DB_CAP);
        assert_eq!(snr(&x, &x).unwrap(), DB_CAP);
        assert_eq!(si_sdr(&[0.0; 4], &x).unwrap(), -DB_CAP);
    }

    #[test]
    fn hand_evaluated_projection() {
        assert!(si_sdr(&[1.0, 1.0], &[1.0, 0.0]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r: Vec<f64> = (0..500).map(|_| rng.random_range(-1.0..1.0)).collect();
        let e: Vec<f64> = r.iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();
        let base = si_sdr(&e, &r).unwrap();
        let scaled: Vec<f64> = e.iter().map(|v| v * 7.5).collect();
        assert!((si_sdr(&scaled, &r).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn snr_power_arithmetic() {
        // orthogonal error with a tenth of the reference power
        let reference = [1.0, 0.0, 1.0, 0.0];
        let e = 0.2f64.sqrt() / 2.0f64.sqrt();
        let est = [1.0, e, 1.0, e];
        assert!((snr(&est, &reference).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        assert_eq!(si_sdr(&[1.0], &[0.0]), Err(MetricError::ZeroReference));
        assert_eq!(
            snr(&[1.0, 2.0], &[1.0]),
            Err(MetricError::Length { est: 2, reference: 1 })
        );
        let cfg = StreamConfig::symmetric(16_000, 320, 320);
        assert_eq!(log_spectral_distance(&[1.0; 10], &[1.0; 10], &cfg), Err(MetricError::TooShort));
    }

    #[test]
    fn lsd_of_halved_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = StreamConfig::symmetric(16_000, 320, 320);
        let r: Vec<f64> = (0..8_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let half: Vec<f64> = r.iter().map(|v| 0.5 * v).collect();
        assert_eq!(log_spectral_distance(&r, &r, &cfg).unwrap(), 0.0);
        let lsd = log_spectral_distance(&half, &r, &cfg).unwrap();
        assert!((lsd - 20.0 * 2.0f64.log10()).abs() < 1e-3, "{lsd}");
    }
}
