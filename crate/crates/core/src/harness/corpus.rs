//! Synthetic desk-scale corpus: harmonic speech-like utterances paired with
//! stationary or modulated noise, stored as `<id>.clean.wav` / `<id>.noise.wav`.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::wav::{wav_write, SampleFormat};
use super::HarnessError;
use crate::config::Signal;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CorpusPair {
    pub id: String,
    pub clean: PathBuf,
    pub noise: PathBuf,
}

/// Lists `<id>.clean.wav` files that have a matching `<id>.noise.wav`,
/// sorted by id.
pub fn find_pairs(dir: &Path) -> Result<Vec<CorpusPair>, HarnessError> {
    let mut pairs = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(id) = name.strip_suffix(".clean.wav") else {
            continue;
        };
        let noise = dir.join(format!("{id}.noise.wav"));
        if noise.is_file() {
            pairs.push(CorpusPair {
                id: id.to_string(),
                clean: path.clone(),
                noise,
            });
        } else {
            log::warn!("{} has no matching noise file", path.display());
        }
    }
    if pairs.is_empty() {
        return Err(HarnessError::NoInputs(dir.display().to_string()));
    }
    pairs.sort();
    Ok(pairs)
}

fn formant_weight(freq: f64, formants: &[(f64, f64)]) -> f64 {
    formants
        .iter()
        .map(|(centre, width)| 1.0 / (1.0 + ((freq - centre) / width).powi(2)))
        .sum::<f64>()
        + 0.005
}

/// Voiced syllables with gliding pitch and random formants, separated by
/// short pauses and occasional fricative bursts.
pub fn speech_like(len: usize, sample_rate: u32, rng: &mut impl Rng) -> Vec<f64> {
    let fs = f64::from(sample_rate);
    let nyquist_guard = 0.45 * fs;
    let mut out = vec![0.0; len];
    let mut pos = (rng.random_range(0.05..0.2) * fs) as usize;
    while pos < len {
        let dur = (rng.random_range(0.12..0.32) * fs) as usize;
        let end = (pos + dur).min(len);
        if rng.random_bool(0.05) {
            // fricative: differentiated noise under a smooth envelope
            let gain = rng.random_range(0.05..0.15);
            let mut prev = 0.0;
            for n in pos..end {
                let w: f64 = StandardNormal.sample(rng);
                let env = (PI * (n - pos) as f64 / (end - pos) as f64).sin();
                out[n] += gain * env * (w - prev);
                prev = w;
            }
        } else {
            let f0_start = rng.random_range(150.0..300.0);
            let f0_end = f0_start * rng.random_range(0.92..1.08);
            let formants = [
                (rng.random_range(300.0..900.0), 80.0),
                (rng.random_range(900.0..2500.0), 120.0),
                (rng.random_range(2400.0..3500.0), 180.0),
            ];
            let gain = rng.random_range(0.3..0.8);
            // random harmonic phases avoid an impulsive excitation
            let offsets: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
            let mut phase = 0.0;
            for n in pos..end {
                let t = (n - pos) as f64 / (end - pos) as f64;
                let f0 = f0_start + (f0_end - f0_start) * t;
                phase += 2.0 * PI * f0 / fs;
                let env = (PI * t).sin().powf(0.7);
                let mut v = 0.0;
                let mut h = 1.0;
                while h * f0 < nyquist_guard.min(4000.0) {
                    v += formant_weight(h * f0, &formants) * (h * phase + offsets[h as usize % 64]).sin() / h.sqrt();
                    h += 1.0;
                }
                out[n] += gain * env * v;
            }
        }
        pos = end + (rng.random_range(0.03..0.18) * fs) as usize;
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        for v in &mut out {
            *v *= 0.7 / peak;
        }
    }
    out
}

/// White, low-passed (brownish) or amplitude-modulated noise.
pub fn noise_like(len: usize, sample_rate: u32, rng: &mut impl Rng) -> Vec<f64> {
    let fs = f64::from(sample_rate);
    let kind = rng.random_range(0..3);
    let pole = rng.random_range(0.85..0.97);
    let rate = rng.random_range(1.5..5.0);
    let mut state = 0.0;
    let mut out: Vec<f64> = (0..len)
        .map(|n| {
            let w: f64 = StandardNormal.sample(rng);
            match kind {
                0 => w,
                1 => {
                    state = pole * state + (1.0 - pole) * w;
                    state
                }
                _ => {
                    state = 0.6 * state + 0.4 * w;
                    state * (1.0 + 0.8 * (2.0 * PI * rate * n as f64 / fs).sin())
                }
            }
        })
        .collect();
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for v in &mut out {
        *v *= 0.5 / peak;
    }
    out
}

/// Writes `files` float32 pairs of `seconds` each under `dir`.
pub fn write_desk_corpus(
    dir: &Path,
    files: usize,
    seconds: f64,
    sample_rate: u32,
    seed: u64,
) -> Result<Vec<CorpusPair>, HarnessError> {
    fs::create_dir_all(dir)?;
    let len = (seconds * f64::from(sample_rate)) as usize;
    let mut pairs = Vec::with_capacity(files);
    for i in 0..files {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let id = format!("desk{i:03}");
        let clean = dir.join(format!("{id}.clean.wav"));
        let noise = dir.join(format!("{id}.noise.wav"));
        let speech = speech_like(len, sample_rate, &mut rng);
        let noise_samples = noise_like(len, sample_rate, &mut rng);
        let quantize = |v: Vec<f64>| v.into_iter().map(|x| f64::from(x as f32)).collect();
        wav_write(&clean, &Signal { samples: quantize(speech), sample_rate }, SampleFormat::Float32)?;
        wav_write(&noise, &Signal { samples: quantize(noise_samples), sample_rate }, SampleFormat::Float32)?;
        pairs.push(CorpusPair { id, clean, noise });
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic_and_discoverable() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_desk_corpus(a.path(), 2, 0.5, 16_000, 7).unwrap();
        write_desk_corpus(b.path(), 2, 0.5, 16_000, 7).unwrap();
        let pa = find_pairs(a.path()).unwrap();
        let pb = find_pairs(b.path()).unwrap();
        assert_eq!(pa.len(), 2);
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(fs::read(&x.clean).unwrap(), fs::read(&y.clean).unwrap());
            assert_eq!(fs::read(&x.noise).unwrap(), fs::read(&y.noise).unwrap());
        }
        assert_ne!(fs::read(&pa[0].clean).unwrap(), fs::read(&pa[1].clean).unwrap());
    }

    #[test]
    fn empty_dir_reports_no_pairs() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("lonely.clean.wav"), b"").unwrap();
        let err = find_pairs(dir.path()).unwrap_err();
        assert!(err.to_string().contains("no input pairs found"));
    }

    #[test]
    fn speech_has_pauses() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = speech_like(32_000, 16_000, &mut rng);
        assert!(s.iter().all(|v| v.abs() <= 0.7 + 1e-12));
        assert!(s[..100].iter().all(|v| *v == 0.0));
    }
}
