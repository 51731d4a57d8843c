use super::HarnessError;
use crate::config::Signal;

/// Frame powers below this fraction of the loudest frame count as inactive.
const ACTIVITY_FLOOR: f64 = 1e-5;

/// Mean power over active 10 ms frames.
pub fn active_power(samples: &[f64], sample_rate: u32) -> f64 {
    let frame = (sample_rate as usize / 100).max(1);
    let powers: Vec<f64> = samples
        .chunks(frame)
        .map(|c| c.iter().map(|x| x * x).sum::<f64>() / c.len() as f64)
        .collect();
    let peak = powers.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let active: Vec<f64> = powers
        .into_iter()
        .filter(|p| *p > peak * ACTIVITY_FLOOR)
        .collect();
    active.iter().sum::<f64>() / active.len() as f64
}

/// Scales `noise` (looped or truncated to the speech length) so that the
/// active-power ratio equals `snr_db`; returns `(mixture, scaled_noise)`.
pub fn mix(speech: &Signal, noise: &Signal, snr_db: f64) -> Result<(Signal, Signal), HarnessError> {
    if speech.sample_rate != noise.sample_rate {
        return Err(HarnessError::RateMismatch(speech.sample_rate, noise.sample_rate));
    }
    let rate = speech.sample_rate;
    let ps = active_power(&speech.samples, rate);
    if ps == 0.0 {
        return Err(HarnessError::SilentSpeech);
    }
    if noise.is_empty() {
        return Err(HarnessError::SilentNoise);
    }
    let fitted: Vec<f64> = noise.samples.iter().copied().cycle().take(speech.len()).collect();
    let pn = active_power(&fitted, rate);
    if pn == 0.0 {
        return Err(HarnessError::SilentNoise);
    }
    let alpha = (ps / (pn * 10f64.powf(snr_db / 10.0))).sqrt();
    let scaled: Vec<f64> = fitted.iter().map(|n| alpha * n).collect();
    let mixture = speech.samples.iter().zip(&scaled).map(|(s, n)| s + n).collect();
    Ok((
        Signal {
            samples: mixture,
            sample_rate: rate,
        },
        Signal {
            samples: scaled,
            sample_rate: rate,
        },
    ))
}
