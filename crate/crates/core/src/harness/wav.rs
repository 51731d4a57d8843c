use std::path::Path;

use thiserror::Error;

use crate::config::Signal;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("{0} channels; only mono is supported")]
    UnsupportedChannels(u16),
    #[error("unsupported sample format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed wav: {0}")]
    Malformed(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<hound::Error> for WavError {
    fn from(e: hound::Error) -> Self {
        match e {
            // the file is already open, so read failures mean truncation
            hound::Error::IoError(io) => WavError::Malformed(io.to_string()),
            hound::Error::Unsupported => WavError::UnsupportedFormat("unsupported wav feature".into()),
            other => WavError::Malformed(other.to_string()),
        }
    }
}

fn write_error(e: hound::Error) -> WavError {
    match e {
        hound::Error::IoError(io) => WavError::Io(io),
        other => WavError::UnsupportedFormat(other.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm16,
    Float32,
}

/// Reads a mono PCM16 or IEEE float32 WAV. PCM16 is scaled by `1/32768`.
pub fn wav_read(path: &Path) -> Result<Signal, WavError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut reader = hound::WavReader::new(file)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(WavError::UnsupportedChannels(spec.channels));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<Result<_, _>>()?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()?,
        (fmt, bits) => {
            return Err(WavError::UnsupportedFormat(format!("{fmt:?} {bits}-bit")));
        }
    };
    Signal::new(samples, spec.sample_rate).map_err(|e| WavError::Malformed(e.to_string()))
}

pub fn wav_write(path: &Path, signal: &Signal, format: SampleFormat) -> Result<(), WavError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: match format {
            SampleFormat::Pcm16 => 16,
            SampleFormat::Float32 => 32,
        },
        sample_format: match format {
            SampleFormat::Pcm16 => hound::SampleFormat::Int,
            SampleFormat::Float32 => hound::SampleFormat::Float,
        },
    };
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut writer = hound::WavWriter::new(file, spec).map_err(write_error)?;
    for &x in &signal.samples {
        match format {
            SampleFormat::Pcm16 => {
                writer.write_sample((x * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
            }
            SampleFormat::Float32 => writer.write_sample(x as f32),
        }
        .map_err(write_error)?;
    }
    writer.finalize().map_err(write_error)?;
    Ok(())
}
