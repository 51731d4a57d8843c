//! Stream geometry, processing modes and the analytic latency model.
//!
//! All geometry is held in samples. Frame indices are zero-based in the API;
//! frame `k` covers input samples `[k * hop, k * hop + analysis_len)`.

use std::fmt;
use std::path::Path;

use num_rational::Ratio;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("hop must be positive")]
    ZeroHop,
    #[error("hop ({hop}) exceeds synthesis window ({synthesis})")]
    HopExceedsSynthesis { hop: usize, synthesis: usize },
    #[error("synthesis window exceeds analysis window ({synthesis} > {analysis})")]
    SynthesisExceedsAnalysis { synthesis: usize, analysis: usize },
    #[error("analysis window exceeds transform size ({analysis} > {transform})")]
    AnalysisExceedsTransform { analysis: usize, transform: usize },
    #[error("prediction needs at least one frame of lookahead")]
    ZeroLookahead,
    #[error("prediction requires 50% overlap (synthesis {synthesis} != 2 * hop {hop})")]
    PredictionOverlap { synthesis: usize, hop: usize },
    #[error("FBE chunk (2 * hop = {chunk}) exceeds transform size {transform}")]
    FbeChunkExceedsTransform { chunk: usize, transform: usize },
    #[error("{field} = {ms} ms is not an integral number of samples at {sample_rate} Hz")]
    NonIntegralSamples {
        field: &'static str,
        ms: f64,
        sample_rate: u32,
    },
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("invalid config document: {0}")]
    Parse(String),
    #[error("io: {0}")]
    Io(String),
}

/// How synthesized output is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    OverlapAdd,
    /// Filterbank equalizer: time-domain overlap-discard filtering.
    Fbe,
    /// Overlap-add where frame `k` yields the enhanced frame for slot `k + frames`.
    PredictAhead { frames: usize },
}

impl Mode {
    pub fn lookahead(&self) -> usize {
        match self {
            Mode::PredictAhead { frames } => *frames,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamConfig {
    pub sample_rate: u32,
    pub analysis_len: usize,
    pub synthesis_len: usize,
    pub hop: usize,
    /// Full transform length before real-symmetry reduction.
    pub transform_size: usize,
    pub mode: Mode,
}

impl StreamConfig {
    /// Symmetric overlap-add geometry with 50% overlap.
    pub fn symmetric(sample_rate: u32, window: usize, transform_size: usize) -> Self {
        Self {
            sample_rate,
            analysis_len: window,
            synthesis_len: window,
            hop: window / 2,
            transform_size,
            mode: Mode::OverlapAdd,
        }
    }

    /// Asymmetric overlap-add geometry; the hop is half the synthesis window.
    pub fn asymmetric(
        sample_rate: u32,
        analysis: usize,
        synthesis: usize,
        transform_size: usize,
    ) -> Self {
        Self {
            sample_rate,
            analysis_len: analysis,
            synthesis_len: synthesis,
            hop: synthesis / 2,
            transform_size,
            mode: Mode::OverlapAdd,
        }
    }

    /// FBE geometry. The analysis/synthesis lengths are set to the `2 * hop`
    /// filtering chunk; the latency model ignores them.
    pub fn fbe(sample_rate: u32, hop: usize, transform_size: usize) -> Self {
        Self {
            sample_rate,
            analysis_len: 2 * hop,
            synthesis_len: 2 * hop,
            hop,
            transform_size,
            mode: Mode::Fbe,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    /// Checks every geometry invariant, reporting the first one violated.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sample_rate == 0 {
            return Err(ConfigError::ZeroSampleRate);
        }
        if self.hop == 0 {
            return Err(ConfigError::ZeroHop);
        }
        if self.mode == Mode::Fbe {
            let chunk = 2 * self.hop;
            if chunk > self.transform_size {
                return Err(ConfigError::FbeChunkExceedsTransform {
                    chunk,
                    transform: self.transform_size,
                });
            }
            return Ok(());
        }
        if self.hop > self.synthesis_len {
            return Err(ConfigError::HopExceedsSynthesis {
                hop: self.hop,
                synthesis: self.synthesis_len,
            });
        }
        if self.synthesis_len > self.analysis_len {
            return Err(ConfigError::SynthesisExceedsAnalysis {
                synthesis: self.synthesis_len,
                analysis: self.analysis_len,
            });
        }
        if self.analysis_len > self.transform_size {
            return Err(ConfigError::AnalysisExceedsTransform {
                analysis: self.analysis_len,
                transform: self.transform_size,
            });
        }
        if let Mode::PredictAhead { frames } = self.mode {
            if frames == 0 {
                return Err(ConfigError::ZeroLookahead);
            }
            if self.synthesis_len != 2 * self.hop {
                return Err(ConfigError::PredictionOverlap {
                    synthesis: self.synthesis_len,
                    hop: self.hop,
                });
            }
        }
        Ok(())
    }

    /// Number of complete analysis frames in a signal of `len` samples.
    /// Signals shorter than one analysis window yield zero frames.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.analysis_len {
            0
        } else {
            (len - self.analysis_len) / self.hop + 1
        }
    }

    /// Number of bins in a canonical (real-input) spectral frame.
    pub fn canonical_bins(&self) -> usize {
        self.transform_size / 2 + 1
    }

    pub fn samples_to_ms(&self, samples: usize) -> Millis {
        Millis::from_samples(samples, self.sample_rate)
    }

    pub fn from_json_str(s: &str) -> Result<Self, ConfigError> {
        let doc: ConfigDocument =
            serde_json::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        doc.into_config()
    }

    pub fn from_json_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(e.to_string()))?;
        Self::from_json_str(&text)
    }

    pub fn to_document(&self) -> ConfigDocument {
        let ms = |n: usize| Some(self.samples_to_ms(n).as_f64());
        let fbe = self.mode == Mode::Fbe;
        ConfigDocument {
            sample_rate: Some(self.sample_rate),
            analysis_ms: if fbe { None } else { ms(self.analysis_len) },
            synthesis_ms: if fbe { None } else { ms(self.synthesis_len) },
            hop_ms: self.samples_to_ms(self.hop).as_f64(),
            transform_size: self.transform_size,
            mode: match self.mode {
                Mode::OverlapAdd => ModeName::OverlapAdd,
                Mode::Fbe => ModeName::Fbe,
                Mode::PredictAhead { .. } => ModeName::PredictAhead,
            },
            predict_frames: match self.mode {
                Mode::PredictAhead { frames } => Some(frames),
                _ => None,
            },
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("config document serializes")
    }
}

impl fmt::Display for StreamConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            Mode::Fbe => write!(f, "fbe hop={} N={}", self.hop, self.transform_size),
            Mode::OverlapAdd => write!(
                f,
                "ola La={} Ls={} hop={} N={}",
                self.analysis_len, self.synthesis_len, self.hop, self.transform_size
            ),
            Mode::PredictAhead { frames } => write!(
                f,
                "predict({frames}) La={} Ls={} hop={} N={}",
                self.analysis_len, self.synthesis_len, self.hop, self.transform_size
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    OverlapAdd,
    Fbe,
    PredictAhead,
}

/// On-disk form of [`StreamConfig`]; lengths are given in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigDocument {
    #[serde(default)]
    pub sample_rate: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesis_ms: Option<f64>,
    pub hop_ms: f64,
    pub transform_size: usize,
    pub mode: ModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predict_frames: Option<usize>,
}

impl ConfigDocument {
    pub fn into_config(self) -> Result<StreamConfig, ConfigError> {
        let sample_rate = self.sample_rate.unwrap_or(DEFAULT_SAMPLE_RATE);
        if sample_rate == 0 {
            return Err(ConfigError::ZeroSampleRate);
        }
        let hop = ms_to_samples("hop_ms", self.hop_ms, sample_rate)?;
        let config = match self.mode {
            ModeName::Fbe => StreamConfig {
                sample_rate,
                analysis_len: 2 * hop,
                synthesis_len: 2 * hop,
                hop,
                transform_size: self.transform_size,
                mode: Mode::Fbe,
            },
            ModeName::OverlapAdd | ModeName::PredictAhead => {
                let analysis_ms = self.analysis_ms.ok_or(ConfigError::MissingField("analysis_ms"))?;
                let synthesis_ms = self
                    .synthesis_ms
                    .ok_or(ConfigError::MissingField("synthesis_ms"))?;
                let mode = if self.mode == ModeName::PredictAhead {
                    Mode::PredictAhead {
                        frames: self.predict_frames.unwrap_or(1),
                    }
                } else {
                    Mode::OverlapAdd
                };
                StreamConfig {
                    sample_rate,
                    analysis_len: ms_to_samples("analysis_ms", analysis_ms, sample_rate)?,
                    synthesis_len: ms_to_samples("synthesis_ms", synthesis_ms, sample_rate)?,
                    hop,
                    transform_size: self.transform_size,
                    mode,
                }
            }
        };
        config.validate()?;
        Ok(config)
    }
}

/// Converts milliseconds to samples, rejecting non-integral results.
pub fn ms_to_samples(field: &'static str, ms: f64, sample_rate: u32) -> Result<usize, ConfigError> {
    let exact = ms * f64::from(sample_rate) / 1000.0;
    let rounded = exact.round();
    if !exact.is_finite() || rounded < 0.0 || (exact - rounded).abs() > 1e-9 * rounded.max(1.0) {
        return Err(ConfigError::NonIntegralSamples {
            field,
            ms,
            sample_rate,
        });
    }
    Ok(rounded as usize)
}

/// Exact duration in milliseconds, held as a reduced fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Millis(pub Ratio<u64>);

impl Millis {
    pub fn from_samples(samples: usize, sample_rate: u32) -> Self {
        Millis(Ratio::new(samples as u64 * 1000, u64::from(sample_rate)))
    }

    pub fn as_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl fmt::Display for Millis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

impl Serialize for Millis {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LatencySpec {
    pub algorithmic: usize,
    pub buffer: usize,
    pub total: usize,
    pub total_ms: Millis,
}

/// Structural latency of a configuration (per-frame compute time excluded).
///
/// Overlap-add delays output by `L_s - P` beyond the one-hop input buffer.
/// Predicting `a` frames ahead hides `a` hops of that delay, clamped at zero.
/// FBE output only waits for one hop of input.
pub fn derive_latency(config: &StreamConfig) -> Result<LatencySpec, ConfigError> {
    config.validate()?;
    let hop = config.hop;
    let algorithmic = match config.mode {
        Mode::OverlapAdd => config.synthesis_len - hop,
        Mode::PredictAhead { frames } => config
            .synthesis_len
            .saturating_sub((1 + frames) * hop),
        Mode::Fbe => 0,
    };
    let total = algorithmic + hop;
    Ok(LatencySpec {
        algorithmic,
        buffer: hop,
        total,
        total_ms: config.samples_to_ms(total),
    })
}

/// Mono waveform with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("sample rate {signal} Hz does not match config ({config} Hz)")]
    RateMismatch { signal: u32, config: u32 },
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, SignalError> {
        if sample_rate == 0 {
            return Err(SignalError::ZeroSampleRate);
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(SignalError::NonFinite(i));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn check_rate(&self, config: &StreamConfig) -> Result<(), SignalError> {
        if self.sample_rate != config.sample_rate {
            return Err(SignalError::RateMismatch {
                signal: self.sample_rate,
                config: config.sample_rate,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_20ms_latency_is_window_length() {
        let cfg = StreamConfig::symmetric(16_000, 320, 320);
        let lat = derive_latency(&cfg).unwrap();
        assert_eq!((lat.algorithmic, lat.buffer, lat.total), (160, 160, 320));
        assert_eq!(lat.total_ms.as_f64(), 20.0);
    }

    #[test]
    fn asymmetric_5ms_latency() {
        let cfg = StreamConfig::asymmetric(16_000, 320, 80, 320);
        assert_eq!(cfg.hop, 40);
        let lat = derive_latency(&cfg).unwrap();
        assert_eq!(lat.total, 80);
        assert_eq!(lat.total_ms.as_f64(), 5.0);
    }

    #[test]
    fn prediction_removes_algorithmic_latency() {
        let cfg = StreamConfig::symmetric(16_000, 96, 320).with_mode(Mode::PredictAhead { frames: 1 });
        let lat = derive_latency(&cfg).unwrap();
        assert_eq!(lat.algorithmic, 0);
        assert_eq!(lat.total, 48);
        assert_eq!(lat.total_ms.as_f64(), 3.0);
    }

    #[test]
    fn fbe_latency_is_hop() {
        let lat = derive_latency(&StreamConfig::fbe(16_000, 40, 320)).unwrap();
        assert_eq!(lat.total, 40);
        assert_eq!(lat.total_ms.as_f64(), 2.5);
    }

    #[test]
    fn validation_errors() {
        let mut cfg = StreamConfig::symmetric(16_000, 320, 320);
        cfg.analysis_len = 160;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("synthesis window exceeds analysis window"));

        let mut cfg = StreamConfig::symmetric(16_000, 320, 320);
        cfg.hop = 0;
        assert_eq!(cfg.validate().unwrap_err().to_string(), "hop must be positive");

        assert!(StreamConfig::symmetric(16_000, 320, 512).validate().is_ok());

        let cfg = StreamConfig::asymmetric(16_000, 320, 80, 320)
            .with_mode(Mode::PredictAhead { frames: 1 });
        assert!(cfg.validate().is_ok());
        let mut bad = cfg;
        bad.hop = 20;
        assert!(matches!(bad.validate(), Err(ConfigError::PredictionOverlap { .. })));
        let zero = cfg.with_mode(Mode::PredictAhead { frames: 0 });
        assert_eq!(zero.validate(), Err(ConfigError::ZeroLookahead));
    }

    #[test]
    fn frame_count_matches_definition() {
        let cfg = StreamConfig::symmetric(16_000, 320, 320);
        assert_eq!(cfg.frame_count(100), 0);
        assert_eq!(cfg.frame_count(320), 1);
        assert_eq!(cfg.frame_count(479), 1);
        assert_eq!(cfg.frame_count(480), 2);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"sample_rate":16000,"analysis_ms":20,"synthesis_ms":3,"hop_ms":1.5,
            "transform_size":320,"mode":"overlap_add"}"#;
        let cfg = StreamConfig::from_json_str(text).unwrap();
        assert_eq!(cfg, StreamConfig::asymmetric(16_000, 320, 48, 320));
        let back = StreamConfig::from_json_str(&cfg.to_json_string()).unwrap();
        assert_eq!(back, cfg);

        let fbe = r#"{"hop_ms":2.5,"transform_size":320,"mode":"fbe"}"#;
        assert_eq!(StreamConfig::from_json_str(fbe).unwrap(), StreamConfig::fbe(16_000, 40, 320));

        let pred = r#"{"analysis_ms":6,"synthesis_ms":6,"hop_ms":3,"transform_size":320,
            "mode":"predict_ahead","predict_frames":1}"#;
        let cfg = StreamConfig::from_json_str(pred).unwrap();
        assert_eq!(cfg.mode, Mode::PredictAhead { frames: 1 });
    }

    #[test]
    fn non_integral_ms_is_rejected() {
        let text = r#"{"sample_rate":16000,"analysis_ms":20.01,"synthesis_ms":20,
            "hop_ms":10,"transform_size":512,"mode":"overlap_add"}"#;
        assert!(matches!(
            StreamConfig::from_json_str(text),
            Err(ConfigError::NonIntegralSamples { field: "analysis_ms", .. })
        ));
    }

    #[test]
    fn signal_rejects_non_finite() {
        assert_eq!(
            Signal::new(vec![0.0, f64::NAN], 16_000),
            Err(SignalError::NonFinite(1))
        );
    }
}
