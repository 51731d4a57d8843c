//! Mixture synthesis, WAV I/O, pipeline construction and the experiment
//! matrix runner behind the command-line tool.

mod corpus;
mod experiment;
mod mix;
mod pipeline;
mod wav;

use thiserror::Error;

pub use corpus::{find_pairs, speech_like, noise_like, write_desk_corpus, CorpusPair};
pub use experiment::{
    run_experiment, default_matrix, ExperimentMatrix, ExperimentReport, ExperimentRow, ResultLine, CSV_HEADER,
    DEFAULT_SNR_CHOICES_DB,
};
pub use mix::{active_power, mix};
pub use pipeline::{enhance_signal, reconstruction_error, EnhancerKind, PipelineSpec, WindowKind};
pub use wav::{wav_read, wav_write, SampleFormat, WavError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("wav: {0}")]
    Wav(#[from] WavError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("speech signal is silent")]
    SilentSpeech,
    #[error("noise signal is silent")]
    SilentNoise,
    #[error("sample rates differ: {0} Hz vs {1} Hz")]
    RateMismatch(u32, u32),
    #[error("no input pairs found in {0}")]
    NoInputs(String),
    #[error("pipeline: {0}")]
    Pipeline(String),
    #[error("metric: {0}")]
    Metric(#[from] crate::metrics::MetricError),
}
