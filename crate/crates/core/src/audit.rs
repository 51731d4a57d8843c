//! Latency measured by driving the streaming engines one sample at a time,
//! and compute scaling in MACs per second.
//!
//! Clock convention: input sample `t` arrives during tick `t`, so a frame
//! whose last sample is `t` is processed at tick `t + 1`. Output released
//! after pushing sample `t` is stamped `t + 1`. The delay of output sample
//! `n` is its stamp minus `n`; per-frame compute time is not modelled.

use std::sync::Arc;

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

use crate::config::{derive_latency, ConfigDocument, LatencySpec, Mode, StreamConfig};
use crate::enhance::{predict_wrapper, Enhancer, Identity};
use crate::fbe::{FbeEngine, FilterPredictor, IdentityPredictor};
use crate::transforms::{OlaEngine, TransformBasis};
use crate::windows::WindowPair;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuditError {
    #[error("latency audit needs an identity enhancer, got `{0}`")]
    NonIdentity(String),
    #[error("{0}")]
    Setup(String),
}

/// A configured engine ready to be driven by the audit.
pub enum Pipeline {
    Ola {
        config: StreamConfig,
        pair: WindowPair,
        basis: Arc<TransformBasis>,
        enhancer: Box<dyn Enhancer>,
    },
    Fbe {
        config: StreamConfig,
        predictor: Box<dyn FilterPredictor>,
    },
}

impl Pipeline {
    /// Identity processing for a config: pass-through frames (repeated under
    /// prediction) or unit filters.
    pub fn identity(config: &StreamConfig) -> Result<Self, AuditError> {
        config.validate().map_err(|e| AuditError::Setup(e.to_string()))?;
        Ok(match config.mode {
            Mode::Fbe => Pipeline::Fbe {
                config: *config,
                predictor: Box::new(IdentityPredictor),
            },
            mode => {
                let pair =
                    WindowPair::for_config(config).map_err(|e| AuditError::Setup(e.to_string()))?;
                let enhancer: Box<dyn Enhancer> = match mode.lookahead() {
                    0 => Box::new(Identity),
                    a => Box::new(
                        predict_wrapper(Identity, a).map_err(|e| AuditError::Setup(e.to_string()))?,
                    ),
                };
                Pipeline::Ola {
                    config: *config,
                    pair,
                    basis: Arc::new(TransformBasis::Canonical),
                    enhancer,
                }
            }
        })
    }

    pub fn config(&self) -> &StreamConfig {
        match self {
            Pipeline::Ola { config, .. } | Pipeline::Fbe { config, .. } => config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyAudit {
    pub config: ConfigDocument,
    pub declared: LatencySpec,
    pub measured: usize,
    #[serde(rename = "match")]
    pub matched: bool,
}

impl LatencyAudit {
    pub fn measured_total(&self) -> usize {
        self.measured
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("audit serializes")
    }
}

fn probe(len: usize) -> Vec<f64> {
    // any signal works; delays come from release times, not values
    (0..len).map(|n| ((n * 7919) % 101) as f64 / 50.0 - 1.0).collect()
}

/// Release tick of every output sample when input arrives one sample per tick.
fn release_ticks(
    len: usize,
    mut push: impl FnMut(f64, &mut Vec<f64>) -> Result<(), String>,
) -> Result<Vec<usize>, AuditError> {
    let input = probe(len);
    let mut out = Vec::new();
    let mut ticks = Vec::with_capacity(len);
    for (t, x) in input.iter().enumerate() {
        push(*x, &mut out).map_err(AuditError::Setup)?;
        ticks.resize(out.len(), t + 1);
    }
    Ok(ticks)
}

/// Worst-case delay over the steady state of a causal run.
pub fn measure_latency(pipeline: Pipeline) -> Result<LatencyAudit, AuditError> {
    let config = *pipeline.config();
    let declared = derive_latency(&config).map_err(|e| AuditError::Setup(e.to_string()))?;
    let warmup = config.analysis_len.max(2 * config.hop);
    let len = 2 * warmup + 32 * config.hop;
    let ticks = match pipeline {
        Pipeline::Ola {
            config,
            pair,
            basis,
            enhancer,
        } => {
            if !enhancer.is_identity() {
                return Err(AuditError::NonIdentity(enhancer.name()));
            }
            let mut engine = OlaEngine::new(&config, pair, basis, enhancer)
                .map_err(|e| AuditError::Setup(e.to_string()))?;
            release_ticks(len, |x, out| engine.push(&[x], out).map_err(|e| e.to_string()))?
        }
        Pipeline::Fbe { config, predictor } => {
            if !predictor.is_identity() {
                return Err(AuditError::NonIdentity(predictor.name()));
            }
            let mut engine =
                FbeEngine::new(&config, predictor).map_err(|e| AuditError::Setup(e.to_string()))?;
            release_ticks(len, |x, out| engine.push(&[x], out).map_err(|e| e.to_string()))?
        }
    };
    let steady_end = ticks.len().min(len - warmup);
    if steady_end <= warmup {
        return Err(AuditError::Setup("probe too short for steady state".into()));
    }
    let measured = (warmup..steady_end)
        .map(|n| ticks[n] - n)
        .max()
        .expect("non-empty steady state");
    Ok(LatencyAudit {
        config: config.to_document(),
        declared,
        measured,
        matched: measured == declared.total,
    })
}

/// Exact multiply-accumulate rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct MacsPerSecond(pub Ratio<u64>);

impl MacsPerSecond {
    pub fn as_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

/// `per_frame_macs * sample_rate / hop`: a fixed per-frame model costs more
/// per second of audio as the hop shrinks.
pub fn macs_estimate(per_frame_macs: u64, config: &StreamConfig) -> MacsPerSecond {
    MacsPerSecond(Ratio::new(
        per_frame_macs * u64::from(config.sample_rate),
        config.hop as u64,
    ))
}
