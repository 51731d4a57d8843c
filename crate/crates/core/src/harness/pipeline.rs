use std::path::PathBuf;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::audit::{measure_latency, LatencyAudit, Pipeline};
use crate::config::{Mode, Signal, StreamConfig};
use crate::enhance::{
    predict_wrapper, wiener_gain, Enhancer, Identity, OracleDeepFilter, OracleLookahead, OracleWiener, WienerMapping,
    Zero, DEFAULT_COMPRESSION,
};
use crate::fbe::{run_fbe, FilterPredictor, IdentityPredictor, OracleWienerFbe, ZeroPredictor};
use crate::transforms::{analyze_signal, dft_stacked_basis, load_basis, stream_ola, Transform, TransformBasis};
use crate::windows::WindowPair;

/// Smoothing of the oracle deep filter's running statistics.
const DEEP_FILTER_SMOOTHING: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Sym,
    Asym,
    Learned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnhancerKind {
    Identity,
    Zero,
    OracleWiener,
    OracleDeepFilter,
    WienerMapping,
    /// Emits the clean reference frame for each output slot.
    CleanLookahead,
    /// Emits the oracle Wiener estimate of each output slot, the best case
    /// for a predicting mapping enhancer.
    WienerLookahead,
}

impl EnhancerKind {
    pub fn needs_clean(self) -> bool {
        !matches!(self, EnhancerKind::Identity | EnhancerKind::Zero)
    }
}

/// Everything needed to build one enhancement pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSpec {
    pub config: StreamConfig,
    /// `None` for FBE.
    pub window: Option<WindowKind>,
    pub enhancer: EnhancerKind,
    /// Learned analysis and synthesis matrices; the DFT-stacked basis is
    /// used when absent.
    pub basis_files: Option<(PathBuf, PathBuf)>,
    pub rectify: bool,
}

fn setup(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Pipeline(e.to_string())
}

impl PipelineSpec {
    /// Window kind implied by the geometry.
    pub fn inferred(config: StreamConfig, enhancer: EnhancerKind) -> Self {
        let window = match config.mode {
            Mode::Fbe => None,
            _ if config.analysis_len == config.synthesis_len => Some(WindowKind::Sym),
            _ => Some(WindowKind::Asym),
        };
        Self {
            config,
            window,
            enhancer,
            basis_files: None,
            rectify: false,
        }
    }

    pub fn check(&self) -> Result<(), HarnessError> {
        self.config.validate()?;
        let c = &self.config;
        let ok = match (c.mode, self.window) {
            (Mode::Fbe, None) => true,
            (Mode::Fbe, Some(_)) | (_, None) => false,
            (_, Some(WindowKind::Sym)) => c.analysis_len == c.synthesis_len,
            (_, Some(WindowKind::Asym)) => c.analysis_len > c.synthesis_len,
            (_, Some(WindowKind::Learned)) => true,
        };
        if !ok {
            return Err(HarnessError::Pipeline(format!(
                "window kind {:?} does not fit geometry {c}",
                self.window
            )));
        }
        Ok(())
    }

    fn basis(&self) -> Result<Arc<TransformBasis>, HarnessError> {
        let c = &self.config;
        Ok(Arc::new(match (self.window, &self.basis_files) {
            (Some(WindowKind::Learned), Some((a, s))) => load_basis(a, s, c, self.rectify).map_err(setup)?,
            (Some(WindowKind::Learned), None) => {
                let (analysis, synthesis) =
                    dft_stacked_basis(c.transform_size, c.analysis_len, c.synthesis_len);
                TransformBasis::Learned {
                    analysis,
                    synthesis,
                    rectify: self.rectify,
                }
            }
            _ => TransformBasis::Canonical,
        }))
    }

    /// Declared versus measured latency of this geometry with identity processing.
    pub fn audit(&self) -> Result<LatencyAudit, HarnessError> {
        self.check()?;
        measure_latency(Pipeline::identity(&self.config).map_err(setup)?).map_err(setup)
    }

    /// Enhances `noisy`; oracle enhancers read `clean`.
    pub fn run(&self, noisy: &Signal, clean: Option<&Signal>) -> Result<Signal, HarnessError> {
        self.check()?;
        let clean = match (self.enhancer.needs_clean(), clean) {
            (true, None) => {
                return Err(HarnessError::Pipeline(format!(
                    "{:?} needs a clean reference",
                    self.enhancer
                )))
            }
            (_, c) => c,
        };
        if let Some(c) = clean {
            if c.len() != noisy.len() {
                return Err(HarnessError::Pipeline("clean and noisy lengths differ".into()));
            }
        }
        let config = &self.config;
        if config.mode == Mode::Fbe {
            let predictor: Box<dyn FilterPredictor> = match self.enhancer {
                EnhancerKind::Identity => Box::new(IdentityPredictor),
                EnhancerKind::Zero => Box::new(ZeroPredictor),
                EnhancerKind::OracleWiener => Box::new(OracleWienerFbe::new(
                    clean.expect("checked").samples.clone(),
                    config.hop,
                )),
                other => return Err(HarnessError::Pipeline(format!("{other:?} has no FBE form"))),
            };
            return run_fbe(noisy, config, predictor).map_err(setup);
        }
        let pair = WindowPair::for_config(config).map_err(setup)?;
        let basis = self.basis()?;
        let reference = match clean {
            Some(c) => {
                let transform = Transform::for_config(config, basis.clone()).map_err(setup)?;
                analyze_signal(&c.samples, &transform, &pair).map_err(setup)?
            }
            None => Vec::new(),
        };
        let inner: Box<dyn Enhancer> = match self.enhancer {
            EnhancerKind::Identity => Box::new(Identity),
            EnhancerKind::Zero => Box::new(Zero),
            EnhancerKind::OracleWiener => Box::new(OracleWiener::new(reference)),
            EnhancerKind::OracleDeepFilter => {
                Box::new(OracleDeepFilter::new(reference, DEEP_FILTER_SMOOTHING))
            }
            EnhancerKind::WienerMapping => {
                Box::new(WienerMapping::new(reference, DEFAULT_COMPRESSION).map_err(setup)?)
            }
            EnhancerKind::CleanLookahead => Box::new(OracleLookahead::new(reference)),
            EnhancerKind::WienerLookahead => {
                let transform = Transform::for_config(config, basis.clone()).map_err(setup)?;
                let noisy_frames = analyze_signal(&noisy.samples, &transform, &pair).map_err(setup)?;
                let targets = noisy_frames
                    .into_iter()
                    .zip(&reference)
                    .map(|(mut x, s)| {
                        for (xb, sb) in x.bins.iter_mut().zip(&s.bins) {
                            *xb *= wiener_gain(*xb, *sb);
                        }
                        x
                    })
                    .collect();
                Box::new(OracleLookahead::new(targets))
            }
        };
        let enhancer: Box<dyn Enhancer> = match config.mode.lookahead() {
            0 => inner,
            a => Box::new(predict_wrapper(inner, a).map_err(setup)?),
        };
        stream_ola(noisy, config, &pair, basis, enhancer).map_err(setup)
    }
}

/// Maximum steady-state error of identity overlap-add (or unit-filter FBE)
/// over `seconds` of seeded white noise, relative to the input peak.
/// Samples within `L_a + P` of either end are excluded.
pub fn reconstruction_error(config: &StreamConfig, seconds: f64, seed: u64) -> Result<f64, HarnessError> {
    let len = (seconds * f64::from(config.sample_rate)) as usize;
    let trim = config.analysis_len + config.hop;
    if len <= 2 * trim {
        return Err(HarnessError::Pipeline("signal too short for a steady state".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Signal {
        samples: (0..len).map(|_| StandardNormal.sample(&mut rng)).collect(),
        sample_rate: config.sample_rate,
    };
    let y = PipelineSpec::inferred(*config, EnhancerKind::Identity).run(&x, None)?;
    let peak = x.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = (trim..len - trim).fold(0.0f64, |m, n| m.max((y.samples[n] - x.samples[n]).abs()));
    Ok(err / peak)
}

/// Builds and runs the pipeline described by `spec`.
pub fn enhance_signal(
    spec: &PipelineSpec,
    noisy: &Signal,
    clean: Option<&Signal>,
) -> Result<Signal, HarnessError> {
    spec.run(noisy, clean)
}
