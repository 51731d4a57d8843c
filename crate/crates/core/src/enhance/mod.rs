//! The per-frame enhancement slot.
//!
//! An [`Enhancer`] sees analysis frames strictly in order, one call per frame,
//! and returns the enhanced frame for the slot it is asked to fill. Without
//! prediction the slot is the frame's own index.

mod deep_filter;
mod oracle;
mod source;

use thiserror::Error;

pub use deep_filter::{apply_deep_filter, compress, decompress, DeepFilterCoeffs, DEFAULT_COMPRESSION};
pub use oracle::{wiener_gain, OracleDeepFilter, OracleLookahead, OracleWiener, WienerMapping};
pub use source::{
    CoeffSource, DeepFilterApply, FileCoeffSource, FileSpectrumSource, Mapping, SpectrumSource,
};

use crate::transforms::SpectralFrame;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnhanceError {
    #[error("frame shape mismatch: expected {expected} bins, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("filtering-based enhancer `{0}` cannot predict future frames")]
    FilteringPrediction(String),
    #[error("prediction needs at least one frame of lookahead")]
    ZeroLookahead,
    #[error("reference has no frame {0}")]
    MissingReference(usize),
    #[error("compression exponent {0} outside (0, 1]")]
    BadExponent(f64),
    #[error("coefficient source: {0}")]
    Source(String),
}

/// What the enhancer's output represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// A filter applied to the current noisy frame.
    Filtering,
    /// A direct estimate of the enhanced frame.
    Mapping,
}

pub trait Enhancer: Send {
    fn target(&self) -> Target;

    /// Frames between the newest observed frame and the slot being filled.
    fn lookahead(&self) -> usize {
        0
    }

    /// True when the output is a pass-through of the observed frame; the
    /// latency audit only accepts such enhancers.
    fn is_identity(&self) -> bool {
        false
    }

    fn name(&self) -> String;

    /// Enhances `frame` (index `k`) into the frame for `slot`, `slot >= k`.
    fn enhance(&mut self, frame: &SpectralFrame, slot: usize) -> Result<SpectralFrame, EnhanceError>;
}

impl<E: Enhancer + ?Sized> Enhancer for Box<E> {
    fn target(&self) -> Target {
        (**self).target()
    }
    fn lookahead(&self) -> usize {
        (**self).lookahead()
    }
    fn is_identity(&self) -> bool {
        (**self).is_identity()
    }
    fn name(&self) -> String {
        (**self).name()
    }
    fn enhance(&mut self, frame: &SpectralFrame, slot: usize) -> Result<SpectralFrame, EnhanceError> {
        (**self).enhance(frame, slot)
    }
}

/// Passes frames through. Wrapped in a predictor it repeats the last
/// observed frame.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Enhancer for Identity {
    fn target(&self) -> Target {
        Target::Mapping
    }
    fn is_identity(&self) -> bool {
        true
    }
    fn name(&self) -> String {
        "identity".into()
    }
    fn enhance(&mut self, frame: &SpectralFrame, slot: usize) -> Result<SpectralFrame, EnhanceError> {
        Ok(SpectralFrame {
            bins: frame.bins.clone(),
            index: slot,
        })
    }
}

/// The "repeat last frame" mapping predictor.
pub fn repeat_last() -> Identity {
    Identity
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Zero;

impl Enhancer for Zero {
    fn target(&self) -> Target {
        Target::Mapping
    }
    fn name(&self) -> String {
        "zero".into()
    }
    fn enhance(&mut self, frame: &SpectralFrame, slot: usize) -> Result<SpectralFrame, EnhanceError> {
        Ok(SpectralFrame::zeros(frame.len(), slot))
    }
}

/// Asks a mapping enhancer for the frame `frames` hops after the newest
/// observation.
#[derive(Debug, Clone)]
pub struct Predictive<E> {
    inner: E,
    frames: usize,
}

/// Wraps a mapping enhancer so that frame `k` fills slot `k + frames`.
/// Filtering targets need the current frame and are rejected.
pub fn predict_wrapper<E: Enhancer>(inner: E, frames: usize) -> Result<Predictive<E>, EnhanceError> {
    if frames == 0 {
        return Err(EnhanceError::ZeroLookahead);
    }
    if inner.target() == Target::Filtering {
        return Err(EnhanceError::FilteringPrediction(inner.name()));
    }
    Ok(Predictive { inner, frames })
}

impl<E> Predictive<E> {
    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: Enhancer> Enhancer for Predictive<E> {
    fn target(&self) -> Target {
        Target::Mapping
    }
    fn lookahead(&self) -> usize {
        self.frames + self.inner.lookahead()
    }
    fn is_identity(&self) -> bool {
        self.inner.is_identity()
    }
    fn name(&self) -> String {
        format!("predict{}({})", self.frames, self.inner.name())
    }
    fn enhance(&mut self, frame: &SpectralFrame, slot: usize) -> Result<SpectralFrame, EnhanceError> {
        let mut out = self.inner.enhance(frame, slot)?;
        out.index = slot;
        Ok(out)
    }
}
