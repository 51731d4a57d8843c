use std::collections::VecDeque;
use std::sync::Arc;

use super::{SpectralFrame, Transform, TransformBasis, TransformError};
use crate::config::{Mode, Signal, StreamConfig};
use crate::enhance::{EnhanceError, Enhancer};
use crate::windows::WindowPair;

/// Streaming overlap-add engine for one stream.
///
/// Input is pushed sample by sample. Frame `k` is processed as soon as its
/// last analysis sample arrives; its enhanced output is committed to slot
/// `k + lookahead`. Output samples are released once no later slot can
/// touch them and their input sample has arrived.
pub struct OlaEngine<E> {
    transform: Transform,
    pair: WindowPair,
    enhancer: E,
    hop: usize,
    analysis_len: usize,
    synthesis_len: usize,
    lookahead: usize,
    input: VecDeque<f64>,
    received: usize,
    next_frame: usize,
    pending: VecDeque<f64>,
    emitted: usize,
}

impl<E: Enhancer> OlaEngine<E> {
    pub fn new(
        config: &StreamConfig,
        pair: WindowPair,
        basis: Arc<TransformBasis>,
        enhancer: E,
    ) -> Result<Self, TransformError> {
        config
            .validate()
            .map_err(|e| TransformError::Config(e.to_string()))?;
        if config.mode == Mode::Fbe {
            return Err(TransformError::Config(
                "overlap-add engine cannot run an FBE config".into(),
            ));
        }
        if !pair.normalized {
            return Err(TransformError::Unnormalized);
        }
        if pair.analysis_len() != config.analysis_len
            || pair.synthesis_len() != config.synthesis_len
            || pair.hop != config.hop
        {
            return Err(TransformError::Config(format!(
                "window pair ({}/{}, hop {}) does not match config {config}",
                pair.analysis_len(),
                pair.synthesis_len(),
                pair.hop
            )));
        }
        let lookahead = config.mode.lookahead();
        if enhancer.lookahead() != lookahead {
            return Err(TransformError::Config(format!(
                "enhancer `{}` looks {} frame(s) ahead, config expects {lookahead}",
                enhancer.name(),
                enhancer.lookahead()
            )));
        }
        let transform = Transform::for_config(config, basis)?;
        Ok(Self {
            transform,
            pair,
            enhancer,
            hop: config.hop,
            analysis_len: config.analysis_len,
            synthesis_len: config.synthesis_len,
            lookahead,
            input: VecDeque::with_capacity(config.analysis_len),
            received: 0,
            next_frame: 0,
            pending: VecDeque::new(),
            emitted: 0,
        })
    }

    /// Samples pushed so far; also the current time in sample ticks.
    pub fn received(&self) -> usize {
        self.received
    }

    /// Output samples released so far.
    pub fn emitted(&self) -> usize {
        self.emitted
    }

    pub fn enhancer(&self) -> &E {
        &self.enhancer
    }

    /// Pushes input samples, appending every released output sample to `out`.
    pub fn push(&mut self, samples: &[f64], out: &mut Vec<f64>) -> Result<(), TransformError> {
        for &x in samples {
            self.input.push_back(x);
            self.received += 1;
            if self.input.len() == self.analysis_len {
                self.process_frame(out)?;
                self.input.drain(..self.hop);
            }
        }
        Ok(())
    }

    /// Releases everything up to `len` output samples; uncovered samples are zero.
    pub fn finish(&mut self, len: usize, out: &mut Vec<f64>) {
        while self.emitted < len {
            out.push(self.pending.pop_front().unwrap_or(0.0));
            self.emitted += 1;
        }
    }

    fn process_frame(&mut self, out: &mut Vec<f64>) -> Result<(), TransformError> {
        let k = self.next_frame;
        self.next_frame += 1;
        let frame = self.input.make_contiguous();
        let spec = self.transform.analyze(frame, &self.pair.analysis, k)?;
        let slot = k + self.lookahead;
        let enhanced = self.enhancer.enhance(&spec, slot)?;
        if enhanced.len() != spec.len() {
            return Err(EnhanceError::Shape {
                expected: spec.len(),
                got: enhanced.len(),
            }
            .into());
        }
        let synth = self.transform.synthesize(&enhanced, &self.pair.synthesis)?;

        let start = slot * self.hop + self.analysis_len - self.synthesis_len;
        let rel = start - self.emitted;
        if self.pending.len() < rel + self.synthesis_len {
            self.pending.resize(rel + self.synthesis_len, 0.0);
        }
        for (m, v) in synth.iter().enumerate() {
            self.pending[rel + m] += v;
        }

        let next_start = start + self.hop;
        let limit = next_start.min(self.received);
        while self.emitted < limit {
            out.push(self.pending.pop_front().unwrap_or(0.0));
            self.emitted += 1;
        }
        Ok(())
    }
}

/// Offline overlap-add enhancement. Output sample `n` is aligned with input
/// sample `n`; the output has the input's length.
pub fn stream_ola<E: Enhancer>(
    input: &Signal,
    config: &StreamConfig,
    pair: &WindowPair,
    basis: Arc<TransformBasis>,
    enhancer: E,
) -> Result<Signal, TransformError> {
    input
        .check_rate(config)
        .map_err(|e| TransformError::Config(e.to_string()))?;
    let mut engine = OlaEngine::new(config, pair.clone(), basis, enhancer)?;
    let mut out = Vec::with_capacity(input.len());
    engine.push(&input.samples, &mut out)?;
    engine.finish(input.len(), &mut out);
    out.truncate(input.len());
    Ok(Signal {
        samples: out,
        sample_rate: input.sample_rate,
    })
}

/// Analyzes every complete frame of `samples`.
pub fn analyze_signal(
    samples: &[f64],
    transform: &Transform,
    pair: &WindowPair,
) -> Result<Vec<SpectralFrame>, TransformError> {
    let la = pair.analysis_len();
    let hop = pair.hop;
    if samples.len() < la {
        return Ok(Vec::new());
    }
    let frames = (samples.len() - la) / hop + 1;
    (0..frames)
        .map(|k| transform.analyze(&samples[k * hop..k * hop + la], &pair.analysis, k))
        .collect()
}
