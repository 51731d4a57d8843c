//! Streaming low-latency speech enhancement pipelines.
//!
//! Overlap-add pipelines with symmetric, asymmetric or learned
//! analysis/synthesis transforms, a filterbank-equalizer path, future-frame
//! prediction, oracle enhancers, metrics and a latency audit.

pub mod audit;
pub mod config;
pub mod enhance;
pub mod fbe;
pub mod harness;
pub mod metrics;
pub mod transforms;
pub mod windows;

pub use config::{derive_latency, LatencySpec, Mode, Signal, StreamConfig};
pub use transforms::{SpectralFrame, TransformBasis};
pub use windows::WindowPair;
