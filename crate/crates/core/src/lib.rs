//! Keyword spotting with temporal-convolution residual networks.
//!
//! The crate covers the whole pipeline: WAV decoding, dataset indexing and
//! augmentation ([`audio_io`]), the MFCC frontend ([`features`]), the layer
//! kernels ([`nn_core`]), model construction and checkpoints ([`models`]),
//! analytic cost accounting and latency measurement ([`profiler`]),
//! SGD training ([`train`]) and ROC evaluation ([`eval`]).
//!
//! A temporal model treats the `t x f` MFCC matrix as a `t x 1 x f` tensor:
//! every convolution sees all frequency bins at once and slides only along time.

pub mod audio_io;
pub mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod nn_core;
pub mod profiler;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
