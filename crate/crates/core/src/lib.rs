//! Network-modulation synthesis.
//!
//! A small dense autoencoder trained on 2049-bin magnitude spectra is wired
//! into trees of *modulator* and *carrier* nodes. A modulator renders frames
//! with the decoder half from 8 latent values; a carrier re-predicts its
//! parent's audio through the full network, optionally with a latent bias and
//! feedback; a predictive-feedback node evolves a seed buffer by rotating
//! predicted samples back into its own input.
//!
//! Module map:
//!
//! - [`dsp`]: STFT/ISTFT, frame normalization, Griffin-Lim, pitch shift, envelopes.
//! - [`autoencoder`]: the network, synthetic training corpus, training, weight files.
//! - [`netmod`]: node semantics, architecture trees, rendering.
//! - [`analysis`]: spectrograms, encoding time series, parameter sweeps.
//! - [`wav`]: 32-bit float mono WAV I/O.
//! - [`cli`] and [`service`]: the command line and HTTP front ends.
//!
//! See the `examples/` directory of this crate for runnable walkthroughs.

pub mod analysis;
pub mod autoencoder;
pub mod cli;
pub mod dsp;
mod error;
pub mod netmod;
pub mod service;
pub mod wav;

pub use error::{Error, Result};

/// Sample rate of every buffer the engine produces or accepts.
pub const SAMPLE_RATE: u32 = 44_100;
