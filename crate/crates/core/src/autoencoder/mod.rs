//! Dense autoencoder over 2049-bin magnitude frames.
//!
//! The encoder narrows to an 8-unit latent layer and the decoder widens back
//! to 2049 outputs. Every layer is rectified, so latents and reconstructions
//! are non-negative. Only the first hidden layer and the latent layer carry
//! bias vectors.

mod corpus;
mod network;
mod train;
mod weights;

pub use corpus::{generate_corpus, CorpusConfig, Timbre};
pub use train::{train, GradientProbe, LossHistory, TrainConfig, TrainedModel, MIN_CORPUS_FRAMES};
pub use weights::{load_weights, loss_csv_path, read_weights, save_weights, write_weights, FORMAT_VERSION, MAGIC};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::MagnitudeFrame;
use crate::{Error, Result};
use network::{Dense, Network};

/// Bins per magnitude frame (one side of a 4096-point transform).
pub const FRAME_BINS: usize = 2049;

/// Width of the latent layer.
pub const LATENT_DIM: usize = 8;

/// Hidden-layer widths, input excluded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    sizes: Vec<usize>,
}

impl Default for LayerSpec {
    fn default() -> Self {
        Self {
            sizes: vec![
                1000, 512, 256, 128, 64, 32, 16, 8, 16, 32, 64, 128, 256, 512, 2049,
            ],
        }
    }
}

impl LayerSpec {
    /// Validates that widths strictly narrow to a single 8-wide latent layer,
    /// then strictly widen to [`FRAME_BINS`].
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        let bad = |msg: String| Err(Error::Config(format!("layer sizes {sizes:?}: {msg}")));
        if sizes.last() != Some(&FRAME_BINS) {
            return bad(format!("last layer must have {FRAME_BINS} units"));
        }
        let latent = sizes
            .iter()
            .enumerate()
            .min_by_key(|(_, s)| **s)
            .map(|(i, _)| i)
            .expect("non-empty");
        if sizes[latent] != LATENT_DIM {
            return bad(format!("narrowest layer must have {LATENT_DIM} units"));
        }
        if !sizes[..=latent].windows(2).all(|w| w[0] > w[1]) {
            return bad("encoder widths must strictly decrease".into());
        }
        if !sizes[latent..].windows(2).all(|w| w[0] < w[1]) {
            return bad("decoder widths must strictly increase".into());
        }
        Ok(Self { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Index of the latent layer within [`LayerSpec::sizes`].
    pub fn latent_index(&self) -> usize {
        self.sizes
            .iter()
            .position(|&s| s == LATENT_DIM)
            .expect("validated spec has a latent layer")
    }

    /// Whether layer `idx` owns a bias vector.
    pub fn has_bias(&self, idx: usize) -> bool {
        idx == 0 || idx == self.latent_index()
    }

    /// `(fan_in, fan_out)` of every layer.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        let mut fan_in = FRAME_BINS;
        self.sizes
            .iter()
            .map(|&out| {
                let shape = (fan_in, out);
                fan_in = out;
                shape
            })
            .collect()
    }
}

/// The 8 user-facing synthesis parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatentVector(pub [f32; LATENT_DIM]);

impl LatentVector {
    pub fn splat(v: f32) -> Self {
        Self([v; LATENT_DIM])
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() != LATENT_DIM {
            return Err(Error::Shape {
                what: "latent vector",
                expected: LATENT_DIM,
                got: values.len(),
            });
        }
        let mut out = [0.0f32; LATENT_DIM];
        for (o, v) in out.iter_mut().zip(values) {
            if !v.is_finite() {
                return Err(Error::Argument(format!("latent value {v} is not finite")));
            }
            *o = *v as f32;
        }
        Ok(Self(out))
    }

    pub fn values(&self) -> &[f32; LATENT_DIM] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }
}

/// A trained (or freshly initialized) autoencoder. Immutable once built; all
/// inference methods take `&self` and can run concurrently.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    spec: LayerSpec,
    net: Network<f32>,
}

impl AutoencoderModel {
    /// Glorot-uniform weights, zero biases.
    pub fn initialize(spec: LayerSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .shapes()
            .into_iter()
            .enumerate()
            .map(|(idx, (fan_in, fan_out))| {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
                Dense {
                    fan_in,
                    fan_out,
                    weights: (0..fan_in * fan_out)
                        .map(|_| rng.random_range(-limit..limit))
                        .collect(),
                    bias: spec.has_bias(idx).then(|| vec![0.0; fan_out]),
                }
            })
            .collect();
        Self {
            spec,
            net: Network { layers },
        }
    }

    pub(crate) fn from_parts(spec: LayerSpec, net: Network<f32>) -> Self {
        Self { spec, net }
    }

    pub(crate) fn network(&self) -> &Network<f32> {
        &self.net
    }

    pub(crate) fn network_mut(&mut self) -> &mut Network<f32> {
        &mut self.net
    }

    pub fn layer_spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn layer_count(&self) -> usize {
        self.net.layers.len()
    }

    /// Row-major `fan_in × fan_out` weights of layer `idx`.
    pub fn weights(&self, idx: usize) -> &[f32] {
        &self.net.layers[idx].weights
    }

    pub fn bias(&self, idx: usize) -> Option<&[f32]> {
        self.net.layers[idx].bias.as_deref()
    }

    pub fn parameter_count(&self) -> usize {
        self.net
            .layers
            .iter()
            .map(|l| l.weights.len() + l.bias.as_ref().map_or(0, Vec::len))
            .sum()
    }

    fn check_frame(frame: &MagnitudeFrame) -> Result<()> {
        if frame.len() != FRAME_BINS {
            return Err(Error::Shape {
                what: "magnitude frame",
                expected: FRAME_BINS,
                got: frame.len(),
            });
        }
        Ok(())
    }

    fn to_latent(values: Vec<f32>) -> LatentVector {
        let mut out = [0.0; LATENT_DIM];
        out.copy_from_slice(&values);
        LatentVector(out)
    }

    /// Encoder half: frame to latent activations.
    pub fn encode(&self, frame: &MagnitudeFrame) -> Result<LatentVector> {
        Self::check_frame(frame)?;
        let end = self.spec.latent_index() + 1;
        Ok(Self::to_latent(self.net.forward_range(frame.bins(), 1, 0..end, None)))
    }

    /// Decoder half: latent values to a magnitude frame.
    pub fn decode(&self, latent: &LatentVector) -> Result<MagnitudeFrame> {
        let start = self.spec.latent_index() + 1;
        let out = self
            .net
            .forward_range(latent.values(), 1, start..self.layer_count(), None);
        Ok(MagnitudeFrame::from_vec_unchecked(out))
    }

    /// Full encode/decode pass. `bias`, when given, is added to the latent
    /// layer's pre-activation before its rectifier.
    pub fn predict(
        &self,
        frame: &MagnitudeFrame,
        bias: Option<&LatentVector>,
    ) -> Result<MagnitudeFrame> {
        Self::check_frame(frame)?;
        let offset = bias.map(|b| (self.spec.latent_index(), &b.values()[..]));
        let out = self
            .net
            .forward_range(frame.bins(), 1, 0..self.layer_count(), offset);
        Ok(MagnitudeFrame::from_vec_unchecked(out))
    }

    /// Mean squared reconstruction error over `frames`.
    pub fn mse(&self, frames: &[MagnitudeFrame]) -> Result<f64> {
        if frames.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for chunk in frames.chunks(256) {
            let mut batch = Vec::with_capacity(chunk.len() * FRAME_BINS);
            for f in chunk {
                Self::check_frame(f)?;
                batch.extend_from_slice(f.bins());
            }
            total += self.net.mse(&batch, chunk.len(), None) * chunk.len() as f64;
        }
        Ok(total / frames.len() as f64)
    }
}
