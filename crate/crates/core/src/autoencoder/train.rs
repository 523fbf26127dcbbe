use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{Gradients, Network};
use super::{AutoencoderModel, LayerSpec, FRAME_BINS};
use crate::dsp::MagnitudeFrame;
use crate::{Error, Result};

/// Smallest corpus [`train`] accepts.
pub const MIN_CORPUS_FRAMES: usize = 1000;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 64,
            epochs: 50,
            seed: 0,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation_fraction must be in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

/// Per-epoch training and validation loss.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossHistory {
    pub epochs: Vec<EpochLoss>,
}

impl LossHistory {
    /// `epoch,train_mse,val_mse` with 1-based epochs.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse,val_mse\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{:e},{:e}", e.epoch, e.train_mse, e.val_mse);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("epoch,train_mse,val_mse") {
            return Err(Error::format("loss csv header", "expected `epoch,train_mse,val_mse`"));
        }
        let epochs = lines
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, line)| {
                let bad = || Error::format(format!("loss csv row {}", i + 1), line.to_string());
                let mut cols = line.split(',');
                let mut next = || cols.next().ok_or_else(bad);
                let epoch = next()?.trim().parse().map_err(|_| bad())?;
                let train_mse = next()?.trim().parse().map_err(|_| bad())?;
                let val_mse = next()?.trim().parse().map_err(|_| bad())?;
                Ok(EpochLoss {
                    epoch,
                    train_mse,
                    val_mse,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { epochs })
    }

    /// Mean validation loss over the first `n` epochs.
    pub fn mean_val_first(&self, n: usize) -> f64 {
        mean(self.epochs.iter().take(n).map(|e| e.val_mse))
    }

    /// Mean validation loss over the last `n` epochs.
    pub fn mean_val_last(&self, n: usize) -> f64 {
        mean(self.epochs.iter().rev().take(n).map(|e| e.val_mse))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: AutoencoderModel,
    pub history: LossHistory,
    pub elapsed_s: f64,
}

struct Adam {
    step: i32,
    m: Gradients<f32>,
    v: Gradients<f32>,
}

impl Adam {
    fn new(net: &Network<f32>) -> Self {
        Self {
            step: 0,
            m: net.zero_gradients(),
            v: net.zero_gradients(),
        }
    }

    fn update(&mut self, net: &mut Network<f32>, grads: &Gradients<f32>, lr: f64) {
        self.step += 1;
        let lr_t = (lr * (1.0 - ADAM_BETA2.powi(self.step)).sqrt()
            / (1.0 - ADAM_BETA1.powi(self.step))) as f32;
        let (b1, b2, eps) = (ADAM_BETA1 as f32, ADAM_BETA2 as f32, ADAM_EPSILON as f32);
        let step = |p: &mut [f32], g: &[f32], m: &mut [f32], v: &mut [f32]| {
            for (((p, g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr_t * *m / (v.sqrt() + eps);
            }
        };
        for (idx, layer) in net.layers.iter_mut().enumerate() {
            step(
                &mut layer.weights,
                &grads.weights[idx],
                &mut self.m.weights[idx],
                &mut self.v.weights[idx],
            );
            // Layers without a bias vector have nothing to update here.
            if let (Some(b), Some(gb), Some(mb), Some(vb)) = (
                layer.bias.as_mut(),
                grads.biases[idx].as_ref(),
                self.m.biases[idx].as_mut(),
                self.v.biases[idx].as_mut(),
            ) {
                step(b, gb, mb, vb);
            }
        }
    }
}

fn gather(frames: &[MagnitudeFrame], idx: &[usize], out: &mut Vec<f32>) {
    out.clear();
    for &i in idx {
        out.extend_from_slice(frames[i].bins());
    }
}

/// Trains the default topology. See [`train_with_spec`].
pub fn train(corpus: &[MagnitudeFrame], cfg: &TrainConfig) -> Result<TrainedModel> {
    train_with_spec(corpus, LayerSpec::default(), cfg)
}

/// Fits the autoencoder to reproduce `corpus` under mean squared error with
/// mini-batch Adam. A seeded split holds out `validation_fraction` of the
/// frames; the same seed reproduces the same model and loss history.
pub fn train_with_spec(
    corpus: &[MagnitudeFrame],
    spec: LayerSpec,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    cfg.validate()?;
    if corpus.len() < MIN_CORPUS_FRAMES {
        return Err(Error::Training(format!(
            "corpus has {} frames, need at least {MIN_CORPUS_FRAMES}",
            corpus.len()
        )));
    }
    if let Some(f) = corpus.iter().find(|f| f.len() != FRAME_BINS) {
        return Err(Error::Shape {
            what: "corpus frame",
            expected: FRAME_BINS,
            got: f.len(),
        });
    }
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((corpus.len() as f64 * cfg.validation_fraction).round() as usize)
        .clamp(1, corpus.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    let val_frames: Vec<MagnitudeFrame> = val_idx.iter().map(|&i| corpus[i].clone()).collect();

    let mut model = AutoencoderModel::initialize(spec, rng.random());
    let mut adam = Adam::new(model.network());
    let mut grads = model.network().zero_gradients();
    let mut batch = Vec::with_capacity(cfg.batch_size * FRAME_BINS);
    let mut history = LossHistory::default();

    for epoch in 1..=cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in train_idx.chunks(cfg.batch_size) {
            gather(corpus, chunk, &mut batch);
            let loss = model.network().mse(&batch, chunk.len(), Some(&mut grads));
            total += loss * chunk.len() as f64;
            adam.update(model.network_mut(), &grads, cfg.learning_rate);
        }
        let train_mse = total / train_idx.len() as f64;
        let val_mse = model.mse(&val_frames)?;
        if !val_mse.is_finite() {
            return Err(Error::Training(format!("validation loss diverged at epoch {epoch}")));
        }
        tracing::info!(epoch, train_mse, val_mse, "epoch finished");
        history.epochs.push(EpochLoss {
            epoch,
            train_mse,
            val_mse,
        });
    }
    Ok(TrainedModel {
        model,
        history,
        elapsed_s: started.elapsed().as_secs_f64(),
    })
}

/// Evaluates the reconstruction loss of a model in f64 on a fixed batch,
/// exposing both backpropagated gradients and loss evaluations at perturbed
/// weights (for finite-difference checks).
pub struct GradientProbe {
    net: Network<f64>,
    input: Vec<f64>,
    batch: usize,
}

impl GradientProbe {
    pub fn new(model: &AutoencoderModel, frames: &[MagnitudeFrame]) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Argument("gradient probe needs at least one frame".into()));
        }
        let mut input = Vec::with_capacity(frames.len() * FRAME_BINS);
        for f in frames {
            if f.len() != FRAME_BINS {
                return Err(Error::Shape {
                    what: "probe frame",
                    expected: FRAME_BINS,
                    got: f.len(),
                });
            }
            input.extend(f.bins().iter().map(|&b| b as f64));
        }
        Ok(Self {
            net: model.network().cast(),
            input,
            batch: frames.len(),
        })
    }

    pub fn layer_count(&self) -> usize {
        self.net.layers.len()
    }

    pub fn weight_count(&self, layer: usize) -> usize {
        self.net.layers[layer].weights.len()
    }

    pub fn weight(&self, layer: usize, index: usize) -> f64 {
        self.net.layers[layer].weights[index]
    }

    pub fn loss(&self) -> f64 {
        self.net.mse(&self.input, self.batch, None)
    }

    /// Backpropagated `dLoss/dW` for every layer.
    pub fn weight_gradients(&self) -> Vec<Vec<f64>> {
        let mut grads = self.net.zero_gradients();
        self.net.mse(&self.input, self.batch, Some(&mut grads));
        grads.weights
    }

    /// Loss with one weight temporarily replaced by `value`.
    pub fn loss_with_weight(&mut self, layer: usize, index: usize, value: f64) -> f64 {
        let original = std::mem::replace(&mut self.net.layers[layer].weights[index], value);
        let loss = self.loss();
        self.net.layers[layer].weights[index] = original;
        loss
    }
}
