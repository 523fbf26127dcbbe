//! Short-time Fourier transform with weighted overlap-add resynthesis.
//!
//! Frame `t` covers samples `t * hop .. t * hop + fft_size` (no centering
//! pad). The same window is used for analysis and synthesis, and the inverse
//! divides by the summed squared window, which makes `istft(stft(x))` exact
//! wherever that sum is non-negligible.

use std::fmt;
use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use super::{AudioBuffer, Complex64, ComplexFrame};
use crate::{Error, Result};

/// Overlap-add sums below this are treated as uncovered samples (output 0).
const MIN_WINDOW_SUM: f64 = 1e-10;

/// Relative ripple allowed in the summed squared window.
const COLA_TOLERANCE: f64 = 1e-6;

/// Periodic Hann window of length `n`.
pub fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let s = (std::f64::consts::PI * i as f64 / n as f64).sin();
            s * s
        })
        .collect()
}

/// Transform geometry. Construct through [`StftConfig::new`] or
/// [`StftConfig::with_window`] so the invariants hold.
#[derive(Clone, PartialEq)]
pub struct StftConfig {
    fft_size: usize,
    hop_size: usize,
    window: Vec<f64>,
}

impl fmt::Debug for StftConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StftConfig")
            .field("fft_size", &self.fft_size)
            .field("hop_size", &self.hop_size)
            .finish_non_exhaustive()
    }
}

impl Default for StftConfig {
    /// 4096-point transform, hop 1024, periodic Hann.
    fn default() -> Self {
        Self::new(4096, 1024).expect("default STFT config is valid")
    }
}

impl StftConfig {
    /// Periodic-Hann configuration.
    pub fn new(fft_size: usize, hop_size: usize) -> Result<Self> {
        Self::with_window(fft_size, hop_size, hann_periodic(fft_size))
    }

    pub fn with_window(fft_size: usize, hop_size: usize, window: Vec<f64>) -> Result<Self> {
        if fft_size < 2 || !fft_size.is_power_of_two() {
            return Err(Error::Config(format!(
                "fft_size {fft_size} is not a power of two >= 2"
            )));
        }
        if hop_size == 0 || hop_size > fft_size {
            return Err(Error::Config(format!(
                "hop_size {hop_size} must be in 1..={fft_size}"
            )));
        }
        if window.len() != fft_size {
            return Err(Error::Config(format!(
                "window has {} samples, expected {fft_size}",
                window.len()
            )));
        }
        let cfg = Self {
            fft_size,
            hop_size,
            window,
        };
        let ripple = cfg.cola_ripple();
        if !(ripple <= COLA_TOLERANCE) {
            return Err(Error::Config(format!(
                "window/hop pair is not constant-overlap-add (relative ripple {ripple:e})"
            )));
        }
        Ok(cfg)
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn hop_size(&self) -> usize {
        self.hop_size
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Number of one-sided bins, `fft_size / 2 + 1`.
    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Length of the signal produced by overlap-adding `frames` frames.
    pub fn istft_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop_size + self.fft_size
        }
    }

    // (max - min) / mean of the steady-state summed squared window.
    fn cola_ripple(&self) -> f64 {
        let sums: Vec<f64> = (0..self.hop_size)
            .map(|n| {
                (n..self.fft_size)
                    .step_by(self.hop_size)
                    .map(|i| self.window[i] * self.window[i])
                    .sum()
            })
            .collect();
        let max = sums.iter().cloned().fold(f64::MIN, f64::max);
        let min = sums.iter().cloned().fold(f64::MAX, f64::min);
        let mean = sums.iter().sum::<f64>() / sums.len() as f64;
        if mean <= 0.0 {
            f64::INFINITY
        } else {
            (max - min) / mean
        }
    }
}

/// Number of frames [`stft`] yields for a signal of `len` samples.
pub fn frame_count(len: usize, cfg: &StftConfig) -> usize {
    if len <= cfg.fft_size {
        1
    } else {
        (len - cfg.fft_size) / cfg.hop_size + 1
    }
}

/// FFT plans bound to one [`StftConfig`]; reuse it for repeated transforms.
#[derive(Clone)]
pub struct Stft {
    cfg: StftConfig,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl Stft {
    pub fn new(cfg: &StftConfig) -> Self {
        let mut planner = RealFftPlanner::<f64>::new();
        Self {
            forward: planner.plan_fft_forward(cfg.fft_size),
            inverse: planner.plan_fft_inverse(cfg.fft_size),
            cfg: cfg.clone(),
        }
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    /// One-sided DFT of `window ⊙ segment`; `segment` shorter than the
    /// transform is zero-padded.
    pub fn frame(&self, segment: &[f64]) -> ComplexFrame {
        let n = self.cfg.fft_size;
        let mut input: Vec<f64> = self
            .cfg
            .window
            .iter()
            .zip(segment.iter().chain(std::iter::repeat(&0.0)))
            .map(|(w, x)| w * x)
            .collect();
        debug_assert_eq!(input.len(), n);
        let mut output = self.forward.make_output_vec();
        self.forward
            .process(&mut input, &mut output)
            .expect("forward FFT buffers sized by plan");
        output
    }

    pub fn analyze(&self, samples: &[f64]) -> Vec<ComplexFrame> {
        let frames = frame_count(samples.len(), &self.cfg);
        (0..frames)
            .map(|t| {
                let start = t * self.cfg.hop_size;
                let end = (start + self.cfg.fft_size).min(samples.len());
                self.frame(&samples[start..end])
            })
            .collect()
    }

    /// Windowed inverse DFT of a single frame, before overlap-add
    /// normalization.
    pub fn windowed_inverse(&self, frame: &[Complex64]) -> Result<Vec<f64>> {
        let n = self.cfg.fft_size;
        if frame.len() != self.cfg.bins() {
            return Err(Error::Shape {
                what: "complex frame",
                expected: self.cfg.bins(),
                got: frame.len(),
            });
        }
        let mut spectrum = frame.to_vec();
        // A real signal has purely real DC and Nyquist bins.
        spectrum[0].im = 0.0;
        spectrum[n / 2].im = 0.0;
        let mut out = self.inverse.make_output_vec();
        self.inverse
            .process(&mut spectrum, &mut out)
            .expect("inverse FFT buffers sized by plan");
        let scale = 1.0 / n as f64;
        for (o, w) in out.iter_mut().zip(&self.cfg.window) {
            *o *= w * scale;
        }
        Ok(out)
    }

    pub fn synthesize(&self, frames: &[ComplexFrame]) -> Result<Vec<f64>> {
        if frames.is_empty() {
            return Err(Error::Argument("istft needs at least one frame".into()));
        }
        let len = self.cfg.istft_len(frames.len());
        let mut out = vec![0.0; len];
        let mut norm = vec![0.0; len];
        for (t, frame) in frames.iter().enumerate() {
            let start = t * self.cfg.hop_size;
            let chunk = self.windowed_inverse(frame)?;
            for (i, (c, w)) in chunk.iter().zip(&self.cfg.window).enumerate() {
                out[start + i] += c;
                norm[start + i] += w * w;
            }
        }
        for (o, n) in out.iter_mut().zip(&norm) {
            *o = if *n > MIN_WINDOW_SUM { *o / n } else { 0.0 };
        }
        Ok(out)
    }
}

/// Short-time Fourier transform of `audio`.
pub fn stft(audio: &AudioBuffer, cfg: &StftConfig) -> Result<Vec<ComplexFrame>> {
    if audio.is_empty() {
        return Err(Error::Argument("stft of an empty buffer".into()));
    }
    Ok(Stft::new(cfg).analyze(audio.samples()))
}

/// Weighted overlap-add inverse of [`stft`].
pub fn istft(frames: &[ComplexFrame], cfg: &StftConfig) -> Result<AudioBuffer> {
    Ok(AudioBuffer::new(Stft::new(cfg).synthesize(frames)?))
}
