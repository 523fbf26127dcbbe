//! Signal-processing kernels. Everything here is a pure function of its
//! inputs.

mod envelope;
mod griffin_lim;
mod pitch;
mod stft;

pub use envelope::{apply_envelope, Envelope};
pub use griffin_lim::{griffin_lim, spectral_convergence, DEFAULT_GRIFFIN_LIM_ITERATIONS};
pub use pitch::{pitch_shift, MAX_PITCH_SHIFT_SEMITONES};
pub use stft::{frame_count, hann_periodic, istft, stft, Stft, StftConfig};

pub use realfft::num_complex::Complex64;

use crate::{Error, Result, SAMPLE_RATE};

/// Frames below this peak magnitude are treated as silence by [`normalize_frame`].
pub const SILENCE_THRESHOLD: f32 = 1e-8;

/// One-sided spectrum of a real transform (`fft_size / 2 + 1` bins).
pub type ComplexFrame = Vec<Complex64>;

/// Mono audio at 44.1 kHz.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AudioBuffer {
    samples: Vec<f64>,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>) -> Self {
        Self { samples }
    }

    pub fn silence(len: usize) -> Self {
        Self::new(vec![0.0; len])
    }

    pub fn sample_rate(&self) -> u32 {
        SAMPLE_RATE
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / SAMPLE_RATE as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }
}

impl From<Vec<f64>> for AudioBuffer {
    fn from(samples: Vec<f64>) -> Self {
        Self::new(samples)
    }
}

/// Non-negative linear spectral magnitudes: the network's unit of input and
/// output.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MagnitudeFrame {
    bins: Vec<f32>,
}

impl MagnitudeFrame {
    /// Wraps `bins`, rejecting negative or non-finite values.
    pub fn new(bins: Vec<f32>) -> Result<Self> {
        if let Some(i) = bins.iter().position(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::Argument(format!(
                "magnitude bin {i} is {} (must be finite and >= 0)",
                bins[i]
            )));
        }
        Ok(Self { bins })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            bins: vec![0.0; len],
        }
    }

    /// Magnitudes of a complex frame.
    pub fn from_complex(frame: &[Complex64]) -> Self {
        Self {
            bins: frame.iter().map(|c| c.norm() as f32).collect(),
        }
    }

    // Callers guarantee non-negativity (rectifier outputs).
    pub(crate) fn from_vec_unchecked(bins: Vec<f32>) -> Self {
        debug_assert!(bins.iter().all(|b| *b >= 0.0));
        Self { bins }
    }

    pub fn bins(&self) -> &[f32] {
        &self.bins
    }

    pub fn into_bins(self) -> Vec<f32> {
        self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn max(&self) -> f32 {
        self.bins.iter().fold(0.0f32, |m, &b| m.max(b))
    }

    /// Element-wise `self + gain * other`.
    pub fn blend(&self, other: &MagnitudeFrame, gain: f32) -> Result<MagnitudeFrame> {
        if other.len() != self.len() {
            return Err(Error::Shape {
                what: "feedback frame",
                expected: self.len(),
                got: other.len(),
            });
        }
        let bins = self
            .bins
            .iter()
            .zip(&other.bins)
            .map(|(a, b)| a + gain * b)
            .collect();
        Ok(Self::from_vec_unchecked(bins))
    }

    /// Squared Euclidean distance to `other` (in f64).
    pub fn distance_sq(&self, other: &MagnitudeFrame) -> f64 {
        self.bins
            .iter()
            .zip(&other.bins)
            .map(|(a, b)| {
                let d = *a as f64 - *b as f64;
                d * d
            })
            .sum()
    }
}

/// Scales a frame so its largest bin is 1. Frames whose peak is at or below
/// [`SILENCE_THRESHOLD`] are returned unchanged.
pub fn normalize_frame(frame: &MagnitudeFrame) -> MagnitudeFrame {
    let max = frame.max();
    if max <= SILENCE_THRESHOLD {
        return frame.clone();
    }
    MagnitudeFrame::from_vec_unchecked(frame.bins.iter().map(|b| b / max).collect())
}

/// Magnitude frames of the STFT of `audio`, each normalized.
pub fn normalized_magnitudes(audio: &AudioBuffer, cfg: &StftConfig) -> Result<Vec<MagnitudeFrame>> {
    Ok(stft(audio, cfg)?
        .iter()
        .map(|f| normalize_frame(&MagnitudeFrame::from_complex(f)))
        .collect())
}
