//! Griffin-Lim phase reconstruction.

use super::{AudioBuffer, Complex64, ComplexFrame, MagnitudeFrame, Stft, StftConfig};
use crate::{Error, Result};

pub const DEFAULT_GRIFFIN_LIM_ITERATIONS: usize = 32;

/// Recovers a signal whose STFT magnitudes approximate `mags`.
///
/// Starts from zero phase. Each iteration resynthesizes, re-analyzes, and
/// keeps only the phase of the result under the target magnitudes. With
/// `iterations == 0` this is the ISTFT of the zero-phase frames.
pub fn griffin_lim(
    mags: &[MagnitudeFrame],
    cfg: &StftConfig,
    iterations: usize,
) -> Result<AudioBuffer> {
    if mags.is_empty() {
        return Err(Error::Argument("griffin_lim needs at least one frame".into()));
    }
    if let Some(bad) = mags.iter().find(|m| m.len() != cfg.bins()) {
        return Err(Error::Shape {
            what: "magnitude frame",
            expected: cfg.bins(),
            got: bad.len(),
        });
    }
    let stft = Stft::new(cfg);
    let targets: Vec<Vec<f64>> = mags
        .iter()
        .map(|m| m.bins().iter().map(|&b| b as f64).collect())
        .collect();
    let mut frames: Vec<ComplexFrame> = targets
        .iter()
        .map(|t| t.iter().map(|&m| Complex64::new(m, 0.0)).collect())
        .collect();

    for _ in 0..iterations {
        let audio = stft.synthesize(&frames)?;
        let estimate = stft.analyze(&audio);
        debug_assert_eq!(estimate.len(), frames.len());
        for ((frame, est), target) in frames.iter_mut().zip(&estimate).zip(&targets) {
            for ((bin, e), &m) in frame.iter_mut().zip(est).zip(target) {
                let norm = e.norm();
                *bin = if norm > 0.0 {
                    e * (m / norm)
                } else {
                    Complex64::new(m, 0.0)
                };
            }
        }
    }
    Ok(AudioBuffer::new(stft.synthesize(&frames)?))
}

/// `‖ |STFT(audio)| − mags ‖ / ‖mags‖` over the first `mags.len()` frames.
pub fn spectral_convergence(
    audio: &AudioBuffer,
    mags: &[MagnitudeFrame],
    cfg: &StftConfig,
) -> Result<f64> {
    let estimate = super::stft(audio, cfg)?;
    let (mut diff, mut total) = (0.0, 0.0);
    for (est, target) in estimate.iter().zip(mags) {
        for (e, &m) in est.iter().zip(target.bins()) {
            let m = m as f64;
            diff += (e.norm() - m).powi(2);
            total += m * m;
        }
    }
    if total == 0.0 {
        return Ok(if diff == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((diff / total).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{istft, stft};

    fn tone(len: usize) -> AudioBuffer {
        let sr = 44100.0;
        AudioBuffer::new(
            (0..len)
                .map(|i| {
                    let t = i as f64 / sr;
                    0.5 * (2.0 * std::f64::consts::PI * 220.0 * t).sin()
                        + 0.25 * (2.0 * std::f64::consts::PI * 660.0 * t + 0.3).sin()
                })
                .collect(),
        )
    }

    fn mags_of(audio: &AudioBuffer, cfg: &StftConfig) -> Vec<MagnitudeFrame> {
        stft(audio, cfg)
            .unwrap()
            .iter()
            .map(|f| MagnitudeFrame::from_complex(f))
            .collect()
    }

    #[test]
    fn iterations_reduce_spectral_convergence() {
        let cfg = StftConfig::default();
        let mags = mags_of(&tone(44100), &cfg);
        let e0 = spectral_convergence(&griffin_lim(&mags, &cfg, 0).unwrap(), &mags, &cfg).unwrap();
        let e32 =
            spectral_convergence(&griffin_lim(&mags, &cfg, 32).unwrap(), &mags, &cfg).unwrap();
        assert!(e32 < e0, "{e32} !< {e0}");
    }

    #[test]
    fn zero_magnitudes_give_silence() {
        let cfg = StftConfig::default();
        let out = griffin_lim(&vec![MagnitudeFrame::zeros(2049); 4], &cfg, 8).unwrap();
        assert_eq!(out.len(), cfg.istft_len(4));
        assert!(out.samples().iter().all(|s| *s == 0.0));
    }

    #[test]
    fn zero_iterations_is_istft_of_zero_phase() {
        let cfg = StftConfig::default();
        let mags = mags_of(&tone(4096), &cfg);
        let zero_phase: Vec<ComplexFrame> = mags
            .iter()
            .map(|m| m.bins().iter().map(|&b| Complex64::new(b as f64, 0.0)).collect())
            .collect();
        let expected = istft(&zero_phase, &cfg).unwrap();
        let got = griffin_lim(&mags, &cfg, 0).unwrap();
        let bits = |a: &AudioBuffer| a.samples().iter().map(|s| s.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&got), bits(&expected));
    }

    #[test]
    fn deterministic() {
        let cfg = StftConfig::default();
        let mags = mags_of(&tone(20000), &cfg);
        assert_eq!(
            griffin_lim(&mags, &cfg, 5).unwrap(),
            griffin_lim(&mags, &cfg, 5).unwrap()
        );
    }

    #[test]
    fn wrong_bin_count_is_a_shape_error() {
        let cfg = StftConfig::default();
        assert!(matches!(
            griffin_lim(&[MagnitudeFrame::zeros(100)], &cfg, 1),
            Err(Error::Shape { .. })
        ));
    }
}
