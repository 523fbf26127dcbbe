//! Pitch shifting by phase-vocoder time stretch followed by resampling.

use std::f64::consts::PI;

use realfft::RealFftPlanner;

use super::{hann_periodic, AudioBuffer, Complex64};
use crate::{Error, Result};

pub const MAX_PITCH_SHIFT_SEMITONES: f64 = 48.0;

const VOCODER_FFT: usize = 2048;
const SYNTHESIS_HOP: usize = VOCODER_FFT / 4;

/// Shifts pitch by `semitones` while keeping the buffer length.
///
/// The signal is stretched by `2^(semitones/12)` with a phase vocoder and then
/// resampled back by the same ratio using linear interpolation; the result is
/// trimmed or zero-padded to the input length.
pub fn pitch_shift(audio: &AudioBuffer, semitones: f64) -> Result<AudioBuffer> {
    if !semitones.is_finite() || semitones.abs() > MAX_PITCH_SHIFT_SEMITONES {
        return Err(Error::Argument(format!(
            "pitch shift of {semitones} semitones is outside ±{MAX_PITCH_SHIFT_SEMITONES}"
        )));
    }
    if semitones == 0.0 || audio.is_empty() {
        return Ok(audio.clone());
    }
    let ratio = 2f64.powf(semitones / 12.0);
    let analysis_hop = ((SYNTHESIS_HOP as f64 / ratio).round() as usize).max(1);

    let pad = VOCODER_FFT;
    let mut padded = vec![0.0; pad];
    padded.extend_from_slice(audio.samples());
    padded.extend(std::iter::repeat_n(0.0, pad));

    let stretched = stretch(&padded, analysis_hop);
    let stretch_factor = SYNTHESIS_HOP as f64 / analysis_hop as f64;
    let offset = pad as f64 * stretch_factor;

    let samples = (0..audio.len())
        .map(|i| sample_linear(&stretched, offset + i as f64 * ratio))
        .collect();
    Ok(AudioBuffer::new(samples))
}

fn sample_linear(signal: &[f64], pos: f64) -> f64 {
    if pos < 0.0 {
        return 0.0;
    }
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    let a = signal.get(i).copied().unwrap_or(0.0);
    let b = signal.get(i + 1).copied().unwrap_or(0.0);
    a + (b - a) * frac
}

// Phase-vocoder time stretch by SYNTHESIS_HOP / analysis_hop.
fn stretch(signal: &[f64], analysis_hop: usize) -> Vec<f64> {
    let n = VOCODER_FFT;
    let bins = n / 2 + 1;
    let window = hann_periodic(n);
    let mut planner = RealFftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);

    let frames = if signal.len() <= n {
        1
    } else {
        (signal.len() - n) / analysis_hop + 1
    };
    let out_len = (frames - 1) * SYNTHESIS_HOP + n;
    let mut out = vec![0.0; out_len];
    let mut norm = vec![0.0; out_len];

    let mut prev_phase = vec![0.0; bins];
    let mut synth_phase = vec![0.0; bins];
    let mut input = forward.make_input_vec();
    let mut spectrum = forward.make_output_vec();
    let mut time = inverse.make_output_vec();

    for t in 0..frames {
        let start = t * analysis_hop;
        for (i, slot) in input.iter_mut().enumerate() {
            *slot = window[i] * signal.get(start + i).copied().unwrap_or(0.0);
        }
        forward
            .process(&mut input, &mut spectrum)
            .expect("forward FFT buffers sized by plan");

        for k in 0..bins {
            let mag = spectrum[k].norm();
            let phase = spectrum[k].arg();
            if t == 0 {
                synth_phase[k] = phase;
            } else {
                let expected = 2.0 * PI * k as f64 * analysis_hop as f64 / n as f64;
                let deviation = wrap_phase(phase - prev_phase[k] - expected);
                let true_freq =
                    2.0 * PI * k as f64 / n as f64 + deviation / analysis_hop as f64;
                synth_phase[k] += true_freq * SYNTHESIS_HOP as f64;
            }
            prev_phase[k] = phase;
            spectrum[k] = Complex64::from_polar(mag, synth_phase[k]);
        }
        spectrum[0].im = 0.0;
        spectrum[bins - 1].im = 0.0;
        inverse
            .process(&mut spectrum, &mut time)
            .expect("inverse FFT buffers sized by plan");

        let out_start = t * SYNTHESIS_HOP;
        for i in 0..n {
            out[out_start + i] += window[i] * time[i] / n as f64;
            norm[out_start + i] += window[i] * window[i];
        }
    }
    for (o, w) in out.iter_mut().zip(&norm) {
        *o = if *w > 1e-10 { *o / w } else { 0.0 };
    }
    out
}

fn wrap_phase(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI);
    y - PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{stft, StftConfig};

    fn sine(freq: f64, len: usize) -> AudioBuffer {
        AudioBuffer::new(
            (0..len)
                .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / 44100.0).sin())
                .collect(),
        )
    }

    // Bin with the most energy summed over all frames.
    fn dominant_bin(audio: &AudioBuffer) -> usize {
        let cfg = StftConfig::default();
        let frames = stft(audio, &cfg).unwrap();
        let mut energy = vec![0.0; cfg.bins()];
        for f in &frames {
            for (e, c) in energy.iter_mut().zip(f) {
                *e += c.norm_sqr();
            }
        }
        (0..energy.len())
            .max_by(|&a, &b| energy[a].total_cmp(&energy[b]))
            .unwrap()
    }

    fn bin_of(freq: f64) -> f64 {
        freq * 4096.0 / 44100.0
    }

    #[test]
    fn zero_semitones_is_identity() {
        let audio = sine(440.0, 10000);
        assert_eq!(pitch_shift(&audio, 0.0).unwrap(), audio);
    }

    #[test]
    fn octave_up_and_down() {
        let up = pitch_shift(&sine(440.0, 44100), 12.0).unwrap();
        assert_eq!(up.len(), 44100);
        assert!((dominant_bin(&up) as f64 - bin_of(880.0)).abs() <= 2.0);

        let down = pitch_shift(&sine(880.0, 44100), -12.0).unwrap();
        assert_eq!(down.len(), 44100);
        assert!((dominant_bin(&down) as f64 - bin_of(440.0)).abs() <= 2.0);
    }

    #[test]
    fn fifth_up() {
        let out = pitch_shift(&sine(440.0, 44100), 7.0).unwrap();
        let target = 440.0 * 2f64.powf(7.0 / 12.0);
        assert!((dominant_bin(&out) as f64 - bin_of(target)).abs() <= 2.0);
    }

    #[test]
    fn extreme_shifts_stay_finite() {
        let audio = sine(440.0, 20000);
        for s in [-48.0, 48.0] {
            let out = pitch_shift(&audio, s).unwrap();
            assert_eq!(out.len(), audio.len());
            assert!(out.samples().iter().all(|x| x.is_finite()));
        }
        assert!(pitch_shift(&audio, 48.5).is_err());
    }
}
