//! Synthetic training corpus: additive-synthesis tones over a five-octave
//! C-major scale, one set per timbre, cut into normalized magnitude frames.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{normalize_frame, AudioBuffer, MagnitudeFrame, Stft, StftConfig, SILENCE_THRESHOLD};
use crate::{Error, Result, SAMPLE_RATE};

/// Highest partial frequency rendered.
const PARTIAL_CEILING_HZ: f64 = 20_000.0;

/// Harmonic recipe of a corpus tone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Timbre {
    /// Every harmonic at 1/n.
    Saw,
    /// Odd harmonics at 1/n.
    Square,
    /// Odd harmonics at 1/n².
    Triangle,
    /// Every harmonic at 1/n².
    DarkSaw,
    /// Odd harmonics at 1/n^1.5.
    DarkSquare,
    /// Two saws detuned by ±8 cents.
    DetunedSaw,
    /// Two squares detuned by ±8 cents.
    DetunedSquare,
    /// 25% pulse: |sin(πn/4)| / n.
    Pulse,
}

impl Timbre {
    pub const ALL: [Timbre; 8] = [
        Timbre::Saw,
        Timbre::Square,
        Timbre::Triangle,
        Timbre::DarkSaw,
        Timbre::DarkSquare,
        Timbre::DetunedSaw,
        Timbre::DetunedSquare,
        Timbre::Pulse,
    ];

    fn amplitude(self, n: usize) -> f64 {
        let nf = n as f64;
        let odd = n % 2 == 1;
        match self {
            Timbre::Saw | Timbre::DetunedSaw => 1.0 / nf,
            Timbre::Square | Timbre::DetunedSquare => {
                if odd {
                    1.0 / nf
                } else {
                    0.0
                }
            }
            Timbre::Triangle => {
                if odd {
                    1.0 / (nf * nf)
                } else {
                    0.0
                }
            }
            Timbre::DarkSaw => 1.0 / (nf * nf),
            Timbre::DarkSquare => {
                if odd {
                    nf.powf(-1.5)
                } else {
                    0.0
                }
            }
            Timbre::Pulse => (PI * nf * 0.25).sin().abs() / nf,
        }
    }

    fn detune_cents(self) -> &'static [f64] {
        match self {
            Timbre::DetunedSaw | Timbre::DetunedSquare => &[-8.0, 8.0],
            _ => &[0.0],
        }
    }
}

/// Corpus recipe. Every field has a default, so a partial JSON object is a
/// valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// Fundamentals in Hz.
    pub scale_notes: Vec<f64>,
    pub timbres: Vec<Timbre>,
    /// Seconds per rendered note.
    pub note_duration: f64,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            scale_notes: c_major_scale(2, 5),
            timbres: Timbre::ALL.to_vec(),
            note_duration: 1.0,
            seed: 0,
        }
    }
}

/// C-major fundamentals from C of `first_octave` through B of
/// `first_octave + octaves - 1`.
pub fn c_major_scale(first_octave: i32, octaves: i32) -> Vec<f64> {
    const STEPS: [i32; 7] = [0, 2, 4, 5, 7, 9, 11];
    (first_octave..first_octave + octaves)
        .flat_map(|oct| STEPS.iter().map(move |s| 12 * (oct + 1) + s))
        .map(|midi| 440.0 * 2f64.powf((midi - 69) as f64 / 12.0))
        .collect()
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        let nyquist = SAMPLE_RATE as f64 / 2.0;
        if self.scale_notes.is_empty() || self.timbres.is_empty() {
            return Err(Error::Config("corpus needs at least one note and one timbre".into()));
        }
        if let Some(f) = self
            .scale_notes
            .iter()
            .find(|f| !(f.is_finite() && **f > 0.0 && **f < nyquist / 8.0))
        {
            return Err(Error::Config(format!(
                "fundamental {f} Hz must be in (0, {} Hz)",
                nyquist / 8.0
            )));
        }
        if !(self.note_duration.is_finite() && self.note_duration > 0.0) {
            return Err(Error::Config(format!(
                "note_duration {} must be > 0",
                self.note_duration
            )));
        }
        Ok(())
    }
}

fn render_tone(fundamental: f64, timbre: Timbre, len: usize, rng: &mut ChaCha8Rng) -> AudioBuffer {
    let sr = SAMPLE_RATE as f64;
    let mut out = vec![0.0; len];
    for cents in timbre.detune_cents() {
        let f0 = fundamental * 2f64.powf(cents / 1200.0);
        let partials = (PARTIAL_CEILING_HZ / f0).floor() as usize;
        for n in 1..=partials {
            let amp = timbre.amplitude(n);
            let phase0: f64 = rng.random_range(0.0..2.0 * PI);
            if amp == 0.0 {
                continue;
            }
            // Rotating phasor instead of a sin() per sample.
            let step = 2.0 * PI * f0 * n as f64 / sr;
            let (rot_im, rot_re) = step.sin_cos();
            let (mut im, mut re) = phase0.sin_cos();
            for s in out.iter_mut() {
                *s += amp * im;
                let next_re = re * rot_re - im * rot_im;
                im = re * rot_im + im * rot_re;
                re = next_re;
            }
        }
    }
    let peak = out.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|s| *s *= 0.9 / peak);
    }
    AudioBuffer::new(out)
}

/// Renders every (note, timbre) tone and returns its normalized, non-silent
/// magnitude frames. Deterministic in `cfg.seed`.
pub fn generate_corpus(cfg: &CorpusConfig) -> Result<Vec<MagnitudeFrame>> {
    cfg.validate()?;
    let stft_cfg = StftConfig::default();
    let stft = Stft::new(&stft_cfg);
    let len = (cfg.note_duration * SAMPLE_RATE as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut frames = Vec::new();
    for &note in &cfg.scale_notes {
        for &timbre in &cfg.timbres {
            let tone = render_tone(note, timbre, len.max(1), &mut rng);
            for spectrum in stft.analyze(tone.samples()) {
                let frame = MagnitudeFrame::from_complex(&spectrum);
                if frame.max() > SILENCE_THRESHOLD {
                    frames.push(normalize_frame(&frame));
                }
            }
        }
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scale_spans_c2_to_b6() {
        let notes = c_major_scale(2, 5);
        assert_eq!(notes.len(), 35);
        assert!((notes[0] - 65.406).abs() < 1e-3);
        assert!((notes[34] - 1975.533).abs() < 1e-3);
        assert!(CorpusConfig::default().validate().is_ok());
    }

    #[test]
    fn rejects_fundamentals_too_close_to_nyquist() {
        let cfg = CorpusConfig {
            scale_notes: vec![3000.0],
            ..CorpusConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn small_corpus_is_normalized_and_deterministic() {
        let cfg = CorpusConfig {
            scale_notes: vec![110.0, 440.0],
            timbres: vec![Timbre::Saw, Timbre::DetunedSquare],
            note_duration: 0.5,
            seed: 3,
        };
        let a = generate_corpus(&cfg).unwrap();
        // floor((22050 - 4096) / 1024) + 1 = 18 frames per tone.
        assert_eq!(a.len(), 2 * 2 * 18);
        assert!(a.iter().all(|f| (f.max() - 1.0).abs() <= 1e-6));
        assert_eq!(a, generate_corpus(&cfg).unwrap());
        let other = generate_corpus(&CorpusConfig { seed: 4, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn partial_json_config_uses_defaults() {
        let cfg: CorpusConfig = serde_json::from_str(r#"{"seed": 9, "note_duration": 0.25}"#).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.scale_notes.len(), 35);
        assert!(serde_json::from_str::<CorpusConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
