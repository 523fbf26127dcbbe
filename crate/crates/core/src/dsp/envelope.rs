use serde::{Deserialize, Serialize};

use super::AudioBuffer;
use crate::{Error, Result, SAMPLE_RATE};

/// Amplitude envelope applied to leaf audio.
///
/// The ADSR release is anchored to the end of the buffer: the gain reaches
/// zero on the final sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope {
    Adsr {
        attack_time: f64,
        attack_level: f64,
        decay_time: f64,
        sustain_level: f64,
        release_time: f64,
    },
    ExpDecay {
        tau: f64,
    },
}

impl Envelope {
    /// Checks value ranges that do not depend on the buffer length.
    pub fn validate(&self) -> Result<()> {
        let time = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Argument(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        let level = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Argument(format!("{name} must be in [0, 1], got {v}")))
            }
        };
        match *self {
            Envelope::Adsr {
                attack_time,
                attack_level,
                decay_time,
                sustain_level,
                release_time,
            } => {
                time("attack_time", attack_time)?;
                time("decay_time", decay_time)?;
                time("release_time", release_time)?;
                level("attack_level", attack_level)?;
                level("sustain_level", sustain_level)
            }
            Envelope::ExpDecay { tau } => {
                if tau.is_finite() && tau > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Argument(format!("tau must be finite and > 0, got {tau}")))
                }
            }
        }
    }

    /// Largest gain the envelope can produce.
    pub fn peak_gain(&self) -> f64 {
        match *self {
            Envelope::Adsr {
                attack_level,
                sustain_level,
                ..
            } => attack_level.max(sustain_level),
            Envelope::ExpDecay { .. } => 1.0,
        }
    }

    /// Gain of sample `index` in a buffer of `len` samples.
    fn gain(&self, index: usize, len: usize) -> f64 {
        let sr = SAMPLE_RATE as f64;
        let t = index as f64 / sr;
        match *self {
            Envelope::ExpDecay { tau } => (-t / tau).exp(),
            Envelope::Adsr {
                attack_time,
                attack_level,
                decay_time,
                sustain_level,
                release_time,
            } => {
                let remaining = (len - 1 - index) as f64 / sr;
                if release_time > 0.0 && remaining < release_time {
                    return sustain_level * remaining / release_time;
                }
                if attack_time > 0.0 && t < attack_time {
                    attack_level * t / attack_time
                } else if decay_time > 0.0 && t < attack_time + decay_time {
                    let frac = (t - attack_time) / decay_time;
                    attack_level + (sustain_level - attack_level) * frac
                } else {
                    sustain_level
                }
            }
        }
    }
}

/// Multiplies `audio` by the envelope's gain curve.
pub fn apply_envelope(audio: &AudioBuffer, env: &Envelope) -> Result<AudioBuffer> {
    env.validate()?;
    let len = audio.len();
    if let Envelope::Adsr {
        attack_time,
        decay_time,
        release_time,
        ..
    } = *env
    {
        let total = attack_time + decay_time + release_time;
        let duration = audio.duration_s();
        if total > duration + 1e-9 {
            return Err(Error::Argument(format!(
                "envelope segments total {total} s but the buffer lasts {duration} s"
            )));
        }
    }
    Ok(AudioBuffer::new(
        audio
            .samples()
            .iter()
            .enumerate()
            .map(|(i, s)| s * env.gain(i, len))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(len: usize) -> AudioBuffer {
        AudioBuffer::new(vec![1.0; len])
    }

    #[test]
    fn adsr_boundaries() {
        let env = Envelope::Adsr {
            attack_time: 0.1,
            attack_level: 0.9,
            decay_time: 0.1,
            sustain_level: 0.5,
            release_time: 0.1,
        };
        let out = apply_envelope(&ones(44100), &env).unwrap();
        let s = out.samples();
        assert_eq!(s[0], 0.0);
        assert!((s[4410] - 0.9).abs() < 1e-12);
        assert!((s[2205] - 0.45).abs() < 1e-12);
        assert!((s[8820] - 0.5).abs() < 1e-12);
        assert!((s[20000] - 0.5).abs() < 1e-12);
        assert_eq!(s[44099], 0.0);
        // Halfway through the release.
        let mid = 44099 - 2205;
        assert!((s[mid] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn exp_decay_at_tau() {
        let out = apply_envelope(&ones(44100), &Envelope::ExpDecay { tau: 0.5 }).unwrap();
        assert!((out.samples()[22050] - (-1.0f64).exp()).abs() < 1e-4);
        assert_eq!(out.samples()[0], 1.0);
    }

    #[test]
    fn zero_time_full_sustain_is_identity() {
        let env = Envelope::Adsr {
            attack_time: 0.0,
            attack_level: 1.0,
            decay_time: 0.0,
            sustain_level: 1.0,
            release_time: 0.0,
        };
        let audio = AudioBuffer::new((0..1000).map(|i| (i as f64 * 0.01).sin()).collect());
        assert_eq!(apply_envelope(&audio, &env).unwrap(), audio);
    }

    #[test]
    fn segments_longer_than_buffer_are_rejected() {
        let env = Envelope::Adsr {
            attack_time: 0.5,
            attack_level: 1.0,
            decay_time: 0.5,
            sustain_level: 1.0,
            release_time: 0.5,
        };
        assert!(matches!(apply_envelope(&ones(44100), &env), Err(Error::Argument(_))));
    }

    #[test]
    fn levels_and_times_are_range_checked() {
        let bad_level = Envelope::Adsr {
            attack_time: 0.0,
            attack_level: 1.5,
            decay_time: 0.0,
            sustain_level: 1.0,
            release_time: 0.0,
        };
        assert!(bad_level.validate().is_err());
        assert!(Envelope::ExpDecay { tau: 0.0 }.validate().is_err());
        assert!(Envelope::ExpDecay { tau: -1.0 }.validate().is_err());
    }

    #[test]
    fn json_shape() {
        let env: Envelope = serde_json::from_str(
            r#"{"type":"adsr","attack_time":0.1,"attack_level":1.0,"decay_time":0.2,"sustain_level":0.5,"release_time":0.3}"#,
        )
        .unwrap();
        assert!(matches!(env, Envelope::Adsr { decay_time, .. } if decay_time == 0.2));
        let env: Envelope = serde_json::from_str(r#"{"type":"exp_decay","tau":0.5}"#).unwrap();
        assert_eq!(env, Envelope::ExpDecay { tau: 0.5 });
        assert!(serde_json::from_str::<Envelope>(r#"{"type":"exp_decay","tau":0.5,"x":1}"#).is_err());
    }
}
