//! Leaf post-processing on its own: shift a sine by an octave each way and
//! shape it with the two envelope kinds.
//!
//! ```bash
//! cargo run -p nmsynth --example pitch_and_envelope -- [out_dir]
//! ```

use std::f64::consts::TAU;
use std::path::PathBuf;

use nmsynth::analysis::spectrogram;
use nmsynth::dsp::{apply_envelope, pitch_shift, AudioBuffer, Envelope, StftConfig};
use nmsynth::wav::write_wav;

fn peak_hz(audio: &AudioBuffer) -> nmsynth::Result<f64> {
    let s = spectrogram(audio, &StftConfig::default())?;
    let mid = &s.db[s.frames() / 2];
    let k = (0..mid.len()).max_by(|&a, &b| mid[a].total_cmp(&mid[b])).unwrap();
    Ok(s.frequencies_hz[k])
}

fn main() -> nmsynth::Result<()> {
    let out_dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out".into()));
    std::fs::create_dir_all(&out_dir).map_err(|e| nmsynth::Error::Io { path: out_dir.clone(), source: e })?;

    let sine = AudioBuffer::new(
        (0..2 * 44_100)
            .map(|n| 0.5 * (TAU * 440.0 * n as f64 / 44_100.0).sin())
            .collect(),
    );
    println!("input peak: {:.1} Hz", peak_hz(&sine)?);
    for semitones in [12.0, -12.0, 7.0] {
        let shifted = pitch_shift(&sine, semitones)?;
        println!("{semitones:+} semitones -> {:.1} Hz", peak_hz(&shifted)?);
        write_wav(out_dir.join(format!("sine_{semitones:+}.wav")), &shifted)?;
    }

    let adsr = Envelope::Adsr {
        attack_time: 0.05,
        attack_level: 1.0,
        decay_time: 0.2,
        sustain_level: 0.6,
        release_time: 0.5,
    };
    let pluck = Envelope::ExpDecay { tau: 0.3 };
    for (name, env) in [("adsr", adsr), ("exp_decay", pluck)] {
        let shaped = apply_envelope(&sine, &env)?;
        let at = |s: f64| shaped.samples()[(s * 44_100.0) as usize].abs();
        println!("{name}: |x| at 0.1 s {:.3}, 1.0 s {:.3}, last {:.3}", at(0.1), at(1.0), shaped.samples().last().unwrap().abs());
        write_wav(out_dir.join(format!("sine_{name}.wav")), &shaped)?;
    }
    Ok(())
}
