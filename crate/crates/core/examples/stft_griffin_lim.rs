//! Analyze a tone with the STFT, resynthesize it exactly, then throw the phase
//! away and recover audio with Griffin-Lim.
//!
//! ```bash
//! cargo run -p nmsynth --example stft_griffin_lim -- [out_dir]
//! ```

use std::f64::consts::TAU;
use std::path::PathBuf;

use nmsynth::dsp::{
    griffin_lim, istft, spectral_convergence, stft, AudioBuffer, MagnitudeFrame, StftConfig,
};
use nmsynth::wav::write_wav;

fn main() -> nmsynth::Result<()> {
    let out_dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out".into()));
    std::fs::create_dir_all(&out_dir).map_err(|e| nmsynth::Error::Io { path: out_dir.clone(), source: e })?;
    let cfg = StftConfig::default();

    // Two seconds of a decaying 220 Hz tone with a few harmonics.
    let tone: Vec<f64> = (0..2 * 44_100)
        .map(|n| {
            let t = n as f64 / 44_100.0;
            (1..=5)
                .map(|h| (TAU * 220.0 * h as f64 * t).sin() / h as f64)
                .sum::<f64>()
                * (-1.5 * t).exp()
                * 0.4
        })
        .collect();
    let audio = AudioBuffer::new(tone);

    let frames = stft(&audio, &cfg)?;
    let back = istft(&frames, &cfg)?;
    let interior = cfg.fft_size()..back.len() - cfg.fft_size();
    let err = interior
        .clone()
        .map(|i| (back.samples()[i] - audio.samples()[i]).powi(2))
        .sum::<f64>()
        .sqrt()
        / interior.map(|i| audio.samples()[i].powi(2)).sum::<f64>().sqrt();
    println!("{} frames, interior relative round-trip error {err:.2e}", frames.len());

    let mags: Vec<MagnitudeFrame> = frames.iter().map(|f| MagnitudeFrame::from_complex(f)).collect();
    for iterations in [0, 8, 32, 64] {
        let rebuilt = griffin_lim(&mags, &cfg, iterations)?;
        let sc = spectral_convergence(&rebuilt, &mags, &cfg)?;
        println!("griffin-lim {iterations:>2} iterations: spectral convergence {sc:.4}");
        write_wav(out_dir.join(format!("tone_gl{iterations}.wav")), &rebuilt)?;
    }
    write_wav(out_dir.join("tone.wav"), &audio)?;
    println!("wrote WAVs to {}", out_dir.display());
    Ok(())
}
