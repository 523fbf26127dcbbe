//! A predictive-feedback node fed by a modulator: each frame the network
//! predicts its own buffer, and the first few reconstructed samples are
//! rotated back in. Prints how far successive frames drift apart.
//!
//! ```bash
//! cargo run -p nmsynth --example predictive_feedback -- model.bin [rotation] [out_dir]
//! ```

use std::path::PathBuf;

use nmsynth::autoencoder::{load_weights, AutoencoderModel, LatentVector, LayerSpec};
use nmsynth::dsp::{griffin_lim, DEFAULT_GRIFFIN_LIM_ITERATIONS};
use nmsynth::netmod::{render_modulator, render_predictive_feedback, ParamTrack, RenderConfig};
use nmsynth::wav::write_wav;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let model = match args.next() {
        Some(p) => load_weights(p)?,
        None => {
            eprintln!("no weights given, using an untrained network");
            AutoencoderModel::initialize(LayerSpec::default(), 0)
        }
    };
    let mut cfg = RenderConfig::default();
    if let Some(r) = args.next() {
        cfg.rotation = r.parse()?;
    }
    let out_dir = PathBuf::from(args.next().unwrap_or_else(|| "out".into()));
    std::fs::create_dir_all(&out_dir)?;

    let first = render_modulator(&model, &ParamTrack::from(LatentVector::splat(1.0)), 1)?;
    let seed = griffin_lim(&first, &cfg.stft, cfg.predictive_iterations)?;
    let frames = render_predictive_feedback(&model, &seed, 200, &cfg)?;

    for t in (1..frames.len()).step_by(20) {
        let step = frames[t].distance_sq(&frames[t - 1]).sqrt();
        let from_start = frames[t].distance_sq(&frames[0]).sqrt();
        println!("frame {t:>3}: step {step:.3e}, from frame 0 {from_start:.3e}");
    }
    let audio = griffin_lim(&frames, &cfg.stft, DEFAULT_GRIFFIN_LIM_ITERATIONS)?;
    write_wav(out_dir.join("predictive_feedback.wav"), &audio)?;
    println!("wrote {:.2} s to {}", audio.duration_s(), out_dir.display());
    Ok(())
}
