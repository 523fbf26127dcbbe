//! Three ways of turning the all-3.0 encoding into sound: decoder only, a
//! carrier re-predicting it, and the same carrier with 50% feedback. Writes
//! one WAV per path and compares their spectrograms.
//!
//! ```bash
//! cargo run -p nmsynth --example network_modulation -- model.bin [out_dir]
//! ```

use std::path::PathBuf;

use nmsynth::analysis::spectrogram;
use nmsynth::autoencoder::{load_weights, AutoencoderModel, LatentVector, LayerSpec};
use nmsynth::dsp::StftConfig;
use nmsynth::netmod::{render_architecture, RenderConfig, SynthArchitecture, SynthNode};
use nmsynth::wav::write_wav;

fn main() -> nmsynth::Result<()> {
    let mut args = std::env::args().skip(1);
    let model = match args.next() {
        Some(p) => load_weights(p)?,
        None => {
            eprintln!("no weights given, using an untrained network");
            AutoencoderModel::initialize(LayerSpec::default(), 0)
        }
    };
    let out_dir = PathBuf::from(args.next().unwrap_or_else(|| "out".into()));
    std::fs::create_dir_all(&out_dir).map_err(|e| nmsynth::Error::Io { path: out_dir.clone(), source: e })?;

    let arch = SynthArchitecture::new(vec![
        SynthNode::modulator("decoder", LatentVector::splat(3.0)),
        SynthNode::carrier("carrier", "decoder", None, 0.0),
        SynthNode::carrier("carrier_fb", "decoder", None, 0.5),
    ])?;
    let t0 = std::time::Instant::now();
    let result = render_architecture(&model, &arch, 2.0, &RenderConfig::default())?;
    println!("rendered in {:.2} s", t0.elapsed().as_secs_f64());

    // The modulator is not a leaf here, so take its audio from the node list.
    let cfg = StftConfig::default();
    let mut named = vec![("decoder".to_string(), result.node("decoder").unwrap().audio.clone())];
    named.extend(result.leaves.iter().cloned());
    let specs = named
        .iter()
        .map(|(id, audio)| {
            write_wav(out_dir.join(format!("{id}.wav")), audio)?;
            spectrogram(audio, &cfg)
        })
        .collect::<nmsynth::Result<Vec<_>>>()?;
    for i in 0..specs.len() {
        for j in i + 1..specs.len() {
            println!(
                "{:>10} vs {:<10} relative L2 {:.4}",
                named[i].0,
                named[j].0,
                specs[i].relative_l2(&specs[j])?
            );
        }
    }
    Ok(())
}
