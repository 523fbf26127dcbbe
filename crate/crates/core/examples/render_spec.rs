//! Render a JSON architecture spec, one WAV per leaf, plus an encoder trace
//! CSV for each leaf.
//!
//! ```bash
//! cargo run -p nmsynth --example render_spec -- model.bin examples/specs/layered.json [out_dir]
//! ```

use std::path::PathBuf;

use nmsynth::analysis::encoding_timeseries;
use nmsynth::autoencoder::load_weights;
use nmsynth::netmod::{render_architecture, ArchitectureSpec, RenderConfig};
use nmsynth::wav::write_wav;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let (Some(model_path), Some(spec_path)) = (args.next(), args.next()) else {
        eprintln!("usage: render_spec <model.bin> <spec.json> [out_dir]");
        std::process::exit(1);
    };
    let out_dir = PathBuf::from(args.next().unwrap_or_else(|| "out".into()));
    std::fs::create_dir_all(&out_dir)?;

    let spec = ArchitectureSpec::from_json(&std::fs::read_to_string(spec_path)?)?;
    let arch = spec.to_architecture()?;
    let model = load_weights(model_path)?;
    let result = render_architecture(&model, &arch, spec.duration_s, &RenderConfig::default())?;
    for (id, audio) in &result.leaves {
        write_wav(out_dir.join(format!("{id}.wav")), audio)?;
        let trace = encoding_timeseries(&model, audio)?;
        std::fs::write(out_dir.join(format!("{id}.encoding.csv")), trace.to_csv())?;
        println!("{id}: {:.3} s, peak {:.3}", audio.duration_s(), audio.peak());
    }
    Ok(())
}
