//! Run any mono 44.1 kHz WAV through the encoder and print its 8-value trace.
//!
//! ```bash
//! cargo run -p nmsynth --example encode_wav -- model.bin input.wav
//! ```

use nmsynth::analysis::encoding_timeseries;
use nmsynth::autoencoder::load_weights;
use nmsynth::wav::read_wav;

fn main() -> nmsynth::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [model, input] = args.as_slice() else {
        eprintln!("usage: encode_wav <model.bin> <input.wav>");
        std::process::exit(1);
    };
    let series = encoding_timeseries(&load_weights(model)?, &read_wav(input)?)?;
    print!("{}", series.to_csv());
    Ok(())
}
