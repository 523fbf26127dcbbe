//! Sweep one latent parameter from 0 to 3 over ten seconds with the rest at
//! 1.0, then read the carrier's output back through the encoder to see which
//! encoding dimensions follow.
//!
//! ```bash
//! cargo run -p nmsynth --example param_sweep -- model.bin [param_index] [out_dir]
//! ```

use std::path::PathBuf;

use nmsynth::analysis::{run_param_sweep, SweepConfig};
use nmsynth::autoencoder::{load_weights, AutoencoderModel, LayerSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let model = match args.next() {
        Some(p) => load_weights(p)?,
        None => {
            eprintln!("no weights given, using an untrained network");
            AutoencoderModel::initialize(LayerSpec::default(), 0)
        }
    };
    let sweep = SweepConfig {
        param_index: args.next().map(|s| s.parse()).transpose()?.unwrap_or(3),
        ..SweepConfig::default()
    };
    let out_dir = PathBuf::from(args.next().unwrap_or_else(|| "out".into()));
    std::fs::create_dir_all(&out_dir)?;

    let report = run_param_sweep(&model, &sweep)?;
    std::fs::write(out_dir.join("sweep_modulator.csv"), report.modulator_series.to_csv())?;
    std::fs::write(out_dir.join("sweep_carrier.csv"), report.carrier_series.to_csv())?;

    println!("{} frames; carrier encoding ranges:", report.carrier_series.len());
    for (i, r) in report.column_ranges.iter().enumerate() {
        let marker = if *r > report.threshold { "moving" } else { "" };
        println!("  p{i}: {r:.4} (unswept {:.4}) {marker}", report.jitter_ranges[i]);
    }
    println!("moving dims: {} (threshold {:.4})", report.moving_dims, report.threshold);
    Ok(())
}
