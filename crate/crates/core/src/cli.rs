//! Command line. Exit codes: 0 success, 1 invalid input, 2 filesystem or
//! network failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis::{run_param_sweep, spectrogram, SweepConfig};
use crate::autoencoder::{
    generate_corpus, load_weights, loss_csv_path, save_weights, train, CorpusConfig, TrainConfig,
};
use crate::dsp::StftConfig;
use crate::netmod::{render_architecture, ArchitectureSpec, RenderConfig};
use crate::service::{LoadedModel, ServiceConfig};
use crate::wav::{read_wav, write_wav};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "nmsynth", version, about = "Network-modulation synthesis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic corpus, train the autoencoder, write weights
    /// and `<out>.loss.csv`.
    Train {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = TrainConfig::default().epochs)]
        epochs: usize,
        #[arg(long, default_value_t = TrainConfig::default().seed)]
        seed: u64,
        /// JSON object overriding corpus settings.
        #[arg(long)]
        corpus_config: Option<PathBuf>,
    },
    /// Render an architecture spec, writing `<node_id>.wav` per leaf.
    Render {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Sweep one latent parameter through modulator -> carrier and record the
    /// carrier's encoding.
    Sweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = SweepConfig::default().param_index)]
        param_index: usize,
        #[arg(long, default_value_t = SweepConfig::default().from, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, default_value_t = SweepConfig::default().to, allow_negative_numbers = true)]
        to: f64,
        #[arg(long, default_value_t = SweepConfig::default().seconds)]
        seconds: f64,
        #[arg(long, default_value_t = SweepConfig::default().others, allow_negative_numbers = true)]
        others: f64,
        /// Base path; writes `<stem>.modulator.csv` and `<stem>.carrier.csv`.
        #[arg(long)]
        out_csv: PathBuf,
    },
    /// dB spectrogram of a WAV file as CSV.
    Spectrogram {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out_csv: PathBuf,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = crate::service::DEFAULT_MAX_DURATION_S)]
        max_duration_s: f64,
        #[arg(long, default_value_t = crate::service::DEFAULT_MAX_CONCURRENT_RENDERS)]
        max_concurrent_renders: usize,
        /// Directory of static files (the browser UI) served at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `dir/name.csv` → `dir/name.<suffix>.csv`.
fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

/// Paths the `sweep` command writes for `--out-csv path`.
pub fn sweep_csv_paths(out_csv: &Path) -> (PathBuf, PathBuf) {
    (with_suffix(out_csv, "modulator"), with_suffix(out_csv, "carrier"))
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train {
            out,
            epochs,
            seed,
            corpus_config,
        } => {
            let cfg = TrainConfig {
                epochs,
                seed,
                ..TrainConfig::default()
            };
            cfg.validate()?;
            let corpus_cfg = match corpus_config {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    serde_json::from_str::<CorpusConfig>(&text).map_err(|e| {
                        Error::Config(format!("{}: {e}", p.display()))
                    })?
                }
                None => CorpusConfig::default(),
            };
            let corpus = generate_corpus(&corpus_cfg)?;
            println!("corpus: {} frames", corpus.len());
            let trained = train(&corpus, &cfg)?;
            for e in &trained.history.epochs {
                println!("epoch {:>3}  train {:.6e}  val {:.6e}", e.epoch, e.train_mse, e.val_mse);
            }
            save_weights(&trained.model, &out)?;
            write_text(&loss_csv_path(&out), &trained.history.to_csv())?;
            println!("wrote {} in {:.1} s", out.display(), trained.elapsed_s);
        }
        Command::Render {
            model,
            spec,
            out_dir,
        } => {
            let text = std::fs::read_to_string(&spec).map_err(|e| Error::io(&spec, e))?;
            let spec = ArchitectureSpec::from_json(&text)?;
            let arch = spec.to_architecture()?;
            let model = load_weights(&model)?;
            let result = render_architecture(&model, &arch, spec.duration_s, &RenderConfig::default())?;
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            for (id, audio) in &result.leaves {
                let path = out_dir.join(format!("{id}.wav"));
                write_wav(&path, audio)?;
                println!("{id}\t{:.6} s\t{}", audio.duration_s(), path.display());
            }
        }
        Command::Sweep {
            model,
            param_index,
            from,
            to,
            seconds,
            others,
            out_csv,
        } => {
            let sweep = SweepConfig {
                param_index,
                from,
                to,
                seconds,
                others,
            };
            sweep.validate()?;
            let model = load_weights(&model)?;
            let report = run_param_sweep(&model, &sweep)?;
            let (mod_path, car_path) = sweep_csv_paths(&out_csv);
            write_text(&mod_path, &report.modulator_series.to_csv())?;
            write_text(&car_path, &report.carrier_series.to_csv())?;
            let fmt = |xs: &[f64]| xs.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(", ");
            println!("column ranges: [{}]", fmt(&report.column_ranges));
            println!("unswept ranges: [{}]", fmt(&report.jitter_ranges));
            println!("moving_dims: {}", report.moving_dims);
        }
        Command::Spectrogram { input, out_csv } => {
            let audio = read_wav(&input)?;
            if audio.is_empty() {
                return Err(Error::Wav(format!("{} holds no samples", input.display())));
            }
            let s = spectrogram(&audio, &StftConfig::default())?;
            write_text(&out_csv, &s.to_csv())?;
            println!("{} frames x {} bins", s.frames(), s.bins());
        }
        Command::Serve {
            model,
            port,
            max_duration_s,
            max_concurrent_renders,
            static_dir,
        } => {
            if !(max_duration_s > 0.0) || max_concurrent_renders == 0 {
                return Err(Error::Argument(
                    "max-duration-s and max-concurrent-renders must be positive".into(),
                ));
            }
            let loaded = match model {
                Some(p) => Some(LoadedModel::load(p)?),
                None => {
                    tracing::warn!("no --model given; render and encode will answer 503");
                    None
                }
            };
            let cfg = ServiceConfig {
                max_duration_s,
                max_concurrent_renders,
                static_dir,
            };
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io("tokio runtime", e))?;
            runtime.block_on(crate::service::serve(loaded, cfg, port))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_paths() {
        let (m, c) = sweep_csv_paths(Path::new("out/fig6.csv"));
        assert_eq!(m, PathBuf::from("out/fig6.modulator.csv"));
        assert_eq!(c, PathBuf::from("out/fig6.carrier.csv"));
    }

    #[test]
    fn parse_defaults() {
        let cli = Cli::try_parse_from(["nmsynth", "sweep", "--model", "m.bin", "--out-csv", "s.csv"]).unwrap();
        match cli.command {
            Command::Sweep {
                param_index,
                from,
                to,
                seconds,
                others,
                ..
            } => assert_eq!((param_index, from, to, seconds, others), (3, 0.0, 3.0, 10.0, 1.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["nmsynth", "train", "--out", "/tmp/x.bin", "--epochs", "0"]), 1);
        assert_eq!(run(["nmsynth", "bogus"]), 1);
        assert_eq!(
            run(["nmsynth", "spectrogram", "--in", "/nonexistent/a.wav", "--out-csv", "/tmp/s.csv"]),
            2
        );
    }
}
