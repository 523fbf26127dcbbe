//! Generate the synthetic corpus, train the default autoencoder and save it.
//!
//! ```bash
//! cargo run -p nmsynth --example train_model -- model.bin [epochs]
//! ```

use nmsynth::autoencoder::{
    generate_corpus, loss_csv_path, save_weights, train, CorpusConfig, TrainConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    tracing_subscriber::fmt().with_target(false).init();
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "model.bin".into());
    let epochs = match args.next() {
        Some(e) => e.parse()?,
        None => TrainConfig::default().epochs,
    };

    let corpus = generate_corpus(&CorpusConfig::default())?;
    println!("corpus: {} frames", corpus.len());

    let cfg = TrainConfig { epochs, ..TrainConfig::default() };
    let trained = train(&corpus, &cfg)?;
    for e in &trained.history.epochs {
        println!("epoch {:>3}  train {:.6}  val {:.6}", e.epoch, e.train_mse, e.val_mse);
    }
    println!("trained in {:.1} s", trained.elapsed_s);

    save_weights(&trained.model, &out)?;
    std::fs::write(loss_csv_path(&out), trained.history.to_csv())?;
    println!("wrote {out}");
    Ok(())
}
