//! Run the HTTP service in-process. Same as `nmsynth serve`.
//!
//! ```bash
//! cargo run -p nmsynth --example serve -- model.bin [port]
//! curl -s localhost:8080/api/model
//! curl -s localhost:8080/api/render -H 'content-type: application/json' \
//!   -d '{"architecture": {"nodes": [{"id": "m", "mode": "modulator", "latent": [1,1,1,1,1,1,1,1]}]}, "duration_s": 1}'
//! ```

use nmsynth::service::{serve, LoadedModel, ServiceConfig};

#[tokio::main]
async fn main() -> nmsynth::Result<()> {
    tracing_subscriber::fmt().with_target(false).init();
    let mut args = std::env::args().skip(1);
    let model = args.next().map(LoadedModel::load).transpose()?;
    let port = args.next().and_then(|p| p.parse().ok()).unwrap_or(8080);
    serve(model, ServiceConfig::default(), port).await
}
