//! Serves the demo corpus over HTTP.
//!
//!     cargo run --example serve_api -- 8080
//!     curl -s localhost:8080/api/v1/query -d '{"text":"Driving in the snow","top_n":3}' \
//!          -H 'content-type: application/json'

use std::sync::Arc;

use scenario_search::corpus::Source;
use scenario_search::embedding::HashedBagProvider;
use scenario_search::engine::{EngineSettings, Snapshot};
use scenario_search::index::build_index;
use scenario_search::service::{serve_on, AppState};
use scenario_search::synth::SyntheticCorpus;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let port: u16 = std::env::args().nth(1).map(|p| p.parse()).transpose()?.unwrap_or(8080);

    let dir = tempfile::tempdir()?;
    let corpus = SyntheticCorpus::generate();
    corpus.write(dir.path())?;
    let provider = Arc::new(HashedBagProvider::default());
    let video = build_index(&corpus.video_descriptions(4), Source::Video, provider.as_ref())?;
    let signal = build_index(&corpus.signal_descriptions()?, Source::Signal, provider.as_ref())?;
    let snap = Snapshot::new(corpus.catalog(), vec![video], signal, provider, EngineSettings::default())?
        .with_base_dir(dir.path());

    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    log::info!("demo corpus served on http://{}", listener.local_addr()?);
    serve_on(listener, Arc::new(AppState::new(snap))).await?;
    Ok(())
}
