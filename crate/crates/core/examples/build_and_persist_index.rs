//! Builds a signal index, saves it, and shows the fingerprint check on reload.

use scenario_search::corpus::Source;
use scenario_search::embedding::{EmbeddingProvider, HashedBagProvider};
use scenario_search::index::{build_index, index_file_name, VectorIndex};
use scenario_search::synth::SyntheticCorpus;

fn main() -> anyhow::Result<()> {
    let corpus = SyntheticCorpus::generate();
    let provider = HashedBagProvider::default();
    let idx = build_index(&corpus.signal_descriptions()?, Source::Signal, &provider)?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join(index_file_name(Source::Signal, None));
    idx.save(&path)?;
    println!("saved {} entries ({} bytes) to {}", idx.len(), std::fs::metadata(&path)?.len(), path.display());
    println!("fingerprint: {}", idx.provider_fingerprint());

    let back = VectorIndex::load_for(&path, &provider, false)?;
    println!("reloaded: identical = {}", back == idx);

    let other = HashedBagProvider::new(128);
    match VectorIndex::load_for(&path, &other, false) {
        Ok(_) => println!("unexpected: {} accepted", other.fingerprint()),
        Err(e) => println!("with {}: {e}", other.fingerprint()),
    }
    Ok(())
}
