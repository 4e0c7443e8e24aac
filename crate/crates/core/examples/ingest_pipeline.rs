//! Writes the demo corpus to a temp dir, ingests it and prints what came out.

use scenario_search::ingest::{ingest_corpus, ChannelFilter};
use scenario_search::synth::SyntheticCorpus;

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    SyntheticCorpus::generate().write(dir.path())?;
    let summary = ingest_corpus(
        &dir.path().join("signals"),
        &dir.path().join("frames"),
        &ChannelFilter::default(),
        &dir.path().join("unified"),
    )?;
    println!("{} records, {} failures", summary.catalog.len(), summary.failures.len());
    for (id, entry) in summary.catalog.iter().take(3) {
        println!(
            "{id}: span {:.1}-{:.1}s, {} frames, {} unified rows",
            entry.span.start(),
            entry.span.end(),
            entry.frames.len(),
            entry.unified_signal_rows
        );
    }
    let first = summary.unified_paths.values().next().expect("at least one table");
    println!("\n{}:", first.display());
    for line in std::fs::read_to_string(first)?.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
