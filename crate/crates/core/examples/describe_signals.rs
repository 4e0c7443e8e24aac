//! Turns aligned signal tables into sentences with the bundled rules.

use scenario_search::describe::SignalInterpreter;
use scenario_search::synth::SyntheticCorpus;

fn main() -> anyhow::Result<()> {
    let corpus = SyntheticCorpus::generate();
    let interp = SignalInterpreter::bundled();
    for table in corpus.unified()?.iter().filter(|t| ["000017", "000028", "000041", "000047"].contains(&t.record.as_str())) {
        let channels: Vec<&str> = table.channels.keys().map(String::as_str).collect();
        println!("{} ({} rows; {})", table.record, table.len(), channels.join(", "));
        println!("  {}\n", interp.describe(table)?.text);
    }
    Ok(())
}
