//! Lists the six describer prompts and replays the stored descriptions of
//! record 000005 through the fixture backend.

use std::path::Path;

use scenario_search::corpus::{FrameRef, RecordId};
use scenario_search::describe::{describe_video, FixtureBackend, PromptCatalog};

fn main() -> anyhow::Result<()> {
    let backend = FixtureBackend::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/record_000005.jsonl"))?;
    let rid = RecordId::new("000005")?;
    let frames = vec![FrameRef {
        record: rid.clone(),
        index: 0,
        timestamp: 0.0,
        uri: "0000.png".into(),
    }];
    for prompt in &PromptCatalog::bundled().prompts {
        let text = prompt.text();
        let kind = if prompt.multi_run { format!("multi-run, {} turns", prompt.turns.len()) } else { "single".into() };
        println!("prompt {} ({kind}): {}...", prompt.id, &text[..text.len().min(70)]);
        let d = describe_video(&rid, &frames, prompt, &backend)?;
        println!("  -> {}...\n", &d.text[..d.text.len().min(90)]);
    }
    Ok(())
}
