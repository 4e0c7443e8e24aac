//! Runs the nine demo scenario queries and prints the top hits with the
//! reliability verdict for each ranking.

use scenario_search::corpus::Source;
use scenario_search::embedding::HashedBagProvider;
use scenario_search::engine::{run_query, EngineSettings, Query};
use scenario_search::index::build_index;
use scenario_search::synth::SyntheticCorpus;

fn main() -> anyhow::Result<()> {
    let corpus = SyntheticCorpus::generate();
    let provider = HashedBagProvider::default();
    let video = build_index(&corpus.video_descriptions(4), Source::Video, &provider)?;
    let signal = build_index(&corpus.signal_descriptions()?, Source::Signal, &provider)?;
    let settings = EngineSettings::default();

    for sc in &corpus.scenarios {
        let r = run_query(&Query::new(sc.query).top_n(3), &video, &signal, &provider, &settings)?;
        println!("{:<5} {}", sc.id, sc.query);
        for (rank, hit) in r.results.iter().enumerate() {
            let mark = if hit.record == sc.target { "*" } else { " " };
            println!(
                "   {}{mark} {}  combined {:.3}  (video {:.3}, signal {:.3})",
                rank + 1,
                hit.record,
                hit.combined,
                hit.s_video,
                hit.s_signal
            );
        }
        let m = &r.metrics;
        let reason = m.reason.map(|r| format!(" ({r:?})")).unwrap_or_default();
        println!(
            "      LGap {:.3}  RLGap {:.1}%  StdDev {:.3}  -> {}{reason}\n",
            m.lgap,
            m.rl_gap,
            m.std_dev,
            m.verdict.as_str()
        );
    }
    Ok(())
}
