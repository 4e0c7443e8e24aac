//! Demo corpus on disk: 50 synthetic records plus 000051, which has signals
//! but no video. Video indexes exist for prompts 1 and 4.

use std::path::PathBuf;
use std::sync::Arc;

use scenario_search::corpus::{Description, RecordId, Source, TimeSpan};
use scenario_search::embedding::HashedBagProvider;
use scenario_search::engine::{EngineSettings, Snapshot};
use scenario_search::index::{build_index, index_file_name};
use scenario_search::synth::SyntheticCorpus;

#[allow(dead_code)]
pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub corpus: SyntheticCorpus,
}

impl Fixture {
    pub fn catalog_path(&self) -> PathBuf {
        self.dir.path().join("catalog.jsonl")
    }

    pub fn index_dir(&self) -> PathBuf {
        self.dir.path().join("index")
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot::load(
            &self.catalog_path(),
            &self.index_dir(),
            Arc::new(HashedBagProvider::default()),
            EngineSettings::default(),
            false,
        )
        .unwrap()
    }
}

pub fn video_less() -> RecordId {
    RecordId::from_number(51)
}

pub fn build() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let corpus = SyntheticCorpus::generate();
    corpus.write(dir.path()).unwrap();

    let mut catalog = corpus.catalog();
    catalog.add(video_less(), TimeSpan::new(0.0, 20.0).unwrap(), Vec::new()).unwrap();
    catalog.save(&dir.path().join("catalog.jsonl")).unwrap();

    let provider = HashedBagProvider::default();
    let idx_dir = dir.path().join("index");
    std::fs::create_dir_all(&idx_dir).unwrap();
    for prompt in [1, 4] {
        let idx = build_index(&corpus.video_descriptions(prompt), Source::Video, &provider).unwrap();
        idx.save(&idx_dir.join(index_file_name(Source::Video, Some(prompt)))).unwrap();
    }
    let mut signal = corpus.signal_descriptions().unwrap();
    signal.push(Description::signal(video_less(), "The vehicle is driving in Denmark.", "signal-interpreter"));
    let idx = build_index(&signal, Source::Signal, &provider).unwrap();
    idx.save(&idx_dir.join(index_file_name(Source::Signal, None))).unwrap();
    Fixture { dir, corpus }
}
