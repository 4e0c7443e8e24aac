//! Description generation for both modalities.

pub mod interpreter;
pub mod prompts;
pub mod video;

use thiserror::Error;

use crate::corpus::{CorpusError, RecordId};

pub use interpreter::{interpret_signals, GeoRegion, InterpreterRule, RuleKind, SignalInterpreter};
pub use prompts::{get_prompt, PromptCatalog, PromptSpec};
pub use video::{describe_video, DescriberBackend, FixtureBackend, FrameEncoding, RemoteBackend};

#[derive(Debug, Error)]
pub enum DescribeError {
    #[error("unknown prompt id {0} (expected 1-6)")]
    UnknownPrompt(u8),
    #[error("record {0}: no interpreter rule applied")]
    NoRulesApplied(RecordId),
    #[error("record {0}: empty signal table")]
    EmptySignals(RecordId),
    #[error("record {0}: no frames to describe")]
    NoFrames(RecordId),
    #[error("no fixture for record {record} prompt {prompt}")]
    MissingFixture { record: RecordId, prompt: u8 },
    #[error("describer backend unavailable (status {status:?}): {message}")]
    BackendUnavailable { status: Option<u16>, message: String },
    #[error("record {0}: describer returned an empty description")]
    EmptyDescription(RecordId),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
