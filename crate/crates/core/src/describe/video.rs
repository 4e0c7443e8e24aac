//! Video description backends.
//!
//! The vision-language model runs out of process. [`RemoteBackend`] speaks
//! a small JSON protocol to it; [`FixtureBackend`] replays stored texts and
//! holds no network client at all.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::prompts::PromptSpec;
use super::DescribeError;
use crate::corpus::{read_descriptions, Description, FrameRef, RecordId, Source};

/// Produces a video description for one record's sampled frames.
pub trait DescriberBackend: Send + Sync {
    fn describe(&self, record: &RecordId, frames: &[FrameRef], prompt: &PromptSpec) -> Result<Description, DescribeError>;
}

/// Runs `backend` after checking the shared preconditions.
pub fn describe_video(
    record: &RecordId,
    frames: &[FrameRef],
    prompt: &PromptSpec,
    backend: &dyn DescriberBackend,
) -> Result<Description, DescribeError> {
    if frames.is_empty() {
        return Err(DescribeError::NoFrames(record.clone()));
    }
    let desc = backend.describe(record, frames, prompt)?;
    if desc.text.trim().is_empty() {
        return Err(DescribeError::EmptyDescription(record.clone()));
    }
    Ok(desc)
}

/// Replays stored descriptions keyed by (record, prompt id).
#[derive(Debug, Clone, Default)]
pub struct FixtureBackend {
    store: HashMap<(RecordId, u8), Description>,
}

impl FixtureBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_descriptions(descriptions: impl IntoIterator<Item = Description>) -> Self {
        let mut backend = Self::new();
        for d in descriptions {
            backend.insert(d);
        }
        backend
    }

    /// Loads a description fixture file; signal entries are ignored.
    pub fn load(path: &Path) -> Result<Self, DescribeError> {
        Ok(Self::from_descriptions(read_descriptions(path)?))
    }

    pub fn insert(&mut self, desc: Description) {
        if let (Source::Video, Some(prompt)) = (desc.source, desc.prompt_id) {
            self.store.insert((desc.record.clone(), prompt), desc);
        }
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }
}

impl DescriberBackend for FixtureBackend {
    fn describe(&self, record: &RecordId, _frames: &[FrameRef], prompt: &PromptSpec) -> Result<Description, DescribeError> {
        self.store
            .get(&(record.clone(), prompt.id))
            .cloned()
            .ok_or_else(|| DescribeError::MissingFixture {
                record: record.clone(),
                prompt: prompt.id,
            })
    }
}

/// How frames are put on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameEncoding {
    /// Send the frame locator as-is.
    #[default]
    Uri,
    /// Read the file and send its bytes base64-encoded.
    Base64,
}

#[derive(Debug, Serialize)]
struct DescribeRequest<'a> {
    frames: Vec<String>,
    turns: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    options: Option<&'a serde_json::Value>,
}

#[derive(Debug, Deserialize)]
struct DescribeReply {
    text: String,
}

/// Client for an external describer: `POST {base}/describe` with
/// `{"frames": [...], "turns": [...]}`, answered by `{"text": ...}`.
/// Multi-run prompts go out as one request carrying every turn; the reply
/// to the final turn is returned verbatim.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    base_url: String,
    generator: String,
    encoding: FrameEncoding,
    /// Decoding settings passed through untouched.
    options: Option<serde_json::Value>,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(base_url: impl Into<String>, generator: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(600)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            generator: generator.into(),
            encoding: FrameEncoding::Uri,
            options: None,
            agent,
        }
    }

    pub fn with_encoding(mut self, encoding: FrameEncoding) -> Self {
        self.encoding = encoding;
        self
    }

    pub fn with_options(mut self, options: serde_json::Value) -> Self {
        self.options = Some(options);
        self
    }

    fn encode_frames(&self, frames: &[FrameRef]) -> Result<Vec<String>, DescribeError> {
        frames
            .iter()
            .map(|f| match self.encoding {
                FrameEncoding::Uri => Ok(f.uri.clone()),
                FrameEncoding::Base64 => {
                    let bytes = std::fs::read(&f.uri)?;
                    Ok(base64::engine::general_purpose::STANDARD.encode(bytes))
                }
            })
            .collect()
    }
}

impl DescriberBackend for RemoteBackend {
    fn describe(&self, record: &RecordId, frames: &[FrameRef], prompt: &PromptSpec) -> Result<Description, DescribeError> {
        let body = DescribeRequest {
            frames: self.encode_frames(frames)?,
            turns: &prompt.turns,
            options: self.options.as_ref(),
        };
        let url = format!("{}/describe", self.base_url);
        let unavailable = |status: Option<u16>, message: String| DescribeError::BackendUnavailable { status, message };
        let mut resp = self
            .agent
            .post(&url)
            .send_json(&body)
            .map_err(|e| unavailable(None, e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let message = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(unavailable(Some(status), message));
        }
        let reply: DescribeReply = resp
            .body_mut()
            .read_json()
            .map_err(|e| unavailable(Some(status), format!("bad reply: {e}")))?;
        if reply.text.trim().is_empty() {
            return Err(DescribeError::EmptyDescription(record.clone()));
        }
        Ok(Description::video(record.clone(), prompt.id, reply.text, self.generator.clone()))
    }
}
