//! Per-modality vector index and its on-disk format.
//!
//! The file is JSON Lines. A header
//! `{"format":"ssx-1","source":...,"dim":...,"provider_fingerprint":...}`
//! is followed by one `{"record_id","prompt_id","text","vector"}` line per
//! record, in ascending record order. Every line ends with `\n`.

use std::collections::BTreeMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Description, RecordId, Source};
use crate::embedding::{cosine, EmbedError, EmbeddingProvider, EmbeddingVector, SimilarityScore};

pub const FORMAT: &str = "ssx-1";

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("record {0} appears twice")]
    DuplicateEntry(RecordId),
    #[error("description for {record} is {found}, index is {expected}")]
    MixedSource {
        record: RecordId,
        expected: Source,
        found: Source,
    },
    #[error("descriptions mix prompt ids {0:?} and {1:?}")]
    MixedPrompt(Option<u8>, Option<u8>),
    #[error("corrupt index {path}: {message}")]
    CorruptIndex { path: PathBuf, message: String },
    #[error("index fingerprint {found:?} does not match provider {expected:?}")]
    FingerprintMismatch { expected: String, found: String },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub prompt_id: Option<u8>,
    pub text: String,
    pub vector: EmbeddingVector,
}

/// Immutable index of one modality's description vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    source: Source,
    dim: usize,
    provider_fingerprint: String,
    entries: BTreeMap<RecordId, IndexEntry>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    source: Source,
    dim: usize,
    provider_fingerprint: String,
}

#[derive(Serialize, Deserialize)]
struct Line {
    record_id: RecordId,
    prompt_id: Option<u8>,
    text: String,
    vector: Vec<f64>,
}

/// Embeds `descriptions` and builds an index for `source`.
pub fn build_index(
    descriptions: &[Description],
    source: Source,
    provider: &dyn EmbeddingProvider,
) -> Result<VectorIndex, IndexError> {
    let mut prompt: Option<Option<u8>> = None;
    let mut seen = std::collections::HashSet::new();
    for d in descriptions {
        if d.source != source {
            return Err(IndexError::MixedSource {
                record: d.record.clone(),
                expected: source,
                found: d.source,
            });
        }
        match prompt {
            Some(p) if p != d.prompt_id => return Err(IndexError::MixedPrompt(p, d.prompt_id)),
            _ => prompt = Some(d.prompt_id),
        }
        if !seen.insert(&d.record) {
            return Err(IndexError::DuplicateEntry(d.record.clone()));
        }
    }

    let texts: Vec<&str> = descriptions.iter().map(|d| d.text.as_str()).collect();
    let vectors = if texts.is_empty() {
        Vec::new()
    } else {
        provider.embed_batch(&texts)?
    };
    let entries = descriptions
        .iter()
        .zip(vectors)
        .map(|(d, vector)| {
            (
                d.record.clone(),
                IndexEntry {
                    prompt_id: d.prompt_id,
                    text: d.text.clone(),
                    vector,
                },
            )
        })
        .collect();
    Ok(VectorIndex {
        source,
        dim: provider.dim(),
        provider_fingerprint: provider.fingerprint(),
        entries,
    })
}

impl VectorIndex {
    pub fn source(&self) -> Source {
        self.source
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provider_fingerprint(&self) -> &str {
        &self.provider_fingerprint
    }

    /// Prompt id shared by the entries (`None` for signal indexes).
    pub fn prompt_id(&self) -> Option<u8> {
        self.entries.values().next().and_then(|e| e.prompt_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, record: &RecordId) -> Option<&IndexEntry> {
        self.entries.get(record)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RecordId, &IndexEntry)> {
        self.entries.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &RecordId> {
        self.entries.keys()
    }

    /// Stored description, rebuilt from the entry.
    pub fn description(&self, record: &RecordId) -> Option<Description> {
        self.entries.get(record).map(|e| Description {
            record: record.clone(),
            source: self.source,
            prompt_id: e.prompt_id,
            text: e.text.clone(),
            generator: self.provider_fingerprint.clone(),
        })
    }

    /// Cosine similarity of `query` against one record, if indexed.
    pub fn similarity(&self, record: &RecordId, query: &EmbeddingVector) -> Result<Option<SimilarityScore>, EmbedError> {
        self.entries
            .get(record)
            .map(|e| cosine(query, &e.vector))
            .transpose()
    }

    pub fn check_fingerprint(&self, provider: &dyn EmbeddingProvider) -> Result<(), IndexError> {
        let expected = provider.fingerprint();
        if expected == self.provider_fingerprint {
            Ok(())
        } else {
            Err(IndexError::FingerprintMismatch {
                expected,
                found: self.provider_fingerprint.clone(),
            })
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), IndexError> {
        let header = Header {
            format: FORMAT.to_string(),
            source: self.source,
            dim: self.dim,
            provider_fingerprint: self.provider_fingerprint.clone(),
        };
        serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
        for (id, e) in &self.entries {
            let line = Line {
                record_id: id.clone(),
                prompt_id: e.prompt_id,
                text: e.text.clone(),
                vector: e.vector.as_slice().to_vec(),
            };
            serde_json::to_writer(&mut w, &line).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes to a sibling temporary file, then renames over `path`.
    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let tmp = path.with_extension("tmp");
        self.write_to(BufWriter::new(std::fs::File::create(&tmp)?))?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(mut r: R, origin: &Path) -> Result<Self, IndexError> {
        let corrupt = |message: String| IndexError::CorruptIndex {
            path: origin.to_path_buf(),
            message,
        };
        let mut buf = String::new();
        let mut line_no = 0usize;
        let mut next_line = |buf: &mut String| -> Result<bool, IndexError> {
            buf.clear();
            let n = r.read_line(buf)?;
            line_no += 1;
            if n == 0 {
                return Ok(false);
            }
            if !buf.ends_with('\n') {
                return Err(IndexError::CorruptIndex {
                    path: origin.to_path_buf(),
                    message: format!("line {line_no}: truncated (no line terminator)"),
                });
            }
            Ok(true)
        };

        if !next_line(&mut buf)? {
            return Err(corrupt("empty file".into()));
        }
        let header: Header = serde_json::from_str(&buf).map_err(|e| corrupt(format!("header: {e}")))?;
        if header.format != FORMAT {
            return Err(corrupt(format!("unsupported format {:?}", header.format)));
        }

        let mut entries = BTreeMap::new();
        let mut row = 1usize;
        while next_line(&mut buf)? {
            row += 1;
            let line: Line = serde_json::from_str(&buf).map_err(|e| corrupt(format!("line {row}: {e}")))?;
            if line.vector.len() != header.dim {
                return Err(corrupt(format!(
                    "line {row}: vector has {} components, header says {}",
                    line.vector.len(),
                    header.dim
                )));
            }
            let vector = EmbeddingVector::from_unit(line.vector)
                .map_err(|_| corrupt(format!("line {row}: vector is not unit length")))?;
            let entry = IndexEntry {
                prompt_id: line.prompt_id,
                text: line.text,
                vector,
            };
            if entries.insert(line.record_id.clone(), entry).is_some() {
                return Err(corrupt(format!("line {row}: duplicate record {}", line.record_id)));
            }
        }
        Ok(Self {
            source: header.source,
            dim: header.dim,
            provider_fingerprint: header.provider_fingerprint,
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file), path)
    }

    /// Loads and verifies the fingerprint against `provider` unless `force`.
    pub fn load_for(path: &Path, provider: &dyn EmbeddingProvider, force: bool) -> Result<Self, IndexError> {
        let index = Self::load(path)?;
        if !force {
            index.check_fingerprint(provider)?;
        }
        Ok(index)
    }
}

/// Conventional file name inside an index directory.
pub fn index_file_name(source: Source, prompt_id: Option<u8>) -> String {
    match (source, prompt_id) {
        (Source::Video, Some(p)) => format!("video-p{p}.ssx.jsonl"),
        (Source::Video, None) => "video.ssx.jsonl".to_string(),
        (Source::Signal, _) => "signal.ssx.jsonl".to_string(),
    }
}
