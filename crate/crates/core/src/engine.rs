//! Query path: embed the query, score it against the video and signal
//! indexes, combine the two similarities, rank, and report reliability
//! metrics over the whole corpus.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusCatalog, CorpusError, Description, FrameRef, RecordId, Source, TimeSpan};
use crate::embedding::{EmbedError, EmbeddingProvider};
use crate::index::{IndexError, VectorIndex};
use crate::ingest::sample_positions;
use crate::metrics::{band, compute_metrics_with, make_series, BandThresholds, MetricsReport, RelevanceBand, VerdictConfig};

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("query text is empty")]
    EmptyText,
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("no record has descriptions in both modalities")]
    EmptyCorpus,
    #[error("no video index for prompt {0:?}")]
    UnknownPrompt(Option<u8>),
    #[error("index fingerprint {found:?} does not match provider {expected:?}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("record {0} not found")]
    NotFound(RecordId),
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error(transparent)]
    Index(IndexError),
    #[error(transparent)]
    Corpus(CorpusError),
    #[error(transparent)]
    Embed(EmbedError),
}

impl From<EmbedError> for QueryError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::EmptyText => QueryError::EmptyText,
            EmbedError::ProviderUnavailable(m) => QueryError::ProviderUnavailable(m),
            other => QueryError::Embed(other),
        }
    }
}

impl From<IndexError> for QueryError {
    fn from(e: IndexError) -> Self {
        match e {
            IndexError::FingerprintMismatch { expected, found } => QueryError::FingerprintMismatch { expected, found },
            other => QueryError::Index(other),
        }
    }
}

impl From<CorpusError> for QueryError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::NotFound(id) => QueryError::NotFound(id),
            other => QueryError::Corpus(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub video: f64,
    pub signal: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { video: 1.0, signal: 1.0 }
    }
}

fn default_top_n() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    #[serde(default = "default_top_n")]
    pub top_n: usize,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default)]
    pub prompt_id: Option<u8>,
}

impl Query {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            top_n: default_top_n(),
            weights: Weights::default(),
            prompt_id: None,
        }
    }

    pub fn top_n(mut self, n: usize) -> Self {
        self.top_n = n;
        self
    }

    pub fn weights(mut self, video: f64, signal: f64) -> Self {
        self.weights = Weights { video, signal };
        self
    }

    pub fn prompt(mut self, id: u8) -> Self {
        self.prompt_id = Some(id);
        self
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        if self.text.trim().is_empty() {
            return Err(QueryError::EmptyText);
        }
        if self.top_n == 0 {
            return Err(QueryError::InvalidQuery("top_n must be at least 1".into()));
        }
        let Weights { video, signal } = self.weights;
        if !(video.is_finite() && signal.is_finite() && video >= 0.0 && signal >= 0.0) {
            return Err(QueryError::InvalidQuery("weights must be finite and non-negative".into()));
        }
        if video + signal <= 0.0 {
            return Err(QueryError::InvalidQuery("weights must not both be zero".into()));
        }
        Ok(())
    }
}

/// What to do with a record that has only one modality indexed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingModality {
    /// Leave the record out and list it under `excluded`.
    #[default]
    Exclude,
    /// Score the missing modality as similarity 0.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineSettings {
    pub thresholds: BandThresholds,
    pub verdict: VerdictConfig,
    pub missing_modality: MissingModality,
    /// Frames attached to each result for display.
    pub display_frames: usize,
    /// Video index used when a query names no prompt.
    pub default_prompt: u8,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self {
            thresholds: BandThresholds::default(),
            verdict: VerdictConfig::default(),
            missing_modality: MissingModality::Exclude,
            display_frames: 4,
            default_prompt: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub record: RecordId,
    pub s_video: f64,
    pub s_signal: f64,
    pub combined: f64,
    pub distance: f64,
    pub band: RelevanceBand,
    pub frames: Vec<FrameRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub record: RecordId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub query: String,
    pub results: Vec<RankedResult>,
    /// Computed over every included record, not only the top results.
    pub metrics: MetricsReport,
    /// Ascending distances of every included record.
    pub curve: Vec<f64>,
    pub excluded: Vec<Exclusion>,
}

/// Scores `q` against both indexes. The candidate set is the union of the
/// records in either index.
pub fn run_query(
    q: &Query,
    video_index: &VectorIndex,
    signal_index: &VectorIndex,
    provider: &dyn EmbeddingProvider,
    settings: &EngineSettings,
) -> Result<QueryResponse, QueryError> {
    let universe: BTreeSet<RecordId> = video_index.ids().chain(signal_index.ids()).cloned().collect();
    rank(q, video_index, signal_index, provider, settings, &universe, true)
}

fn rank(
    q: &Query,
    video_index: &VectorIndex,
    signal_index: &VectorIndex,
    provider: &dyn EmbeddingProvider,
    settings: &EngineSettings,
    universe: &BTreeSet<RecordId>,
    check_fingerprints: bool,
) -> Result<QueryResponse, QueryError> {
    q.validate()?;
    if check_fingerprints {
        video_index.check_fingerprint(provider)?;
        signal_index.check_fingerprint(provider)?;
    }
    if video_index.source() != Source::Video || signal_index.source() != Source::Signal {
        return Err(QueryError::InvalidQuery("indexes passed in the wrong order".into()));
    }
    let qv = provider.embed(&q.text)?;

    let Weights { video: wv, signal: ws } = q.weights;
    let mut scored = Vec::with_capacity(universe.len());
    let mut excluded = Vec::new();
    for id in universe {
        let sv = video_index.similarity(id, &qv)?.map(|s| s.value());
        let ss = signal_index.similarity(id, &qv)?.map(|s| s.value());
        let (sv, ss) = match (sv, ss, settings.missing_modality) {
            (Some(v), Some(s), _) => (v, s),
            (None, None, _) => {
                excluded.push(Exclusion {
                    record: id.clone(),
                    reason: "no descriptions".into(),
                });
                continue;
            }
            (v, s, MissingModality::Zero) => (v.unwrap_or(0.0), s.unwrap_or(0.0)),
            (v, _, MissingModality::Exclude) => {
                let missing = if v.is_none() { "video" } else { "signal" };
                excluded.push(Exclusion {
                    record: id.clone(),
                    reason: format!("missing {missing} description"),
                });
                continue;
            }
        };
        let combined = (wv * sv + ws * ss) / (wv + ws);
        scored.push(RankedResult {
            record: id.clone(),
            s_video: sv,
            s_signal: ss,
            combined,
            distance: 1.0 - combined,
            band: band(combined, &settings.thresholds),
            frames: Vec::new(),
        });
    }
    if scored.is_empty() {
        return Err(QueryError::EmptyCorpus);
    }
    scored.sort_by(|a, b| b.combined.total_cmp(&a.combined).then_with(|| a.record.cmp(&b.record)));

    let distances: Vec<f64> = scored.iter().map(|r| r.distance).collect();
    let series = make_series(q.text.clone(), &distances).expect("non-empty finite distances");
    let metrics = compute_metrics_with(&series, &settings.thresholds, &settings.verdict);
    scored.truncate(q.top_n);
    Ok(QueryResponse {
        query: q.text.clone(),
        results: scored,
        metrics,
        curve: series.values().to_vec(),
        excluded,
    })
}

/// Everything stored about one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordView {
    pub record_id: RecordId,
    pub span: TimeSpan,
    pub has_video: bool,
    pub frames: Vec<FrameRef>,
    pub descriptions: Vec<Description>,
}

/// An immutable view of catalog plus indexes that queries run against.
pub struct Snapshot {
    catalog: CorpusCatalog,
    video: BTreeMap<Option<u8>, VectorIndex>,
    signal: VectorIndex,
    provider: Arc<dyn EmbeddingProvider>,
    settings: EngineSettings,
    base_dir: PathBuf,
    checked: bool,
}

impl std::fmt::Debug for Snapshot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Snapshot")
            .field("records", &self.catalog.len())
            .field("video_prompts", &self.video.keys().collect::<Vec<_>>())
            .field("provider", &self.provider.fingerprint())
            .finish()
    }
}

impl Snapshot {
    pub fn new(
        catalog: CorpusCatalog,
        video_indexes: Vec<VectorIndex>,
        signal: VectorIndex,
        provider: Arc<dyn EmbeddingProvider>,
        settings: EngineSettings,
    ) -> Result<Self, QueryError> {
        Self::assemble(catalog, video_indexes, signal, provider, settings, true)
    }

    fn assemble(
        catalog: CorpusCatalog,
        video_indexes: Vec<VectorIndex>,
        signal: VectorIndex,
        provider: Arc<dyn EmbeddingProvider>,
        settings: EngineSettings,
        check: bool,
    ) -> Result<Self, QueryError> {
        if signal.source() != Source::Signal {
            return Err(QueryError::InvalidQuery("signal index has video source".into()));
        }
        if check {
            signal.check_fingerprint(provider.as_ref())?;
        }
        let mut video = BTreeMap::new();
        for idx in video_indexes {
            if idx.source() != Source::Video {
                return Err(QueryError::InvalidQuery("video index has signal source".into()));
            }
            if check {
                idx.check_fingerprint(provider.as_ref())?;
            }
            video.insert(idx.prompt_id(), idx);
        }
        Ok(Self {
            catalog,
            video,
            signal,
            provider,
            settings,
            base_dir: PathBuf::from("."),
            checked: check,
        })
    }

    /// Frame URIs that are relative paths resolve against this directory.
    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = dir.into();
        self
    }

    /// Loads a catalog manifest and every `*.ssx.jsonl` index in `index_dir`.
    /// With `force`, indexes built by a different provider are accepted;
    /// their scores are then meaningless unless the vectors are compatible.
    pub fn load(
        catalog_path: &Path,
        index_dir: &Path,
        provider: Arc<dyn EmbeddingProvider>,
        settings: EngineSettings,
        force: bool,
    ) -> Result<Self, QueryError> {
        let catalog = CorpusCatalog::load(catalog_path)?;
        let mut video = Vec::new();
        let mut signal = None;
        let mut paths: Vec<PathBuf> = std::fs::read_dir(index_dir)
            .map_err(|e| QueryError::Index(IndexError::Io(e)))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_str().is_some_and(|s| s.ends_with(".ssx.jsonl")))
            .collect();
        paths.sort();
        for path in paths {
            let idx = VectorIndex::load_for(&path, provider.as_ref(), force)?;
            match idx.source() {
                Source::Video => video.push(idx),
                Source::Signal => signal = Some(idx),
            }
        }
        let signal = signal.ok_or_else(|| {
            QueryError::InvalidQuery(format!("no signal index in {}", index_dir.display()))
        })?;
        let base = catalog_path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut snap = Self::assemble(catalog, video, signal, provider, settings, !force)?;
        snap.base_dir = base;
        Ok(snap)
    }

    pub fn catalog(&self) -> &CorpusCatalog {
        &self.catalog
    }

    pub fn settings(&self) -> &EngineSettings {
        &self.settings
    }

    pub fn provider(&self) -> &dyn EmbeddingProvider {
        self.provider.as_ref()
    }

    pub fn video_prompts(&self) -> Vec<Option<u8>> {
        self.video.keys().copied().collect()
    }

    fn video_index(&self, prompt: Option<u8>) -> Result<&VectorIndex, QueryError> {
        match prompt {
            Some(p) => self.video.get(&Some(p)).ok_or(QueryError::UnknownPrompt(Some(p))),
            None => self
                .video
                .get(&Some(self.settings.default_prompt))
                .or_else(|| self.video.values().next())
                .ok_or(QueryError::UnknownPrompt(None)),
        }
    }

    /// Runs a query over the catalog's records and attaches display frames.
    pub fn query(&self, q: &Query) -> Result<QueryResponse, QueryError> {
        let video = self.video_index(q.prompt_id)?;
        let universe: BTreeSet<RecordId> = self.catalog.ids().cloned().collect();
        let mut resp = rank(q, video, &self.signal, self.provider.as_ref(), &self.settings, &universe, self.checked)?;
        for r in &mut resp.results {
            if let Ok(entry) = self.catalog.lookup(&r.record) {
                r.frames = sample_positions(entry.frames.len(), self.settings.display_frames.max(1))
                    .into_iter()
                    .map(|p| entry.frames[p].clone())
                    .collect();
            }
        }
        Ok(resp)
    }

    pub fn get_record(&self, id: &RecordId) -> Result<RecordView, QueryError> {
        let entry = self.catalog.lookup(id)?;
        let mut descriptions: Vec<Description> = self.video.values().filter_map(|idx| idx.description(id)).collect();
        descriptions.extend(self.signal.description(id));
        Ok(RecordView {
            record_id: id.clone(),
            span: entry.span,
            has_video: entry.has_video(),
            frames: entry.frames.clone(),
            descriptions,
        })
    }

    /// Filesystem path of a frame, resolving relative URIs.
    pub fn frame_path(&self, id: &RecordId, index: u32) -> Result<PathBuf, QueryError> {
        let entry = self.catalog.lookup(id)?;
        let frame = entry.frame(index).ok_or_else(|| QueryError::NotFound(id.clone()))?;
        let uri = frame.uri.strip_prefix("file://").unwrap_or(&frame.uri);
        let path = Path::new(uri);
        Ok(if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        })
    }
}
