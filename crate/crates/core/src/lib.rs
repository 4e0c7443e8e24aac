//! Natural-language retrieval of driving scenarios from vehicle test-drive
//! logs.
//!
//! A record pairs a camera frame sequence with three signal tables. The
//! pipeline aligns the tables ([`ingest`]), turns each modality into text
//! ([`describe`]), embeds that text ([`embedding`]) into per-modality
//! indexes ([`index`]) and ranks records against a query ([`engine`]).
//! [`metrics`] scores how trustworthy a ranking is from the shape of its
//! distance curve. [`service`] exposes the query path over HTTP.

pub mod config;
pub mod corpus;
pub mod describe;
pub mod embedding;
pub mod engine;
pub mod index;
pub mod ingest;
pub mod metrics;
pub mod service;
pub mod synth;

pub use corpus::{CatalogEntry, CorpusCatalog, CorpusError, Description, FrameRef, RecordId, SignalKind, SignalTable, Source, TimeSpan};
pub use embedding::{cosine, EmbeddingProvider, EmbeddingVector, HashedBagProvider, RemoteProvider, SimilarityScore};
pub use engine::{run_query, EngineSettings, MissingModality, Query, QueryError, QueryResponse, RankedResult, Snapshot, Weights};
pub use index::{build_index, VectorIndex};
pub use metrics::{compute_metrics, make_series, BandThresholds, DistanceSeries, MetricsReport, Verdict};
