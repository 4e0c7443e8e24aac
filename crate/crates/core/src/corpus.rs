//! Shared domain types and the record catalog.
//!
//! A record is one test-drive sequence: an id, three signal tables and a
//! list of camera frames. The [`CorpusCatalog`] binds the frame references
//! and time span of every record under its [`RecordId`]; descriptions and
//! vectors refer back to records through the same id.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid record id {0:?}")]
    InvalidRecordId(String),
    #[error("invalid time span [{start}, {end}]: end must exceed start")]
    InvalidSpan { start: f64, end: f64 },
    #[error("record {0} already present in catalog")]
    DuplicateRecord(RecordId),
    #[error("record {record}: invalid frame {index}: {reason}")]
    InvalidFrame {
        record: RecordId,
        index: u32,
        reason: String,
    },
    #[error("record {0} not found")]
    NotFound(RecordId),
    #[error("invalid signal table: {0}")]
    InvalidTable(String),
    #[error("invalid description: {0}")]
    InvalidDescription(String),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Identifier of one record, kept as a string so zero padding survives.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RecordId(String);

impl RecordId {
    pub fn new(value: impl Into<String>) -> Result<Self, CorpusError> {
        let value = value.into();
        let valid = !value.is_empty()
            && value
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
            && value != "."
            && value != "..";
        if valid {
            Ok(Self(value))
        } else {
            Err(CorpusError::InvalidRecordId(value))
        }
    }

    /// Zero-padded six digit id, the naming used by the sequence dataset.
    pub fn from_number(n: u32) -> Self {
        Self(format!("{n:06}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RecordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for RecordId {
    type Err = CorpusError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl TryFrom<String> for RecordId {
    type Error = CorpusError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<RecordId> for String {
    fn from(id: RecordId) -> Self {
        id.0
    }
}

/// Closed interval of seconds. Whether the clock is epoch-absolute or
/// sequence-relative is a corpus convention; nothing here interprets it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSpan {
    start: f64,
    end: f64,
}

impl TimeSpan {
    pub fn new(start: f64, end: f64) -> Result<Self, CorpusError> {
        if start.is_finite() && end.is_finite() && end > start {
            Ok(Self { start, end })
        } else {
            Err(CorpusError::InvalidSpan { start, end })
        }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Inclusive on both ends.
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRef {
    pub record: RecordId,
    pub index: u32,
    pub timestamp: f64,
    pub uri: String,
}

/// The three signal tables shipped per record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    VehicleData,
    VehicleControlData,
    SatelliteData,
}

impl SignalKind {
    pub const ALL: [SignalKind; 3] = [
        SignalKind::VehicleData,
        SignalKind::VehicleControlData,
        SignalKind::SatelliteData,
    ];

    /// Short prefix used to disambiguate colliding channel names.
    pub fn prefix(self) -> &'static str {
        match self {
            SignalKind::VehicleData => "vd",
            SignalKind::VehicleControlData => "vcd",
            SignalKind::SatelliteData => "sd",
        }
    }

    /// File stem used on disk (`vehicle_data.csv`, ...).
    pub fn file_stem(self) -> &'static str {
        match self {
            SignalKind::VehicleData => "vehicle_data",
            SignalKind::VehicleControlData => "vehicle_control_data",
            SignalKind::SatelliteData => "satellite_data",
        }
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.file_stem())
    }
}

/// Time-stamped numeric channels from one source table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTable {
    kind: SignalKind,
    timestamps: Vec<f64>,
    channels: BTreeMap<String, Vec<f64>>,
}

impl SignalTable {
    pub fn new(
        kind: SignalKind,
        timestamps: Vec<f64>,
        channels: BTreeMap<String, Vec<f64>>,
    ) -> Result<Self, CorpusError> {
        if timestamps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CorpusError::InvalidTable(format!(
                "{kind}: timestamps must be strictly ascending"
            )));
        }
        if let Some((name, _)) = channels.iter().find(|(_, v)| v.len() != timestamps.len()) {
            return Err(CorpusError::InvalidTable(format!(
                "{kind}: channel {name} length differs from timestamp count {}",
                timestamps.len()
            )));
        }
        Ok(Self {
            kind,
            timestamps,
            channels,
        })
    }

    pub fn kind(&self) -> SignalKind {
        self.kind
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn channels(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.channels
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.get(name).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub(crate) fn into_parts(self) -> (SignalKind, Vec<f64>, BTreeMap<String, Vec<f64>>) {
        (self.kind, self.timestamps, self.channels)
    }
}

/// Modality a description or index was produced from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Video,
    Signal,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Video => f.write_str("video"),
            Source::Signal => f.write_str("signal"),
        }
    }
}

impl FromStr for Source {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "video" => Ok(Source::Video),
            "signal" => Ok(Source::Signal),
            other => Err(format!("unknown source {other:?} (expected video|signal)")),
        }
    }
}

/// Natural-language text for one (record, modality), the unit that gets embedded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Description {
    #[serde(rename = "record_id")]
    pub record: RecordId,
    pub source: Source,
    pub prompt_id: Option<u8>,
    pub text: String,
    pub generator: String,
}

impl Description {
    pub fn video(record: RecordId, prompt_id: u8, text: impl Into<String>, generator: impl Into<String>) -> Self {
        Self {
            record,
            source: Source::Video,
            prompt_id: Some(prompt_id),
            text: text.into(),
            generator: generator.into(),
        }
    }

    pub fn signal(record: RecordId, text: impl Into<String>, generator: impl Into<String>) -> Self {
        Self {
            record,
            source: Source::Signal,
            prompt_id: None,
            text: text.into(),
            generator: generator.into(),
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.text.trim().is_empty() {
            return Err(CorpusError::InvalidDescription(format!(
                "{} {}: empty text",
                self.record, self.source
            )));
        }
        match (self.source, self.prompt_id) {
            (Source::Signal, Some(_)) => Err(CorpusError::InvalidDescription(format!(
                "{}: signal descriptions carry no prompt id",
                self.record
            ))),
            (Source::Video, Some(id)) if !(1..=6).contains(&id) => Err(
                CorpusError::InvalidDescription(format!("{}: prompt id {id} out of range", self.record)),
            ),
            _ => Ok(()),
        }
    }
}

/// Reads a description fixture file (JSON Lines).
pub fn read_descriptions(path: &Path) -> Result<Vec<Description>, CorpusError> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let desc: Description = serde_json::from_str(&line).map_err(|e| CorpusError::Manifest {
            line: i + 1,
            message: e.to_string(),
        })?;
        desc.validate()?;
        out.push(desc);
    }
    Ok(out)
}

pub fn write_descriptions(path: &Path, descriptions: &[Description]) -> Result<(), CorpusError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for d in descriptions {
        serde_json::to_writer(&mut w, d).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub span: TimeSpan,
    pub frames: Vec<FrameRef>,
    pub unified_signal_rows: usize,
}

impl CatalogEntry {
    pub fn has_video(&self) -> bool {
        !self.frames.is_empty()
    }

    pub fn has_signals(&self) -> bool {
        self.unified_signal_rows > 0
    }

    pub fn frame(&self, index: u32) -> Option<&FrameRef> {
        self.frames.iter().find(|f| f.index == index)
    }
}

/// Record catalog. Built by a single writer, then shared read-only
/// (typically behind an `Arc`). Iteration is in ascending [`RecordId`] order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusCatalog {
    records: BTreeMap<RecordId, CatalogEntry>,
}

impl CorpusCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a record. Frames must lie inside `span` and carry unique indexes.
    /// An empty frame list is admitted; the entry is then flagged video-less.
    pub fn add(
        &mut self,
        record: RecordId,
        span: TimeSpan,
        frames: Vec<FrameRef>,
    ) -> Result<&CatalogEntry, CorpusError> {
        if self.records.contains_key(&record) {
            return Err(CorpusError::DuplicateRecord(record));
        }
        let mut seen = std::collections::HashSet::with_capacity(frames.len());
        for frame in &frames {
            let reason = if frame.record != record {
                Some(format!("belongs to record {}", frame.record))
            } else if !span.contains(frame.timestamp) {
                Some(format!(
                    "timestamp {} outside span [{}, {}]",
                    frame.timestamp,
                    span.start(),
                    span.end()
                ))
            } else if !seen.insert(frame.index) {
                Some("duplicate frame index".to_string())
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(CorpusError::InvalidFrame {
                    record,
                    index: frame.index,
                    reason,
                });
            }
        }
        let entry = CatalogEntry {
            span,
            frames,
            unified_signal_rows: 0,
        };
        Ok(self.records.entry(record).or_insert(entry))
    }

    pub fn set_signal_rows(&mut self, record: &RecordId, rows: usize) -> Result<(), CorpusError> {
        let entry = self
            .records
            .get_mut(record)
            .ok_or_else(|| CorpusError::NotFound(record.clone()))?;
        entry.unified_signal_rows = rows;
        Ok(())
    }

    pub fn lookup(&self, record: &RecordId) -> Result<&CatalogEntry, CorpusError> {
        self.records
            .get(record)
            .ok_or_else(|| CorpusError::NotFound(record.clone()))
    }

    pub fn contains(&self, record: &RecordId) -> bool {
        self.records.contains_key(record)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RecordId, &CatalogEntry)> {
        self.records.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &RecordId> {
        self.records.keys()
    }

    /// Reads a catalog manifest (one JSON object per line).
    pub fn read_manifest<R: BufRead>(reader: R) -> Result<Self, CorpusError> {
        let mut catalog = Self::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let wrap = |e: CorpusError| CorpusError::Manifest {
                line: i + 1,
                message: e.to_string(),
            };
            let row: ManifestLine = serde_json::from_str(&line).map_err(|e| CorpusError::Manifest {
                line: i + 1,
                message: e.to_string(),
            })?;
            let span = TimeSpan::new(row.start, row.end).map_err(wrap)?;
            let frames = row
                .frames
                .into_iter()
                .map(|f| FrameRef {
                    record: row.record_id.clone(),
                    index: f.index,
                    timestamp: f.timestamp,
                    uri: f.uri,
                })
                .collect();
            catalog.add(row.record_id.clone(), span, frames).map_err(wrap)?;
            if let Some(rows) = row.unified_signal_rows {
                catalog.set_signal_rows(&row.record_id, rows)?;
            }
        }
        Ok(catalog)
    }

    pub fn write_manifest<W: Write>(&self, mut writer: W) -> Result<(), CorpusError> {
        for (id, entry) in &self.records {
            let row = ManifestLine {
                record_id: id.clone(),
                start: entry.span.start(),
                end: entry.span.end(),
                frames: entry
                    .frames
                    .iter()
                    .map(|f| ManifestFrame {
                        index: f.index,
                        timestamp: f.timestamp,
                        uri: f.uri.clone(),
                    })
                    .collect(),
                unified_signal_rows: Some(entry.unified_signal_rows),
            };
            serde_json::to_writer(&mut writer, &row).map_err(std::io::Error::from)?;
            writer.write_all(b"\n")?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let file = std::fs::File::open(path)?;
        Self::read_manifest(std::io::BufReader::new(file))
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let file = std::fs::File::create(path)?;
        self.write_manifest(std::io::BufWriter::new(file))
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestLine {
    record_id: RecordId,
    start: f64,
    end: f64,
    frames: Vec<ManifestFrame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unified_signal_rows: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct ManifestFrame {
    index: u32,
    timestamp: f64,
    uri: String,
}
