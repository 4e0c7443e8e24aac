//! Signal and video preprocessing.
//!
//! Signal tables arrive at different rates. They are pruned of noise
//! channels, restricted to the video time span, downsampled onto the
//! timestamps of the least frequent table by nearest-timestamp join and
//! concatenated into one [`UnifiedSignalTable`]. Video frames are reduced
//! to a fixed number by endpoint-inclusive uniform sampling.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusCatalog, CorpusError, FrameRef, RecordId, SignalKind, SignalTable, TimeSpan};

/// Frames per video handed to the describer.
pub const DEFAULT_SAMPLE_FRAMES: usize = 32;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("all channels removed from {0} table")]
    EmptyTable(SignalKind),
    #[error("{0} table has no rows inside the time span")]
    EmptySpan(SignalKind),
    #[error("empty frame list")]
    EmptyVideo,
    #[error("sample size must be at least 1")]
    InvalidSampleSize,
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("record {record}: {message}")]
    Record { record: RecordId, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Channel selection applied to each source table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelFilter {
    #[serde(default)]
    pub allowlist: Option<BTreeSet<String>>,
    #[serde(default = "default_true")]
    pub drop_constant: bool,
}

fn default_true() -> bool {
    true
}

impl Default for ChannelFilter {
    fn default() -> Self {
        Self {
            allowlist: None,
            drop_constant: true,
        }
    }
}

impl ChannelFilter {
    pub fn with_allowlist<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            allowlist: Some(names.into_iter().map(Into::into).collect()),
            drop_constant: true,
        }
    }

    /// Reads an allowlist file: one channel name per line, `#` comments allowed.
    pub fn from_allowlist_file(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::with_allowlist(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        ))
    }

    fn keeps(&self, name: &str, values: &[f64]) -> bool {
        if self.drop_constant && is_constant(values) {
            return false;
        }
        self.allowlist.as_ref().is_none_or(|allow| allow.contains(name))
    }
}

fn is_constant(values: &[f64]) -> bool {
    match values.split_first() {
        None => true,
        Some((first, rest)) => rest.iter().all(|v| v.to_bits() == first.to_bits() || v == first),
    }
}

/// Removes constant channels (when enabled), then applies the allowlist.
/// Timestamps are left untouched.
pub fn prune_channels(table: &SignalTable, filter: &ChannelFilter) -> Result<SignalTable, IngestError> {
    let pruned = prune_lenient(table, filter);
    if pruned.channels().is_empty() {
        return Err(IngestError::EmptyTable(table.kind()));
    }
    Ok(pruned)
}

fn prune_lenient(table: &SignalTable, filter: &ChannelFilter) -> SignalTable {
    let channels = table
        .channels()
        .iter()
        .filter(|(name, values)| filter.keeps(name, values))
        .map(|(name, values)| (name.clone(), values.clone()))
        .collect();
    SignalTable::new(table.kind(), table.timestamps().to_vec(), channels)
        .expect("subset of a valid table is valid")
}

/// All three signal tables of one record, aligned onto one time base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnifiedSignalTable {
    pub record: RecordId,
    pub timestamps: Vec<f64>,
    pub channels: BTreeMap<String, Vec<f64>>,
}

impl UnifiedSignalTable {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Looks a channel up by exact name, falling back to a kind-prefixed
    /// variant (`sd.latitude` for `latitude`) when names collided.
    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        if let Some(v) = self.channels.get(name) {
            return Some(v);
        }
        SignalKind::ALL
            .iter()
            .find_map(|k| self.channels.get(&format!("{}.{name}", k.prefix())))
            .map(Vec::as_slice)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), IngestError> {
        let csv_err = |e: csv::Error| IngestError::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.channels.keys().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (row, ts) in self.timestamps.iter().enumerate() {
            let mut rec = vec![ts.to_string()];
            rec.extend(self.channels.values().map(|c| c[row].to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(record: RecordId, path: &Path) -> Result<Self, IngestError> {
        // Reuse the fixture reader; the source kind is irrelevant here.
        let table = read_signal_csv(SignalKind::VehicleData, path)?;
        let (_, timestamps, channels) = table.into_parts();
        Ok(Self {
            record,
            timestamps,
            channels,
        })
    }
}

/// Index range of `timestamps` that falls inside `span` (inclusive).
fn span_rows(timestamps: &[f64], span: &TimeSpan) -> std::ops::Range<usize> {
    let lo = timestamps.partition_point(|&t| t < span.start());
    let hi = timestamps.partition_point(|&t| t <= span.end());
    lo..hi.max(lo)
}

/// Position in `sorted` nearest to `t`; ties go to the earlier row.
fn nearest(sorted: &[f64], t: f64) -> usize {
    let i = sorted.partition_point(|&x| x < t);
    if i == 0 {
        return 0;
    }
    if i == sorted.len() {
        return sorted.len() - 1;
    }
    if (t - sorted[i - 1]) <= (sorted[i] - t) {
        i - 1
    } else {
        i
    }
}

/// Aligns the three source tables onto the least frequent one inside `span`
/// and concatenates their channels.
///
/// The target time base is the table with the fewest rows in span (ties
/// resolved in the order satellite, vehicle, vehicle-control). Every other
/// table contributes, per target timestamp, its nearest in-span row.
pub fn align_and_concat(
    record: RecordId,
    vd: &SignalTable,
    vcd: &SignalTable,
    sd: &SignalTable,
    span: &TimeSpan,
) -> Result<UnifiedSignalTable, IngestError> {
    let tables = [sd, vd, vcd];
    let ranges: Vec<_> = tables
        .iter()
        .map(|t| {
            let r = span_rows(t.timestamps(), span);
            if r.is_empty() {
                Err(IngestError::EmptySpan(t.kind()))
            } else {
                Ok(r)
            }
        })
        .collect::<Result<_, _>>()?;

    let target = (0..tables.len())
        .min_by_key(|&i| ranges[i].len())
        .expect("three tables");
    let target_ts = &tables[target].timestamps()[ranges[target].clone()];

    let mut name_count: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &tables {
        for name in t.channels().keys() {
            *name_count.entry(name.as_str()).or_default() += 1;
        }
    }

    let mut channels = BTreeMap::new();
    for (table, range) in tables.iter().zip(&ranges) {
        let ts = &table.timestamps()[range.clone()];
        let rows: Vec<usize> = target_ts.iter().map(|&t| range.start + nearest(ts, t)).collect();
        for (name, values) in table.channels() {
            let out_name = if name_count[name.as_str()] > 1 {
                format!("{}.{name}", table.kind().prefix())
            } else {
                name.clone()
            };
            channels.insert(out_name, rows.iter().map(|&r| values[r]).collect());
        }
    }

    Ok(UnifiedSignalTable {
        record,
        timestamps: target_ts.to_vec(),
        channels,
    })
}

/// Picks `k` frames uniformly, endpoints included: positions
/// `round(i·(N−1)/(k−1))` for `i = 0..k`. Returns every frame when `N ≤ k`.
pub fn sample_frames(frames: &[FrameRef], k: usize) -> Result<Vec<FrameRef>, IngestError> {
    if k == 0 {
        return Err(IngestError::InvalidSampleSize);
    }
    if frames.is_empty() {
        return Err(IngestError::EmptyVideo);
    }
    Ok(sample_positions(frames.len(), k)
        .into_iter()
        .map(|p| frames[p].clone())
        .collect())
}

/// Positions chosen by [`sample_frames`] for a list of `n` frames.
pub fn sample_positions(n: usize, k: usize) -> Vec<usize> {
    if n <= k {
        return (0..n).collect();
    }
    if k == 1 {
        return vec![0];
    }
    // round-half-up of i*(n-1)/(k-1) in integer arithmetic
    let (num, den) = (n - 1, k - 1);
    (0..k).map(|i| (2 * i * num + den) / (2 * den)).collect()
}

/// Reads a CSV signal table: header row, first column `timestamp`,
/// remaining columns numeric channels.
pub fn read_signal_csv(kind: SignalKind, path: &Path) -> Result<SignalTable, IngestError> {
    let err = |message: String| IngestError::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    if headers.get(0).map(str::trim) != Some("timestamp") {
        return Err(err("first column must be \"timestamp\"".into()));
    }
    let names: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
    let mut timestamps = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let parse = |i: usize| -> Result<f64, IngestError> {
            let field = rec.get(i).unwrap_or("").trim();
            field
                .parse::<f64>()
                .map_err(|_| err(format!("row {}: column {i}: not a number: {field:?}", row + 2)))
        };
        timestamps.push(parse(0)?);
        for (c, col) in columns.iter_mut().enumerate() {
            col.push(parse(c + 1)?);
        }
    }
    let mut channels = BTreeMap::new();
    for (name, col) in names.into_iter().zip(columns) {
        if channels.insert(name.clone(), col).is_some() {
            return Err(err(format!("duplicate column {name:?}")));
        }
    }
    Ok(SignalTable::new(kind, timestamps, channels)?)
}

/// Writes a [`SignalTable`] in the CSV fixture format.
pub fn write_signal_csv(table: &SignalTable, path: &Path) -> Result<(), IngestError> {
    let unified = UnifiedSignalTable {
        record: RecordId::from_number(0),
        timestamps: table.timestamps().to_vec(),
        channels: table.channels().clone(),
    };
    unified.write_csv(path)
}

/// Lists frame references for one record directory.
///
/// Uses `frames.csv` (`index,timestamp,uri`) when present. Otherwise every
/// `.jpg`/`.jpeg`/`.png` file whose stem parses as seconds becomes a frame,
/// indexed in timestamp order.
pub fn read_frame_dir(record: &RecordId, dir: &Path) -> Result<Vec<FrameRef>, IngestError> {
    let listing = dir.join("frames.csv");
    if listing.is_file() {
        let mut reader = csv::Reader::from_path(&listing).map_err(|e| IngestError::Csv {
            path: listing.clone(),
            message: e.to_string(),
        })?;
        #[derive(Deserialize)]
        struct Row {
            index: u32,
            timestamp: f64,
            uri: String,
        }
        let mut frames = Vec::new();
        for row in reader.deserialize::<Row>() {
            let row = row.map_err(|e| IngestError::Csv {
                path: listing.clone(),
                message: e.to_string(),
            })?;
            frames.push(FrameRef {
                record: record.clone(),
                index: row.index,
                timestamp: row.timestamp,
                uri: resolve_uri(dir, &row.uri),
            });
        }
        frames.sort_by_key(|f| f.index);
        return Ok(frames);
    }

    let mut stamped = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "jpg" | "jpeg" | "png"));
        if !is_image {
            continue;
        }
        if let Some(ts) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse::<f64>().ok()) {
            stamped.push((ts, path));
        }
    }
    stamped.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(stamped
        .into_iter()
        .enumerate()
        .map(|(i, (timestamp, path))| FrameRef {
            record: record.clone(),
            index: i as u32,
            timestamp,
            uri: path.to_string_lossy().into_owned(),
        })
        .collect())
}

fn resolve_uri(dir: &Path, uri: &str) -> String {
    if uri.contains("://") || Path::new(uri).is_absolute() {
        uri.to_string()
    } else {
        dir.join(uri).to_string_lossy().into_owned()
    }
}

/// Outcome of ingesting one record directory pair.
#[derive(Debug, Clone)]
pub struct IngestedRecord {
    pub record: RecordId,
    pub span: TimeSpan,
    pub frames: Vec<FrameRef>,
    pub unified: Option<UnifiedSignalTable>,
}

/// Ingests one record: frames give the time span; signal tables are read
/// from `<signals>/<id>/{vehicle_data,vehicle_control_data,satellite_data}.csv`.
///
/// A record without frames takes its span from the overlap of its signal
/// tables; a record without signal files is kept with no unified table.
pub fn ingest_record(
    record: &RecordId,
    signal_dir: Option<&Path>,
    frame_dir: Option<&Path>,
    filter: &ChannelFilter,
) -> Result<IngestedRecord, IngestError> {
    let frames = match frame_dir {
        Some(dir) if dir.is_dir() => read_frame_dir(record, dir)?,
        _ => Vec::new(),
    };
    let tables = match signal_dir {
        Some(dir) if dir.is_dir() => {
            let mut out = Vec::with_capacity(3);
            for kind in SignalKind::ALL {
                let path = dir.join(format!("{}.csv", kind.file_stem()));
                if !path.is_file() {
                    return Err(IngestError::Record {
                        record: record.clone(),
                        message: format!("missing {}", path.display()),
                    });
                }
                out.push(prune_lenient(&read_signal_csv(kind, &path)?, filter));
            }
            Some(out)
        }
        _ => None,
    };

    let span = if let (Some(first), Some(last)) = (frames.first(), frames.last()) {
        let (start, end) = frames
            .iter()
            .fold((first.timestamp, last.timestamp), |(lo, hi), f| (lo.min(f.timestamp), hi.max(f.timestamp)));
        TimeSpan::new(start, end)?
    } else if let Some(tables) = &tables {
        let start = tables
            .iter()
            .filter_map(|t| t.timestamps().first().copied())
            .fold(f64::NEG_INFINITY, f64::max);
        let end = tables
            .iter()
            .filter_map(|t| t.timestamps().last().copied())
            .fold(f64::INFINITY, f64::min);
        TimeSpan::new(start, end)?
    } else {
        return Err(IngestError::Record {
            record: record.clone(),
            message: "neither frames nor signal tables found".into(),
        });
    };

    let unified = match tables {
        Some(t) => Some(align_and_concat(record.clone(), &t[0], &t[1], &t[2], &span)?),
        None => None,
    };
    Ok(IngestedRecord {
        record: record.clone(),
        span,
        frames,
        unified,
    })
}

/// Summary returned by [`ingest_corpus`].
#[derive(Debug)]
pub struct IngestSummary {
    pub catalog: CorpusCatalog,
    pub unified_paths: BTreeMap<RecordId, PathBuf>,
    pub failures: Vec<(RecordId, String)>,
}

/// Ingests every record found under `signals/` or `frames/` (one
/// subdirectory per record id), writes each unified table to
/// `<unified_dir>/<id>.csv` and returns the catalog. Records are processed
/// in parallel.
pub fn ingest_corpus(
    signals: &Path,
    frames: &Path,
    filter: &ChannelFilter,
    unified_dir: &Path,
) -> Result<IngestSummary, IngestError> {
    let mut ids = BTreeSet::new();
    for root in [signals, frames] {
        if !root.is_dir() {
            continue;
        }
        for entry in std::fs::read_dir(root)? {
            let entry = entry?;
            if entry.file_type()?.is_dir() {
                if let Some(Ok(id)) = entry.file_name().to_str().map(RecordId::new) {
                    ids.insert(id);
                }
            }
        }
    }
    std::fs::create_dir_all(unified_dir)?;

    let results: Vec<(RecordId, Result<(IngestedRecord, Option<PathBuf>), IngestError>)> = ids
        .into_par_iter()
        .map(|id| {
            let res = ingest_record(
                &id,
                Some(&signals.join(id.as_str())),
                Some(&frames.join(id.as_str())),
                filter,
            )
            .and_then(|rec| {
                let path = match &rec.unified {
                    Some(u) => {
                        let p = unified_dir.join(format!("{id}.csv"));
                        u.write_csv(&p)?;
                        Some(p)
                    }
                    None => None,
                };
                Ok((rec, path))
            });
            (id, res)
        })
        .collect();

    let mut catalog = CorpusCatalog::new();
    let mut unified_paths = BTreeMap::new();
    let mut failures = Vec::new();
    for (id, res) in results {
        match res {
            Ok((rec, path)) => {
                let rows = rec.unified.as_ref().map_or(0, UnifiedSignalTable::len);
                catalog.add(rec.record.clone(), rec.span, rec.frames)?;
                catalog.set_signal_rows(&rec.record, rows)?;
                if let Some(p) = path {
                    unified_paths.insert(id, p);
                }
            }
            Err(e) => {
                log::warn!("skipping record {id}: {e}");
                failures.push((id, e.to_string()));
            }
        }
    }
    Ok(IngestSummary {
        catalog,
        unified_paths,
        failures,
    })
}
