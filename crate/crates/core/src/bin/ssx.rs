use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use scenario_search::config::Config;
use scenario_search::corpus::{read_descriptions, write_descriptions, CorpusCatalog, Description, Source};
use scenario_search::describe::{describe_video, get_prompt, DescribeError, DescriberBackend, FixtureBackend, RemoteBackend, SignalInterpreter};
use scenario_search::engine::{Query, Snapshot};
use scenario_search::index::{build_index, index_file_name};
use scenario_search::ingest::{ingest_corpus, sample_frames, ChannelFilter, UnifiedSignalTable, DEFAULT_SAMPLE_FRAMES};
use scenario_search::metrics::{check_identities, compute_metrics_with, load_published_rows, make_series, RANGE_TOLERANCE, RLGAP_TOLERANCE_PP};
use scenario_search::service::{serve_on, AppState};
use scenario_search::synth::SyntheticCorpus;

#[derive(Parser)]
#[command(name = "ssx", version, about = "Natural-language search over test-drive recordings")]
struct Cli {
    /// JSON config (provider, thresholds, verdict, missing-modality policy, paths)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Fixture,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Video,
    Signal,
}

impl From<SourceArg> for Source {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Video => Source::Video,
            SourceArg::Signal => Source::Signal,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the 50-record demo corpus
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Align signal tables and build the catalog
    Ingest {
        #[arg(long)]
        signals: PathBuf,
        #[arg(long)]
        frames: PathBuf,
        /// Receives catalog.jsonl and unified/<id>.csv
        #[arg(long)]
        out: PathBuf,
        /// One channel name per line
        #[arg(long)]
        allowlist: Option<PathBuf>,
        #[arg(long)]
        keep_constant: bool,
    },
    /// Generate descriptions for every catalog record
    Describe {
        #[arg(long, value_enum, default_value = "video")]
        source: SourceArg,
        /// Prompt id 1-6 (video only)
        #[arg(long, default_value_t = 4)]
        prompt: u8,
        #[arg(long, value_enum, default_value = "fixture")]
        backend: Backend,
        /// Description JSONL replayed by the fixture backend
        #[arg(long)]
        fixture: Option<PathBuf>,
        /// Base URL of the remote describer
        #[arg(long)]
        url: Option<String>,
        #[arg(long, default_value = "remote-vlm")]
        generator: String,
        #[arg(long)]
        catalog: PathBuf,
        /// Directory of unified <id>.csv tables (signal only)
        #[arg(long)]
        unified_dir: Option<PathBuf>,
        /// Frames sampled per record
        #[arg(long, default_value_t = DEFAULT_SAMPLE_FRAMES)]
        frames: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Embed descriptions and persist an index
    Index {
        #[arg(long, value_enum)]
        source: SourceArg,
        #[arg(long)]
        descriptions: PathBuf,
        #[arg(long)]
        index_dir: PathBuf,
    },
    /// Rank records against a query
    Query {
        #[arg(long)]
        text: String,
        #[arg(long, default_value_t = 10)]
        top_n: usize,
        /// video,signal
        #[arg(long, value_parser = parse_weights)]
        weights: Option<(f64, f64)>,
        #[arg(long)]
        prompt: Option<u8>,
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        index_dir: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Reliability metrics for a distance series, or identity checks on a published table
    Metrics {
        /// Distances, whitespace/comma separated or a JSON array
        #[arg(long, conflicts_with = "table3", required_unless_present = "table3")]
        series: Option<PathBuf>,
        #[arg(long)]
        table3: Option<PathBuf>,
    },
    /// Run the HTTP API
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        index_dir: Option<PathBuf>,
    },
}

fn parse_weights(s: &str) -> Result<(f64, f64), String> {
    let (v, g) = s.split_once(',').ok_or("expected two comma-separated numbers")?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x}: {e}"));
    Ok((p(v)?, p(g)?))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(p) => Config::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => Config::default(),
    };
    match cli.command {
        Command::Synth { out } => {
            SyntheticCorpus::generate().write(&out)?;
            println!("wrote demo corpus to {}", out.display());
        }
        Command::Ingest {
            signals,
            frames,
            out,
            allowlist,
            keep_constant,
        } => {
            let mut filter = match allowlist {
                Some(p) => ChannelFilter::from_allowlist_file(&p)?,
                None => ChannelFilter::default(),
            };
            filter.drop_constant = !keep_constant;
            // frame URIs are stored relative to these
            let signals = std::path::absolute(&signals)?;
            let frames = std::path::absolute(&frames)?;
            let summary = ingest_corpus(&signals, &frames, &filter, &out.join("unified"))?;
            summary.catalog.save(&out.join("catalog.jsonl"))?;
            println!(
                "ingested {} records ({} with signals), {} failed",
                summary.catalog.len(),
                summary.unified_paths.len(),
                summary.failures.len()
            );
            for (id, why) in &summary.failures {
                println!("  {id}: {why}");
            }
        }
        Command::Describe {
            source,
            prompt,
            backend,
            fixture,
            url,
            generator,
            catalog,
            unified_dir,
            frames,
            out,
        } => {
            let cat = CorpusCatalog::load(&catalog)?;
            let descs = match Source::from(source) {
                Source::Video => {
                    let backend: Box<dyn DescriberBackend> = match backend {
                        Backend::Fixture => {
                            let path = fixture.context("--fixture is required with --backend fixture")?;
                            Box::new(FixtureBackend::load(&path)?)
                        }
                        Backend::Remote => Box::new(RemoteBackend::new(url.context("--url is required with --backend remote")?, generator)),
                    };
                    describe_all_video(&cat, prompt, frames, backend.as_ref())?
                }
                Source::Signal => {
                    let dir = unified_dir.unwrap_or_else(|| catalog.with_file_name("unified"));
                    describe_all_signals(&cat, &dir)?
                }
            };
            write_descriptions(&out, &descs)?;
            println!("wrote {} descriptions to {}", descs.len(), out.display());
        }
        Command::Index {
            source,
            descriptions,
            index_dir,
        } => {
            let provider = config.provider.build();
            let descs = read_descriptions(&descriptions)?;
            let idx = build_index(&descs, source.into(), provider.as_ref())?;
            std::fs::create_dir_all(&index_dir)?;
            let path = index_dir.join(index_file_name(idx.source(), idx.prompt_id()));
            idx.save(&path)?;
            println!("indexed {} descriptions into {}", idx.len(), path.display());
        }
        Command::Query {
            text,
            top_n,
            weights,
            prompt,
            catalog,
            index_dir,
            json,
        } => {
            let snap = load_snapshot(&config, catalog, index_dir)?;
            let mut q = Query::new(text).top_n(top_n);
            if let Some((v, s)) = weights {
                q = q.weights(v, s);
            }
            q.prompt_id = prompt;
            let resp = snap.query(&q)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&resp)?);
            } else {
                println!("{:>4}  {:<8} {:>8} {:>8} {:>8}  band", "rank", "record", "combined", "video", "signal");
                for (i, r) in resp.results.iter().enumerate() {
                    println!(
                        "{:>4}  {:<8} {:>8.4} {:>8.4} {:>8.4}  {:?}",
                        i + 1,
                        r.record,
                        r.combined,
                        r.s_video,
                        r.s_signal,
                        r.band
                    );
                }
                let m = &resp.metrics;
                println!(
                    "LGap {:.4}  MinD {:.4}  MaxD {:.4}  Range {:.4}  StdDev {:.4}  RLGap {:.2}%  verdict {}",
                    m.lgap,
                    m.min_d,
                    m.max_d,
                    m.range,
                    m.std_dev,
                    m.rl_gap,
                    m.verdict.as_str()
                );
                for e in &resp.excluded {
                    println!("excluded {}: {}", e.record, e.reason);
                }
            }
        }
        Command::Metrics { series, table3 } => {
            if let Some(path) = table3 {
                let rows = load_published_rows(&path)?;
                let mut failed = 0;
                for c in check_identities(&rows) {
                    let ok = c.range_error <= RANGE_TOLERANCE && c.rlgap_error <= RLGAP_TOLERANCE_PP;
                    failed += usize::from(!ok);
                    println!(
                        "{:<8} range err {:.5}  rlgap err {:.4} pp  {}",
                        c.scenario_prompt,
                        c.range_error,
                        c.rlgap_error,
                        if ok { "ok" } else { "MISMATCH" }
                    );
                }
                if failed > 0 {
                    bail!("{failed} of {} rows violate the identities", rows.len());
                }
            } else if let Some(path) = series {
                let values = read_series(&path)?;
                let s = make_series(path.display().to_string(), &values)?;
                let report = compute_metrics_with(&s, &config.engine.thresholds, &config.engine.verdict);
                println!("{}", serde_json::to_string_pretty(&report)?);
            }
        }
        Command::Serve {
            port,
            host,
            catalog,
            index_dir,
        } => {
            let catalog = catalog.or(config.catalog.clone()).context("--catalog is required")?;
            let index_dir = index_dir.or(config.index_dir.clone()).context("--index-dir is required")?;
            let snap = load_snapshot(&config, Some(catalog.clone()), Some(index_dir.clone()))?;
            let cfg = config.clone();
            let state = AppState::new(snap).with_loader(move || {
                let provider = cfg.provider.build();
                Snapshot::load(&catalog, &index_dir, provider, cfg.engine, cfg.force)
            });
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                log::info!("listening on {}", listener.local_addr()?);
                serve_on(listener, Arc::new(state)).await
            })?;
        }
    }
    Ok(())
}

fn load_snapshot(config: &Config, catalog: Option<PathBuf>, index_dir: Option<PathBuf>) -> Result<Snapshot> {
    let catalog = catalog.or(config.catalog.clone()).context("--catalog is required")?;
    let index_dir = index_dir.or(config.index_dir.clone()).context("--index-dir is required")?;
    Snapshot::load(&catalog, &index_dir, config.provider.build(), config.engine, config.force)
        .with_context(|| format!("loading {} and {}", catalog.display(), index_dir.display()))
}

fn describe_all_video(cat: &CorpusCatalog, prompt: u8, k: usize, backend: &dyn DescriberBackend) -> Result<Vec<Description>> {
    let spec = get_prompt(prompt)?;
    let mut out = Vec::new();
    for (id, entry) in cat.iter() {
        if !entry.has_video() {
            log::warn!("{id}: no frames, skipped");
            continue;
        }
        let frames = sample_frames(&entry.frames, k)?;
        match describe_video(id, &frames, &spec, backend) {
            Ok(d) => out.push(d),
            Err(e @ DescribeError::BackendUnavailable { .. }) => return Err(e.into()),
            Err(e) => log::warn!("{id}: {e}"),
        }
    }
    Ok(out)
}

fn describe_all_signals(cat: &CorpusCatalog, dir: &Path) -> Result<Vec<Description>> {
    let interp = SignalInterpreter::bundled();
    let mut out = Vec::new();
    for (id, _) in cat.iter() {
        let path = dir.join(format!("{id}.csv"));
        if !path.is_file() {
            log::warn!("{id}: no unified table");
            continue;
        }
        let table = UnifiedSignalTable::read_csv(id.clone(), &path)?;
        match interp.describe(&table) {
            Ok(d) => out.push(d),
            Err(e) => log::warn!("{id}: {e}"),
        }
    }
    Ok(out)
}

fn read_series(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(&text)?);
    }
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("not a number: {t}")))
        .collect()
}
