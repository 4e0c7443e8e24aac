//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scenario_search::corpus::{Description, RecordId, SignalKind, SignalTable, Source, TimeSpan};
use scenario_search::embedding::{cosine, EmbeddingVector, HashedBagProvider};
use scenario_search::engine::{run_query, EngineSettings, Query};
use scenario_search::index::{build_index, IndexError, VectorIndex};
use scenario_search::ingest::{align_and_concat, sample_positions};
use scenario_search::metrics::{
    bundled_published_rows, check_identities, compute_metrics, make_series, verdict, BandThresholds, FailureReason,
    Verdict, VerdictConfig,
};
use scenario_search::synth::SyntheticCorpus;

const RANGE_TOL: f64 = 5e-4;
const RLGAP_TOL_PP: f64 = 0.05;
const ORACLE_TOL: f64 = 1e-12;
const COSINE_BOUND: f64 = 1.0 + 1e-9;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    check(took < limit, || format!("took {took:?}, limit {limit:?}"))?;
    Ok(took)
}

fn table3_identities() -> Outcome {
    let start = Instant::now();
    let rows = bundled_published_rows();
    check(rows.len() == 54, || format!("{} rows, expected 54", rows.len()))?;
    for c in check_identities(&rows) {
        check(c.range_error <= RANGE_TOL, || format!("{}: range error {}", c.scenario_prompt, c.range_error))?;
        check(c.rlgap_error <= RLGAP_TOL_PP, || format!("{}: RLGap error {} pp", c.scenario_prompt, c.rlgap_error))?;
    }
    for (label, expected) in [("I-1", 66.14), ("II-3", 83.38), ("IV-4", 67.18)] {
        let r = rows.iter().find(|r| r.scenario_prompt == label).ok_or(format!("{label} missing"))?;
        let derived = 100.0 * r.lgap / (r.maxd - r.mind);
        check((derived - expected).abs() <= RLGAP_TOL_PP, || format!("{label}: {derived} vs {expected}"))?;
        check((r.rlgap - expected).abs() < 1e-9, || format!("{label}: table says {}", r.rlgap))?;
    }
    let took = within(start, Duration::from_secs(1))?;
    Ok(format!("54 rows, anchors I-1/II-3/IV-4, {took:?}"))
}

/// Straight from the definitions, sharing no code with the crate.
fn oracle(d: &[f64]) -> [f64; 6] {
    let mut s = d.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut lgap = 0.0f64;
    for i in 0..s.len() - 1 {
        lgap = lgap.max(s[i + 1] - s[i]);
    }
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = d.len() as f64;
    let mut sum = 0.0;
    for v in d {
        sum += v;
    }
    let mean = sum / n;
    let mut ss = 0.0;
    for v in d {
        ss += (v - mean) * (v - mean);
    }
    let range = max - min;
    let rlgap = if range == 0.0 { 0.0 } else { lgap / range * 100.0 };
    [lgap, min, max, range, (ss / n).sqrt(), rlgap]
}

fn metrics_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let th = BandThresholds::default();
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let n = rng.random_range(2..=2000);
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=2.0)).collect();
        let m = compute_metrics(&make_series("q", &d).map_err(|e| e.to_string())?, &th);
        let got = [m.lgap, m.min_d, m.max_d, m.range, m.std_dev, m.rl_gap];
        let want = oracle(&d);
        for (k, (g, w)) in got.iter().zip(want).enumerate() {
            let err = (g - w).abs();
            worst = worst.max(err);
            check(err <= ORACLE_TOL, || format!("case {case} (n={n}) metric {k}: {g} vs {w}"))?;
        }
    }
    let took = within(start, Duration::from_secs(5))?;
    Ok(format!("1000 series, worst |err| {worst:.1e}, {took:?}"))
}

fn desk_retrieval() -> Outcome {
    let start = Instant::now();
    let corpus = SyntheticCorpus::generate();
    let provider = HashedBagProvider::default();
    let video = build_index(&corpus.video_descriptions(4), Source::Video, &provider).map_err(|e| e.to_string())?;
    let signals = corpus.signal_descriptions().map_err(|e| e.to_string())?;
    let signal = build_index(&signals, Source::Signal, &provider).map_err(|e| e.to_string())?;
    check(video.len() == 50 && signal.len() == 50, || "corpus is not 50 records".into())?;
    let settings = EngineSettings::default();
    for sc in &corpus.scenarios {
        let r = run_query(&Query::new(sc.query).top_n(50), &video, &signal, &provider, &settings).map_err(|e| e.to_string())?;
        let top = &r.results[0];
        check(top.record == sc.target, || format!("{}: ranked {} first, target {}", sc.id, top.record, sc.target))?;
        let runner_up = r.results[1].combined;
        check(top.combined > runner_up, || format!("{}: target ties the runner-up", sc.id))?;
        check(r.results.iter().all(|x| x.combined <= top.combined), || format!("{}: not corpus max", sc.id))?;
    }
    let took = within(start, Duration::from_secs(5))?;
    Ok(format!("9/9 targets ranked #1, {took:?}"))
}

fn frame_sampling() -> Outcome {
    let k = 32;
    for n in 1..=1000usize {
        let p = sample_positions(n, k);
        check(p.len() == n.min(k), || format!("N={n}: {} positions", p.len()))?;
        check(p.windows(2).all(|w| w[0] < w[1]), || format!("N={n}: not strictly increasing"))?;
        if n >= 2 {
            check(p[0] == 0 && p[p.len() - 1] == n - 1, || format!("N={n}: endpoints missing"))?;
        }
    }
    Ok("N = 1..=1000, k = 32".into())
}

fn random_table(rng: &mut ChaCha8Rng, kind: SignalKind, channel: &str, ts: Vec<f64>) -> SignalTable {
    let values = ts.iter().map(|_| rng.random_range(-50.0..50.0)).collect();
    SignalTable::new(kind, ts, BTreeMap::from([(channel.to_string(), values)])).unwrap()
}

fn random_timestamps(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let hz = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0][rng.random_range(0..6)];
    let offset = rng.random_range(-3.0..3.0);
    let n = rng.random_range(40..400);
    let jitter = rng.random_range(0.0..0.4) / hz;
    (0..n).map(|i| offset + i as f64 / hz + rng.random_range(0.0..=jitter)).collect()
}

fn in_span(ts: &[f64], span: &TimeSpan) -> usize {
    ts.iter().filter(|t| span.contains(**t)).count()
}

fn alignment() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let id = RecordId::from_number(1);
    let mut identity_cases = 0;
    let mut done = 0;
    while done < 500 {
        let identical = done % 5 == 0;
        let base = random_timestamps(&mut rng);
        let (tv, tc, ts) = if identical {
            (base.clone(), base.clone(), base)
        } else {
            (base, random_timestamps(&mut rng), random_timestamps(&mut rng))
        };
        let lo = rng.random_range(0.0..4.0);
        let span = TimeSpan::new(lo, lo + rng.random_range(1.0..20.0)).unwrap();
        let counts = [in_span(&tv, &span), in_span(&tc, &span), in_span(&ts, &span)];
        if counts.contains(&0) {
            continue;
        }
        let vd = random_table(&mut rng, SignalKind::VehicleData, "speed", tv);
        let vcd = random_table(&mut rng, SignalKind::VehicleControlData, "brake", tc);
        let sd = random_table(&mut rng, SignalKind::SatelliteData, "lat", ts);
        let u = align_and_concat(id.clone(), &vd, &vcd, &sd, &span).map_err(|e| e.to_string())?;
        let least = *counts.iter().min().unwrap();
        check(u.len() == least, || format!("fixture {done}: {} rows, least frequent has {least}", u.len()))?;
        check(u.timestamps.iter().all(|t| span.contains(*t)), || format!("fixture {done}: row outside span"))?;
        if identical {
            identity_cases += 1;
            let keep: Vec<usize> = (0..vd.len()).filter(|&i| span.contains(vd.timestamps()[i])).collect();
            let want_ts: Vec<f64> = keep.iter().map(|&i| vd.timestamps()[i]).collect();
            check(u.timestamps == want_ts, || format!("fixture {done}: identity timestamps changed"))?;
            for (name, src) in [("speed", &vd), ("brake", &vcd), ("lat", &sd)] {
                let want: Vec<f64> = keep.iter().map(|&i| src.channel(name).unwrap()[i]).collect();
                check(u.channels.get(name) == Some(&want), || format!("fixture {done}: identity changed {name}"))?;
            }
        }
        done += 1;
    }
    Ok(format!("500 fixtures ({identity_cases} identical-timestamp)"))
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> EmbeddingVector {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if let Ok(u) = EmbeddingVector::normalized(v) {
            return u;
        }
    }
}

fn duality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let dim = 64;
    let query = random_unit(&mut rng, dim);
    let mut sims = Vec::with_capacity(1000);
    for i in 0..1000 {
        let a = random_unit(&mut rng, dim);
        let b = random_unit(&mut rng, dim);
        let raw: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum();
        check(raw.abs() <= COSINE_BOUND, || format!("pair {i}: raw dot {raw}"))?;
        let ab = cosine(&a, &b).map_err(|e| e.to_string())?;
        let ba = cosine(&b, &a).map_err(|e| e.to_string())?;
        check(ab.value().abs() <= COSINE_BOUND, || format!("pair {i}: {}", ab.value()))?;
        check(ab.value().to_bits() == ba.value().to_bits(), || format!("pair {i}: asymmetric"))?;
        sims.push(cosine(&query, &a).map_err(|e| e.to_string())?);
    }
    let mut by_distance: Vec<usize> = (0..sims.len()).collect();
    by_distance.sort_by(|&i, &j| sims[i].distance().value().total_cmp(&sims[j].distance().value()).then(i.cmp(&j)));
    let mut by_similarity: Vec<usize> = (0..sims.len()).collect();
    by_similarity.sort_by(|&i, &j| sims[i].value().total_cmp(&sims[j].value()).then(j.cmp(&i)));
    by_similarity.reverse();
    check(by_distance == by_similarity, || "argsort by distance differs from reversed argsort by similarity".into())?;

    let words: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
    let provider = HashedBagProvider::default();
    let settings = EngineSettings::default();
    for corpus in 0..200 {
        let n = rng.random_range(5..40);
        let text = |rng: &mut ChaCha8Rng| -> String {
            let len = rng.random_range(3..12);
            (0..len).map(|_| words[rng.random_range(0..words.len())].as_str()).collect::<Vec<_>>().join(" ")
        };
        let mut vd = Vec::new();
        let mut sd = Vec::new();
        for r in 0..n {
            let id = RecordId::from_number(r);
            vd.push(Description::video(id.clone(), 4, text(&mut rng), "t"));
            sd.push(Description::signal(id, text(&mut rng), "t"));
        }
        let v = build_index(&vd, Source::Video, &provider).map_err(|e| e.to_string())?;
        let s = build_index(&sd, Source::Signal, &provider).map_err(|e| e.to_string())?;
        let q = text(&mut rng);
        let (wv, ws) = (rng.random_range(0.0..3.0), rng.random_range(0.1..3.0));
        let c = rng.random_range(0.01..100.0);
        let order = |a: f64, b: f64| -> Result<Vec<RecordId>, String> {
            let r = run_query(&Query::new(q.clone()).top_n(n as usize).weights(a, b), &v, &s, &provider, &settings)
                .map_err(|e| e.to_string())?;
            Ok(r.results.into_iter().map(|x| x.record).collect())
        };
        check(order(wv, ws)? == order(c * wv, c * ws)?, || format!("corpus {corpus}: ranking changed under scaling by {c}"))?;
    }
    Ok("1000 pairs, 200 weight-scaled corpora".into())
}

fn series(sims: &[f64]) -> scenario_search::metrics::DistanceSeries {
    let d: Vec<f64> = sims.iter().map(|s| 1.0 - s).collect();
    make_series("q", &d).unwrap()
}

fn verdict_rules() -> Outcome {
    let th = BandThresholds::default();
    let cfg = VerdictConfig::default();
    let mut reliable = vec![0.97, 0.93];
    reliable.extend((0..12).map(|i| 0.88 - 0.04 * i as f64));
    reliable.extend([0.35, 0.2, 0.1]);
    let a = verdict(&series(&reliable), &th, &cfg);
    check(a.verdict == Verdict::Reliable, || format!("reliable fixture judged {a:?}"))?;
    let a = verdict(&series(&[0.5; 10]), &th, &cfg);
    check(
        a.verdict == Verdict::Failed && a.reason == Some(FailureReason::LowVariance),
        || format!("all-equal judged {a:?}"),
    )?;
    let a = verdict(&series(&[0.95, 0.6, 0.1]), &th, &cfg);
    check(a.verdict == Verdict::InsufficientData, || format!("N=3 judged {a:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    for i in 0..1000 {
        let low = rng.random_range(-1.0..0.9);
        let th = BandThresholds::new(low, rng.random_range(low + 0.01..=1.0)).map_err(|e| e.to_string())?;
        let cfg = VerdictConfig {
            min_high: rng.random_range(0..10),
            min_low: rng.random_range(0..10),
            min_records: rng.random_range(1..50),
            variance_floor: rng.random_range(0.0..0.5),
            cluster_gap_fraction: rng.random_range(0.0..2.0),
        };
        let n = cfg.min_records + rng.random_range(0..100);
        let value = rng.random_range(0.0..=2.0);
        let a = verdict(&make_series("q", &vec![value; n]).unwrap(), &th, &cfg);
        check(a.verdict == Verdict::Failed, || format!("config {i}: all-equal series judged {a:?}"))?;
    }
    Ok("three-case suite + 1000 random configs".into())
}

fn index_persistence() -> Outcome {
    let provider = HashedBagProvider::default();
    let vocab = ["snow", "tunnel", "bridge", "car", "ahead", "rain", "highway", "exit", "ramp", "rural", "road", "lane"];
    let descs: Vec<Description> = (1..=1473u32)
        .map(|n| {
            let text = (0..6).map(|k| vocab[(n as usize * 7 + k * k * 3) % vocab.len()]).collect::<Vec<_>>().join(" ");
            Description::signal(RecordId::from_number(n), format!("{text} {n}"), "t")
        })
        .collect();
    let idx = build_index(&descs, Source::Signal, &provider).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("signal.ssx.jsonl");
    idx.save(&path).map_err(|e| e.to_string())?;
    let first = std::fs::read(&path).map_err(|e| e.to_string())?;
    let loaded = VectorIndex::load_for(&path, &provider, false).map_err(|e| e.to_string())?;
    check(loaded.len() == 1473, || format!("{} entries after load", loaded.len()))?;
    check(loaded == idx, || "loaded index differs".into())?;
    loaded.save(&path).map_err(|e| e.to_string())?;
    let second = std::fs::read(&path).map_err(|e| e.to_string())?;
    check(first == second, || "re-saved bytes differ".into())?;
    let other = HashedBagProvider::new(128);
    check(
        matches!(VectorIndex::load_for(&path, &other, false), Err(IndexError::FingerprintMismatch { .. })),
        || "dim-128 provider accepted a dim-384 index".into(),
    )?;
    std::fs::write(&path, &first[..first.len() - 10]).map_err(|e| e.to_string())?;
    check(
        matches!(VectorIndex::load(&path), Err(IndexError::CorruptIndex { .. })),
        || "truncated file loaded".into(),
    )?;
    Ok(format!("1473 entries, {} bytes, byte-stable", first.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("table3-identities", table3_identities),
        ("metrics-oracle", metrics_oracle),
        ("desk-retrieval", desk_retrieval),
        ("frame-sampling", frame_sampling),
        ("alignment", alignment),
        ("similarity-duality", duality),
        ("verdict-rules", verdict_rules),
        ("index-persistence", index_persistence),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name:<20} {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<20} {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
