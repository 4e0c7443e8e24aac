//! Deterministic 50-record demo corpus.
//!
//! Nine records are planted as targets for nine scenario queries (snow,
//! tunnel, France with pedestrians, ...); the rest are ordinary drives.
//! Signal tables are shaped so the bundled interpreter rules fire where a
//! scenario depends on them (location, speed, vertical acceleration, turn
//! indicator). Record 000005 carries the bundled reference descriptions
//! and is not a target.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use crate::corpus::{write_descriptions, CorpusCatalog, Description, FrameRef, RecordId, SignalKind, SignalTable, TimeSpan};
use crate::describe::{DescribeError, SignalInterpreter};
use crate::ingest::{align_and_concat, write_signal_csv, IngestError, UnifiedSignalTable};

pub const RECORD_COUNT: u32 = 50;
const DURATION: f64 = 20.0;
const FRAME_HZ: u32 = 2;
const GENERATOR: &str = "fixture";

/// A valid 1×1 grey PNG.
pub const TINY_PNG: [u8; 69] = [
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00, 0x00,
    0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x02, 0x00, 0x00, 0x00, 0x90, 0x77, 0x53, 0xde, 0x00, 0x00, 0x00, 0x0c, 0x49,
    0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x68, 0x68, 0x68, 0x00, 0x00, 0x03, 0x04, 0x01, 0x81, 0x4b, 0xd3, 0xd2, 0x10,
    0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82,
];

const RECORD_000005: &str = include_str!("../data/record_000005.jsonl");

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: &'static str,
    pub query: &'static str,
    pub target: RecordId,
}

#[derive(Debug, Clone, Copy)]
struct Profile {
    lat: f64,
    lon: f64,
    speed_kmh: f64,
    vertical_peak: Option<f64>,
    brake: bool,
    right_turn: bool,
}

impl Profile {
    fn drive(lat: f64, lon: f64, speed_kmh: f64) -> Self {
        Self {
            lat,
            lon,
            speed_kmh,
            vertical_peak: None,
            brake: false,
            right_turn: false,
        }
    }
}

const STOCKHOLM: (f64, f64) = (59.33, 18.06);
const GOTHENBURG: (f64, f64) = (57.70, 11.97);
const OSLO: (f64, f64) = (59.91, 10.75);
const COPENHAGEN: (f64, f64) = (55.68, 12.57);
const LYON: (f64, f64) = (45.76, 4.84);

struct Planted {
    id: &'static str,
    record: u32,
    query: &'static str,
    video: &'static str,
    profile: Profile,
}

fn planted() -> Vec<Planted> {
    let (sl, so) = STOCKHOLM;
    let (gl, go) = GOTHENBURG;
    vec![
        Planted {
            id: "I",
            record: 3,
            query: "Driving in the snow",
            video: "The car is driving in the snow. Snow is falling and snow covers the road and the fields on both sides. \
                    The lighting is dim and the road looks icy.",
            profile: Profile::drive(sl, so, 35.0),
        },
        Planted {
            id: "II",
            record: 11,
            query: "Driving in the tunnel",
            video: "The car is driving in the tunnel. The tunnel is lit by yellow lamps along the tunnel walls \
                    and the car keeps a steady speed.",
            profile: Profile::drive(sl, so, 70.0),
        },
        Planted {
            id: "III",
            record: 17,
            query: "Driving in France and pedestrians in the view.",
            video: "The car moves slowly through a town centre. Pedestrians are in the view, crossing the street \
                    and walking on the sidewalk while more pedestrians wait at the crossing.",
            profile: Profile::drive(LYON.0, LYON.1, 25.0),
        },
        Planted {
            id: "IV",
            record: 22,
            query: "Driving on the bridge with a car ahead.",
            video: "The car is driving on the bridge with a car ahead in the same lane. \
                    The car ahead keeps a steady distance across the bridge.",
            profile: Profile::drive(gl, go, 60.0),
        },
        Planted {
            id: "V",
            record: 28,
            query: "When driving in rain or snow and there is a car ahead of you, and you want to make a right turn.",
            video: "The car is driving in heavy rain and there is a car ahead of it. The wipers are on and the driver \
                    slows down to make a right turn at the intersection.",
            profile: Profile {
                brake: true,
                right_turn: true,
                ..Profile::drive(gl, go, 30.0)
            },
        },
        Planted {
            id: "VI",
            record: 39,
            query: "Driving on a cloudy day, approaching a bridge with no other cars in sight.",
            video: "The car is approaching a bridge on a cloudy day. There are no other cars in sight \
                    and the road ahead is empty.",
            profile: Profile::drive(gl, go, 65.0),
        },
        Planted {
            id: "VII",
            record: 34,
            query: "The lane marking changes from a dashed line to a solid line when exiting a tunnel.",
            video: "As the car is exiting a tunnel the lane marking changes from a dashed line to a solid line. \
                    The solid line continues along the road after the tunnel.",
            profile: Profile::drive(OSLO.0, OSLO.1, 75.0),
        },
        Planted {
            id: "VIII",
            record: 41,
            query: "Driving on a highway, an exit ramp is ahead.",
            video: "The car is driving on a highway with three lanes. An exit ramp is ahead on the right, \
                    announced by an overhead sign.",
            profile: Profile::drive(sl, so, 110.0),
        },
        Planted {
            id: "IX",
            record: 47,
            query: "Driving on a rural road in the afternoon, and the vertical acceleration in meters per second squared is greater than 9.",
            video: "The car is driving on a rural road in the afternoon, passing farmland and scattered houses. \
                    The road surface is rough and uneven.",
            profile: Profile {
                vertical_peak: Some(11.3),
                ..Profile::drive(sl, so, 55.0)
            },
        },
    ]
}

const FILLER_VIDEO: [&str; 8] = [
    "The video shows a car on a city street on a sunny morning. Buildings line both sides and traffic is light.",
    "The car waits at a red traffic light at an intersection while cyclists pass in front of it.",
    "The vehicle moves through a residential area with parked vehicles along the curb. The sky is clear and the asphalt is dry.",
    "The vehicle follows a truck on a two lane road through a forest at dusk.",
    "The car enters a roundabout in a suburban area. The weather is overcast and the asphalt is dry.",
    "The vehicle stands in a parking lot at night under street lamps.",
    "The car passes a construction zone where orange cones narrow the road.",
    "The car travels along a coastal road with the sea on the left on a windy, sunny day.",
];

const FILLER_PLACES: [(f64, f64); 4] = [STOCKHOLM, GOTHENBURG, OSLO, COPENHAGEN];
const FILLER_SPEEDS: [f64; 5] = [30.0, 45.0, 65.0, 75.0, 20.0];

#[derive(Debug, Clone)]
pub struct SyntheticRecord {
    pub id: RecordId,
    pub span: TimeSpan,
    pub frames: Vec<FrameRef>,
    pub vd: SignalTable,
    pub vcd: SignalTable,
    pub sd: SignalTable,
    /// Video descriptions for prompts 1-6.
    pub video: Vec<Description>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub records: Vec<SyntheticRecord>,
    pub scenarios: Vec<Scenario>,
}

fn table(kind: SignalKind, hz: u32, cols: &[(&str, &dyn Fn(f64, usize) -> f64)]) -> SignalTable {
    let n = (DURATION as u32 * hz + 1) as usize;
    let ts: Vec<f64> = (0..n).map(|i| i as f64 / hz as f64).collect();
    let channels = cols
        .iter()
        .map(|(name, f)| (name.to_string(), ts.iter().enumerate().map(|(i, &t)| f(t, i)).collect()))
        .collect::<BTreeMap<_, _>>();
    SignalTable::new(kind, ts, channels).expect("generated table is valid")
}

fn signals(p: Profile, seed: u32) -> (SignalTable, SignalTable, SignalTable) {
    let phase = seed as f64 * 0.37;
    let v = p.speed_kmh / 3.6;
    let vd = table(
        SignalKind::VehicleData,
        10,
        &[
            ("velocity", &|t, _| v + 0.4 * (t * 0.9 + phase).sin()),
            ("longitudinal_acceleration", &|t, _| 0.3 * (t * 0.6 + phase).cos()),
            ("vertical_acceleration", &|t, _| match p.vertical_peak {
                Some(peak) if (t - 12.0).abs() < 1e-9 => peak,
                _ => 0.4 * (t * 1.3 + phase).sin(),
            }),
        ],
    );
    let vcd = table(
        SignalKind::VehicleControlData,
        5,
        &[
            ("brake_pedal", &|t, _| if p.brake && (8.0..=10.0).contains(&t) { 0.8 } else { 0.05 * (1.0 + (t + phase).sin()) }),
            ("acceleration_pedal", &|t, _| 0.3 + 0.1 * (t * 0.4 + phase).sin()),
            ("turn_indicator", &|t, _| if p.right_turn && t >= 5.0 { 2.0 } else if t >= 18.0 { 1.0 } else { 0.0 }),
        ],
    );
    let sd = table(
        SignalKind::SatelliteData,
        1,
        &[
            ("latitude", &|_, i| p.lat + 0.0005 * i as f64),
            ("longitude", &|_, i| p.lon + 0.0008 * i as f64),
        ],
    );
    (vd, vcd, sd)
}

fn frames(id: &RecordId) -> Vec<FrameRef> {
    (0..=DURATION as u32 * FRAME_HZ)
        .map(|i| FrameRef {
            record: id.clone(),
            index: i,
            timestamp: i as f64 / FRAME_HZ as f64,
            uri: format!("frames/{id}/{i:04}.png"),
        })
        .collect()
}

fn reference_descriptions() -> Vec<Description> {
    RECORD_000005
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("bundled descriptions parse"))
        .collect()
}

impl SyntheticCorpus {
    pub fn generate() -> Self {
        let planted = planted();
        let mut records = Vec::with_capacity(RECORD_COUNT as usize);
        let mut filler = 0usize;
        for n in 1..=RECORD_COUNT {
            let id = RecordId::from_number(n);
            let plant = planted.iter().find(|p| p.record == n);
            let (profile, text) = match plant {
                None if n == 5 => (Profile::drive(GOTHENBURG.0, GOTHENBURG.1, 65.0), String::new()),
                Some(p) => (p.profile, p.video.to_string()),
                None => {
                    let (lat, lon) = FILLER_PLACES[filler % FILLER_PLACES.len()];
                    let speed = FILLER_SPEEDS[filler % FILLER_SPEEDS.len()];
                    let a = FILLER_VIDEO[filler % FILLER_VIDEO.len()];
                    let b = FILLER_VIDEO[(filler * 3 + 1) % FILLER_VIDEO.len()];
                    filler += 1;
                    let text = if a == b { a.to_string() } else { format!("{a} {b}") };
                    (Profile::drive(lat, lon, speed), text)
                }
            };
            let video = if n == 5 {
                reference_descriptions()
            } else {
                (1..=6).map(|p| Description::video(id.clone(), p, text.clone(), GENERATOR)).collect()
            };
            let (vd, vcd, sd) = signals(profile, n);
            records.push(SyntheticRecord {
                span: TimeSpan::new(0.0, DURATION).expect("valid span"),
                frames: frames(&id),
                id,
                vd,
                vcd,
                sd,
                video,
            });
        }
        let scenarios = planted
            .iter()
            .map(|p| Scenario {
                id: p.id,
                query: p.query,
                target: RecordId::from_number(p.record),
            })
            .collect();
        Self { records, scenarios }
    }

    /// Catalog with frame URIs relative to the corpus root.
    pub fn catalog(&self) -> CorpusCatalog {
        let mut cat = CorpusCatalog::new();
        for r in &self.records {
            cat.add(r.id.clone(), r.span, r.frames.clone()).expect("generated record is valid");
        }
        cat
    }

    pub fn unified(&self) -> Result<Vec<UnifiedSignalTable>, IngestError> {
        self.records
            .iter()
            .map(|r| align_and_concat(r.id.clone(), &r.vd, &r.vcd, &r.sd, &r.span))
            .collect()
    }

    pub fn video_descriptions(&self, prompt: u8) -> Vec<Description> {
        self.records
            .iter()
            .flat_map(|r| r.video.iter().filter(|d| d.prompt_id == Some(prompt)).cloned())
            .collect()
    }

    /// Signal descriptions from the bundled interpreter rules.
    pub fn signal_descriptions(&self) -> Result<Vec<Description>, DescribeError> {
        let unified = self.unified().map_err(|e| DescribeError::Config(e.to_string()))?;
        let interp = SignalInterpreter::bundled();
        unified.iter().map(|t| interp.describe(t)).collect()
    }

    /// Writes the raw layout `ssx ingest` reads:
    /// `signals/<id>/<table>.csv`, `frames/<id>/frames.csv` plus images,
    /// `video_descriptions.jsonl` and `scenarios.json`.
    pub fn write(&self, root: &Path) -> std::io::Result<()> {
        for r in &self.records {
            let sig = root.join("signals").join(r.id.as_str());
            std::fs::create_dir_all(&sig)?;
            for t in [&r.vd, &r.vcd, &r.sd] {
                write_signal_csv(t, &sig.join(format!("{}.csv", t.kind().file_stem())))
                    .map_err(std::io::Error::other)?;
            }
            let fdir = root.join("frames").join(r.id.as_str());
            std::fs::create_dir_all(&fdir)?;
            let mut listing = std::io::BufWriter::new(std::fs::File::create(fdir.join("frames.csv"))?);
            writeln!(listing, "index,timestamp,uri")?;
            for f in &r.frames {
                let name = format!("{:04}.png", f.index);
                writeln!(listing, "{},{},{}", f.index, f.timestamp, name)?;
                std::fs::write(fdir.join(&name), TINY_PNG)?;
            }
            listing.flush()?;
        }
        let all: Vec<Description> = self.records.iter().flat_map(|r| r.video.iter().cloned()).collect();
        write_descriptions(&root.join("video_descriptions.jsonl"), &all).map_err(std::io::Error::other)?;
        let scenarios: Vec<_> = self
            .scenarios
            .iter()
            .map(|s| serde_json::json!({"id": s.id, "query": s.query, "target": s.target}))
            .collect();
        std::fs::write(root.join("scenarios.json"), serde_json::to_string_pretty(&scenarios)?)?;
        Ok(())
    }
}
