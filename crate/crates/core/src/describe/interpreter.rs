//! Rule-based signal interpreter.
//!
//! Each rule inspects one channel of a [`UnifiedSignalTable`] and may emit
//! a sentence. Continuous channels are summarised by their per-record mean;
//! thresholds fire when any row crosses them. Sentences are joined in rule
//! order, so identical input always yields identical text.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::DescribeError;
use crate::corpus::Description;
use crate::ingest::UnifiedSignalTable;

const BUNDLED_RULES: &str = include_str!("../../data/rules.json");
const BUNDLED_REGIONS: &str = include_str!("../../data/regions.json");

/// Generator tag stored on interpreter output.
pub const GENERATOR: &str = "signal-interpreter";

/// One value band of a [`RuleKind::Range`] rule, `min <= value < max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub min: f64,
    pub max: f64,
    pub template: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleKind {
    /// Fires when any row is above `above` or below `below`. `{value}` is
    /// the most extreme crossing value. `otherwise`, when set, is emitted
    /// if the threshold is never crossed.
    Threshold {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        above: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        below: Option<f64>,
        template: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        otherwise: Option<String>,
    },
    /// Mean of the channel times `scale`, rendered through the first band
    /// that contains it.
    Range {
        #[serde(default = "unit_scale")]
        scale: f64,
        bands: Vec<Band>,
    },
    /// Mean (lat, lon) mapped to the first containing [`GeoRegion`]. The
    /// rule's channel is latitude; `{value}` is the region name.
    Geo { lon_channel: String, template: String },
    /// Most frequent rounded value looked up in `categories`.
    Categorical { categories: BTreeMap<String, String> },
}

fn unit_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpreterRule {
    pub channel: String,
    #[serde(flatten)]
    pub kind: RuleKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.min_lat && lat <= self.max_lat && lon >= self.min_lon && lon <= self.max_lon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoRegion {
    pub name: String,
    pub bbox: BoundingBox,
}

impl GeoRegion {
    pub fn new(name: impl Into<String>, bbox: BoundingBox) -> Result<Self, DescribeError> {
        let region = Self { name: name.into(), bbox };
        region.validate()?;
        Ok(region)
    }

    fn validate(&self) -> Result<(), DescribeError> {
        let b = &self.bbox;
        if b.min_lat < b.max_lat && b.min_lon < b.max_lon && !self.name.is_empty() {
            Ok(())
        } else {
            Err(DescribeError::Config(format!("region {:?}: degenerate bounding box", self.name)))
        }
    }
}

/// Rules plus the region table they resolve coordinates against.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalInterpreter {
    pub rules: Vec<InterpreterRule>,
    pub regions: Vec<GeoRegion>,
}

impl SignalInterpreter {
    pub fn new(rules: Vec<InterpreterRule>, regions: Vec<GeoRegion>) -> Result<Self, DescribeError> {
        if rules.is_empty() {
            return Err(DescribeError::Config("interpreter needs at least one rule".into()));
        }
        for r in &rules {
            validate_rule(r)?;
        }
        for g in &regions {
            g.validate()?;
        }
        Ok(Self { rules, regions })
    }

    /// Default rules (speed, acceleration, pedals, turn indicator,
    /// geolocation) and a coarse European region table.
    pub fn bundled() -> &'static SignalInterpreter {
        static DEFAULT: OnceLock<SignalInterpreter> = OnceLock::new();
        DEFAULT.get_or_init(|| {
            Self::new(
                parse_rules(BUNDLED_RULES).expect("bundled rules parse"),
                parse_regions(BUNDLED_REGIONS).expect("bundled regions parse"),
            )
            .expect("bundled interpreter is valid")
        })
    }

    pub fn from_files(rules: &Path, regions: Option<&Path>) -> Result<Self, DescribeError> {
        let rules = parse_rules(&std::fs::read_to_string(rules)?)?;
        let regions = match regions {
            Some(p) => parse_regions(&std::fs::read_to_string(p)?)?,
            None => parse_regions(BUNDLED_REGIONS)?,
        };
        Self::new(rules, regions)
    }

    pub fn describe(&self, table: &UnifiedSignalTable) -> Result<Description, DescribeError> {
        interpret_signals(table, &self.rules, &self.regions)
    }
}

pub fn parse_rules(json: &str) -> Result<Vec<InterpreterRule>, DescribeError> {
    serde_json::from_str(json).map_err(|e| DescribeError::Config(format!("rules file: {e}")))
}

pub fn parse_regions(json: &str) -> Result<Vec<GeoRegion>, DescribeError> {
    serde_json::from_str(json).map_err(|e| DescribeError::Config(format!("regions file: {e}")))
}

fn validate_rule(rule: &InterpreterRule) -> Result<(), DescribeError> {
    let bad = |msg: &str| Err(DescribeError::Config(format!("rule on {}: {msg}", rule.channel)));
    match &rule.kind {
        RuleKind::Threshold { above, below, template, .. } => {
            if above.is_none() && below.is_none() {
                return bad("threshold needs `above` or `below`");
            }
            if template.trim().is_empty() {
                return bad("empty template");
            }
        }
        RuleKind::Range { bands, scale } => {
            if bands.is_empty() || !scale.is_finite() {
                return bad("range needs bands and a finite scale");
            }
            if bands.iter().any(|b| !(b.min < b.max) || b.template.trim().is_empty()) {
                return bad("band with min >= max or empty template");
            }
        }
        RuleKind::Geo { template, .. } => {
            if template.trim().is_empty() {
                return bad("empty template");
            }
        }
        RuleKind::Categorical { categories } => {
            if categories.is_empty() || categories.values().any(|t| t.trim().is_empty()) {
                return bad("categorical needs non-empty category texts");
            }
            if categories.keys().any(|k| k.parse::<i64>().is_err()) {
                return bad("category keys must be integers");
            }
        }
    }
    Ok(())
}

fn mean(values: &[f64]) -> Option<f64> {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        None
    } else {
        Some(finite.iter().sum::<f64>() / finite.len() as f64)
    }
}

fn render(template: &str, value: &str) -> String {
    template.replace("{value}", value)
}

fn fmt_num(v: f64) -> String {
    format!("{v:.1}")
}

fn apply_rule(
    rule: &InterpreterRule,
    table: &UnifiedSignalTable,
    regions: &[GeoRegion],
) -> Option<Option<String>> {
    let values = table.channel(&rule.channel)?;
    let sentence = match &rule.kind {
        RuleKind::Threshold {
            above,
            below,
            template,
            otherwise,
        } => {
            let hi = above.and_then(|a| values.iter().copied().filter(|v| *v > a).reduce(f64::max));
            let lo = below.and_then(|b| values.iter().copied().filter(|v| *v < b).reduce(f64::min));
            match hi.or(lo) {
                Some(v) => Some(render(template, &fmt_num(v))),
                None => otherwise.clone(),
            }
        }
        RuleKind::Range { scale, bands } => mean(values).and_then(|m| {
            let v = m * scale;
            bands
                .iter()
                .find(|b| v >= b.min && v < b.max)
                .map(|b| render(&b.template, &fmt_num(v)))
        }),
        RuleKind::Geo { lon_channel, template } => {
            let lon = table.channel(lon_channel)?;
            match (mean(values), mean(lon)) {
                (Some(lat), Some(lon)) => regions
                    .iter()
                    .find(|r| r.bbox.contains(lat, lon))
                    .map(|r| render(template, &r.name)),
                _ => None,
            }
        }
        RuleKind::Categorical { categories } => {
            let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
            for v in values.iter().filter(|v| v.is_finite()) {
                *counts.entry(v.round() as i64).or_default() += 1;
            }
            // most frequent; ties resolved toward the smaller value
            let mode = counts
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(k, _)| *k);
            mode.and_then(|m| categories.get(&m.to_string()).cloned())
        }
    };
    Some(sentence)
}

/// Turns a unified signal table into one description.
///
/// Fails with [`DescribeError::NoRulesApplied`] when no rule produces a
/// sentence, either because none of the rule channels exist in the table
/// or because every matching rule stayed silent.
pub fn interpret_signals(
    table: &UnifiedSignalTable,
    rules: &[InterpreterRule],
    regions: &[GeoRegion],
) -> Result<Description, DescribeError> {
    if table.is_empty() {
        return Err(DescribeError::EmptySignals(table.record.clone()));
    }
    let sentences: Vec<String> = rules
        .iter()
        .filter_map(|r| apply_rule(r, table, regions).flatten())
        .collect();
    if sentences.is_empty() {
        return Err(DescribeError::NoRulesApplied(table.record.clone()));
    }
    Ok(Description::signal(table.record.clone(), sentences.join(" "), GENERATOR))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{RecordId, Source};
    use proptest::prelude::*;

    fn unified(cols: &[(&str, Vec<f64>)]) -> UnifiedSignalTable {
        let n = cols.first().map_or(0, |c| c.1.len());
        UnifiedSignalTable {
            record: RecordId::new("000005").unwrap(),
            timestamps: (0..n).map(|i| i as f64).collect(),
            channels: cols.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        }
    }

    #[test]
    fn paris_resolves_to_france() {
        // (48.85, 2.35): inside France [42.3, 51.1] x [-4.8, 8.2]; every
        // region listed earlier excludes longitude 2.35.
        let t = unified(&[("latitude", vec![48.84, 48.86]), ("longitude", vec![2.34, 2.36])]);
        let d = SignalInterpreter::bundled().describe(&t).unwrap();
        assert_eq!(d.source, Source::Signal);
        assert_eq!(d.prompt_id, None);
        assert!(d.text.contains("France"), "{}", d.text);
    }

    #[test]
    fn gothenburg_resolves_to_sweden() {
        let t = unified(&[("sd.latitude", vec![57.7]), ("longitude", vec![11.97])]);
        let d = SignalInterpreter::bundled().describe(&t).unwrap();
        assert_eq!(d.text, "The vehicle is driving in Sweden.");
    }

    #[test]
    fn no_matching_channel_is_an_error() {
        let t = unified(&[("wiper_speed", vec![1.0, 2.0])]);
        assert!(matches!(
            SignalInterpreter::bundled().describe(&t),
            Err(DescribeError::NoRulesApplied(_))
        ));
    }

    #[test]
    fn brake_threshold_on_some_row() {
        let t = unified(&[("brake_pedal", vec![0.0, 0.0, 0.9, 0.1])]);
        let d = SignalInterpreter::bundled().describe(&t).unwrap();
        assert!(d.text.contains("The driver presses the brake pedal."));
        let calm = unified(&[("brake_pedal", vec![0.0, 0.1, 0.2])]);
        assert!(SignalInterpreter::bundled().describe(&calm).is_err());
    }

    #[test]
    fn speed_band_and_rule_order() {
        // mean 25 m/s = 90 km/h falls in the [90, 1000) band
        let t = unified(&[
            ("velocity", vec![20.0, 30.0]),
            ("vertical_acceleration", vec![9.8, 9.5]),
            ("turn_indicator", vec![2.0, 2.0]),
        ]);
        let d = SignalInterpreter::bundled().describe(&t).unwrap();
        assert_eq!(
            d.text,
            "The vehicle drives fast at an average speed of 90.0 km/h, typical of a highway. \
             The vertical acceleration in meters per second squared is greater than 9, peaking at 9.8. \
             The right turn indicator is on."
        );
    }

    #[test]
    fn below_threshold_and_otherwise() {
        let rules = parse_rules(
            r#"[{"channel":"ax","kind":"threshold","below":-4.0,"template":"brake {value}","otherwise":"smooth"}]"#,
        )
        .unwrap();
        let hard = unified(&[("ax", vec![0.0, -5.0, -6.5])]);
        assert_eq!(interpret_signals(&hard, &rules, &[]).unwrap().text, "brake -6.5");
        let soft = unified(&[("ax", vec![0.0, -1.0])]);
        assert_eq!(interpret_signals(&soft, &rules, &[]).unwrap().text, "smooth");
    }

    #[test]
    fn config_validation() {
        assert!(SignalInterpreter::new(vec![], vec![]).is_err());
        let bbox = BoundingBox {
            min_lat: 1.0,
            max_lat: 1.0,
            min_lon: 0.0,
            max_lon: 1.0,
        };
        assert!(GeoRegion::new("x", bbox).is_err());
        let bad = parse_rules(r#"[{"channel":"a","kind":"threshold","template":"t"}]"#).unwrap();
        assert!(SignalInterpreter::new(bad, vec![]).is_err());
    }

    #[test]
    fn rules_file_round_trip() {
        let rules = &SignalInterpreter::bundled().rules;
        let json = serde_json::to_string(rules).unwrap();
        assert_eq!(&parse_rules(&json).unwrap(), rules);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn interpretation_is_pure(
            speed in proptest::collection::vec(0.0f64..40.0, 1..30),
            lat in 40.0f64..70.0,
            lon in -5.0f64..25.0,
            brake in 0.0f64..1.0,
        ) {
            let n = speed.len();
            let t = unified(&[
                ("velocity", speed),
                ("latitude", vec![lat; n]),
                ("longitude", vec![lon; n]),
                ("brake_pedal", vec![brake; n]),
            ]);
            let a = SignalInterpreter::bundled().describe(&t).unwrap();
            let b = SignalInterpreter::bundled().describe(&t.clone()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
