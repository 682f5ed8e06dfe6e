//! Chart code seeds: loading, validation and the offline synthesizer.
//!
//! A seed fixes what is hard to randomize (theme, units, value range, label
//! vocabulary, palette); the composer samples everything else.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::LazyLock;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::palette::BUILTIN_PALETTE_COUNT;
use crate::rng::{split_rng, ChartRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartType {
    Line,
    Bar,
    HorizontalBar,
    Pie,
    Scatter,
}

impl ChartType {
    pub const ALL: [ChartType; 5] = [
        ChartType::Line,
        ChartType::Bar,
        ChartType::HorizontalBar,
        ChartType::Pie,
        ChartType::Scatter,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChartType::Line => "line",
            ChartType::Bar => "bar",
            ChartType::HorizontalBar => "horizontal_bar",
            ChartType::Pie => "pie",
            ChartType::Scatter => "scatter",
        }
    }

    /// Phrase used in identity questions ("Is the image a ... chart?").
    pub fn phrase(self) -> &'static str {
        match self {
            ChartType::Line => "line",
            ChartType::Bar => "vertical bar",
            ChartType::HorizontalBar => "horizontal bar",
            ChartType::Pie => "pie",
            ChartType::Scatter => "scatter",
        }
    }

    pub fn is_cartesian(self) -> bool {
        self != ChartType::Pie
    }

    pub fn is_bar(self) -> bool {
        matches!(self, ChartType::Bar | ChartType::HorizontalBar)
    }

    pub fn parse(s: &str) -> Option<ChartType> {
        ChartType::ALL.iter().copied().find(|t| t.as_str() == s)
    }
}

impl std::fmt::Display for ChartType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    ContinuousNumeric,
    ContinuousTemporal,
    Categorical,
}

impl LabelKind {
    pub fn is_continuous(self) -> bool {
        self != LabelKind::Categorical
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisDescriptor {
    pub topic: String,
    pub unit: String,
    pub label_kind: LabelKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vocabulary: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
}

fn default_precision() -> u8 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSeed {
    pub seed_id: String,
    pub chart_type: ChartType,
    pub title: String,
    pub domain_tag: String,
    pub x_axis: AxisDescriptor,
    pub y_axis: AxisDescriptor,
    pub series_vocabulary: Vec<String>,
    pub value_range: [f64; 2],
    pub palette_id: String,
    /// Decimal places of every sampled value.
    #[serde(default = "default_precision")]
    pub precision: u8,
}

pub const MIN_SERIES_VOCABULARY: usize = 4;
pub const MAX_PRECISION: u8 = 4;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Every violated seed invariant; an empty report means the seed is valid.
pub fn validate_seed(seed: &ChartSeed) -> ValidationReport {
    let mut v = Vec::new();
    let texts = [
        ("seed_id", &seed.seed_id),
        ("title", &seed.title),
        ("domain_tag", &seed.domain_tag),
        ("palette_id", &seed.palette_id),
        ("x_axis.topic", &seed.x_axis.topic),
        ("y_axis.topic", &seed.y_axis.topic),
        ("y_axis.unit", &seed.y_axis.unit),
    ];
    for (name, text) in texts {
        if text.trim().is_empty() {
            v.push(format!("empty field {name}"));
        }
    }

    let [lo, hi] = seed.value_range;
    if !lo.is_finite() || !hi.is_finite() {
        v.push("value_range not finite".to_string());
    } else if lo >= hi {
        v.push("value_range inverted".to_string());
    } else if seed.precision <= MAX_PRECISION {
        let scale = 10f64.powi(i32::from(seed.precision));
        if (lo * scale).ceil() > (hi * scale).floor() {
            v.push("value_range holds no value at the declared precision".to_string());
        }
    }
    if seed.precision > MAX_PRECISION {
        v.push(format!("precision > {MAX_PRECISION}"));
    }
    if let Some([ylo, yhi]) = seed.y_axis.range {
        if !(ylo.is_finite() && yhi.is_finite() && ylo < yhi) {
            v.push("y_axis.range invalid".to_string());
        }
    }

    if seed.series_vocabulary.len() < MIN_SERIES_VOCABULARY {
        v.push(format!("vocabulary < {MIN_SERIES_VOCABULARY}"));
    }
    if seed.series_vocabulary.iter().any(|s| s.trim().is_empty()) {
        v.push("empty series label".to_string());
    }
    if has_duplicates(&seed.series_vocabulary) {
        v.push("duplicate series label".to_string());
    }
    if seed.x_axis.vocabulary.iter().any(|s| s.trim().is_empty()) {
        v.push("empty x label".to_string());
    }
    if has_duplicates(&seed.x_axis.vocabulary) {
        v.push("duplicate x label".to_string());
    }

    match seed.chart_type {
        ChartType::Pie => {
            if seed.value_range != [0.0, 100.0] {
                v.push("pie value_range must be [0, 100]".to_string());
            }
            if seed.x_axis.vocabulary.is_empty() {
                v.push("pie needs a series name in x_axis.vocabulary".to_string());
            }
        }
        _ => {
            if seed.x_axis.vocabulary.len() < 2 {
                v.push("x_axis vocabulary < 2".to_string());
            }
        }
    }
    if seed.chart_type == ChartType::Scatter && seed.x_axis.label_kind != LabelKind::ContinuousNumeric
    {
        v.push("scatter x axis must be continuous-numeric".to_string());
    }

    ValidationReport { violations: v }
}

fn has_duplicates(items: &[String]) -> bool {
    let mut seen = HashSet::new();
    items.iter().any(|s| !seen.insert(s.as_str()))
}

#[derive(Debug, Error)]
pub enum SeedError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no valid seeds in {path} ({rejected} rejected)")]
    EmptyCatalog { path: String, rejected: usize },
    #[error("unknown domain tag {0:?}")]
    UnknownDomain(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub line: usize,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct SeedCatalog {
    pub seeds: Vec<ChartSeed>,
    pub rejected: Vec<Rejection>,
}

impl SeedCatalog {
    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn get(&self, seed_id: &str) -> Option<&ChartSeed> {
        self.seeds.iter().find(|s| s.seed_id == seed_id)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.seeds {
            out.push_str(&serde_json::to_string(s).expect("seed serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), SeedError> {
        fs::write(path, self.to_jsonl()).map_err(|source| SeedError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Read a line-delimited seed file, keeping only seeds that validate.
pub fn load_seeds(path: &Path) -> Result<SeedCatalog, SeedError> {
    let io_err = |source| SeedError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = fs::File::open(path).map_err(io_err)?;
    let mut catalog = SeedCatalog::default();
    let mut ids = HashSet::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let reasons = match serde_json::from_str::<ChartSeed>(&line) {
            Ok(seed) => {
                let mut report = validate_seed(&seed);
                if ids.contains(&seed.seed_id) {
                    report.violations.push("duplicate seed_id".to_string());
                }
                if report.is_valid() {
                    ids.insert(seed.seed_id.clone());
                    catalog.seeds.push(seed);
                    continue;
                }
                report.violations
            }
            Err(e) => vec![format!("malformed record: {e}")],
        };
        log::warn!("rejected seed on line {}: {}", n + 1, reasons.join("; "));
        catalog.rejected.push(Rejection { line: n + 1, reasons });
    }
    if catalog.seeds.is_empty() {
        return Err(SeedError::EmptyCatalog {
            path: path.display().to_string(),
            rejected: catalog.rejected.len(),
        });
    }
    Ok(catalog)
}

// Built-in theme tables.

#[derive(Debug, Deserialize)]
struct Measure {
    name: String,
    unit: String,
    range: [f64; 2],
    precision: u8,
}

#[derive(Debug, Deserialize)]
struct Domain {
    tag: String,
    subjects: Vec<String>,
    measures: Vec<Measure>,
    entity_topic: String,
    entities: Vec<String>,
    category_topic: String,
    categories: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct TemporalAxis {
    granularity: String,
    topic: String,
    labels: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct NumericAxis {
    topic: String,
    unit: String,
    labels: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct AxisTables {
    temporal: Vec<TemporalAxis>,
    numeric: Vec<NumericAxis>,
}

static DOMAINS: LazyLock<Vec<Domain>> = LazyLock::new(|| {
    serde_json::from_str(include_str!("../data/domains.json")).expect("domains.json is valid")
});

static AXES: LazyLock<AxisTables> = LazyLock::new(|| {
    serde_json::from_str(include_str!("../data/axes.json")).expect("axes.json is valid")
});

pub fn builtin_domains() -> Vec<&'static str> {
    DOMAINS.iter().map(|d| d.tag.as_str()).collect()
}

/// Contiguous window of `labels` with a random start and length in `[min_len, max_len]`.
fn window(rng: &mut ChartRng, labels: &[String], min_len: usize, max_len: usize) -> Vec<String> {
    let max_len = max_len.min(labels.len());
    let min_len = min_len.min(max_len);
    let len = rng.random_range(min_len..=max_len);
    let start = rng.random_range(0..=labels.len() - len);
    labels[start..start + len].to_vec()
}

/// Narrow `range` by up to 30% of its span on each side, snapped to the precision grid.
fn narrow(rng: &mut ChartRng, [lo, hi]: [f64; 2], precision: u8) -> [f64; 2] {
    let span = hi - lo;
    let scale = 10f64.powi(i32::from(precision));
    let new_lo = ((lo + rng.random_range(0.0..0.3) * span) * scale).round() / scale;
    let new_hi = ((hi - rng.random_range(0.0..0.3) * span) * scale).round() / scale;
    if new_lo < new_hi {
        [new_lo, new_hi]
    } else {
        [lo, hi]
    }
}

/// Deterministic stand-in for externally authored seeds.
pub fn synthesize_seed(
    rng: &mut ChartRng,
    chart_type: ChartType,
    domain_tag: &str,
) -> Result<ChartSeed, SeedError> {
    let domain = DOMAINS
        .iter()
        .find(|d| d.tag == domain_tag)
        .ok_or_else(|| SeedError::UnknownDomain(domain_tag.to_string()))?;
    let subject = domain.subjects.choose(rng).expect("non-empty subjects");
    let measure = domain.measures.choose(rng).expect("non-empty measures");
    let palette_id = format!("p{:03}", rng.random_range(0..BUILTIN_PALETTE_COUNT));
    let tag: u32 = rng.random();
    let seed_id = format!("{}-{}-{tag:08x}", domain.tag, chart_type.as_str());

    let y_numeric = |measure: &Measure| AxisDescriptor {
        topic: measure.name.clone(),
        unit: measure.unit.clone(),
        label_kind: LabelKind::ContinuousNumeric,
        vocabulary: Vec::new(),
        range: Some(measure.range),
    };

    let temporal = |rng: &mut ChartRng| {
        let axis = AXES.temporal.choose(rng).expect("temporal axes");
        let labels = window(rng, &axis.labels, 6, 12);
        (
            axis.granularity.clone(),
            AxisDescriptor {
                topic: axis.topic.clone(),
                unit: String::new(),
                label_kind: LabelKind::ContinuousTemporal,
                vocabulary: labels,
                range: None,
            },
        )
    };
    let categorical = |rng: &mut ChartRng| {
        let mut labels = domain.categories.clone();
        labels.truncate(rng.random_range(6..=labels.len()));
        AxisDescriptor {
            topic: domain.category_topic.clone(),
            unit: String::new(),
            label_kind: LabelKind::Categorical,
            vocabulary: labels,
            range: None,
        }
    };

    let (title, x_axis, y_axis, value_range, precision) = match chart_type {
        ChartType::Line => {
            let (gran, x) = temporal(rng);
            let range = narrow(rng, measure.range, measure.precision);
            (
                format!("{gran} {subject} {}", measure.name),
                x,
                y_numeric(measure),
                range,
                measure.precision,
            )
        }
        ChartType::Bar | ChartType::HorizontalBar => {
            let use_temporal = chart_type == ChartType::Bar && rng.random_bool(0.5);
            let range = narrow(rng, measure.range, measure.precision);
            if use_temporal {
                let (gran, x) = temporal(rng);
                (
                    format!("{gran} {subject} {}", measure.name),
                    x,
                    y_numeric(measure),
                    range,
                    measure.precision,
                )
            } else {
                let x = categorical(rng);
                (
                    format!("{subject} {} by {}", measure.name, domain.category_topic),
                    x,
                    y_numeric(measure),
                    range,
                    measure.precision,
                )
            }
        }
        ChartType::Scatter => {
            let axis = AXES.numeric.choose(rng).expect("numeric axes");
            let labels = window(rng, &axis.labels, 6, 12);
            let range = narrow(rng, measure.range, measure.precision);
            (
                format!("{subject} {} vs {}", measure.name, axis.topic),
                AxisDescriptor {
                    topic: axis.topic.clone(),
                    unit: axis.unit.clone(),
                    label_kind: LabelKind::ContinuousNumeric,
                    vocabulary: labels,
                    range: None,
                },
                y_numeric(measure),
                range,
                measure.precision,
            )
        }
        ChartType::Pie => {
            let name = format!("{subject} {}", measure.name);
            (
                format!("{name} Share by {}", domain.entity_topic),
                AxisDescriptor {
                    topic: domain.entity_topic.clone(),
                    unit: String::new(),
                    label_kind: LabelKind::Categorical,
                    vocabulary: vec![name],
                    range: None,
                },
                AxisDescriptor {
                    topic: "Share".to_string(),
                    unit: "%".to_string(),
                    label_kind: LabelKind::ContinuousNumeric,
                    vocabulary: Vec::new(),
                    range: Some([0.0, 100.0]),
                },
                [0.0, 100.0],
                1,
            )
        }
    };

    Ok(ChartSeed {
        seed_id,
        chart_type,
        title,
        domain_tag: domain.tag.clone(),
        x_axis,
        y_axis,
        series_vocabulary: domain.entities.clone(),
        value_range,
        palette_id,
        precision,
    })
}

/// `count` synthesized seeds cycling through the chart types, each drawn
/// from its own split stream of `master_seed`.
pub fn synthesize_catalog(master_seed: u64, count: usize) -> SeedCatalog {
    let domains = builtin_domains();
    let seeds = (0..count)
        .map(|i| {
            let mut rng = split_rng(master_seed, "seed", i as u64);
            let chart_type = ChartType::ALL[i % ChartType::ALL.len()];
            let domain = *domains.choose(&mut rng).expect("domains");
            let mut seed = synthesize_seed(&mut rng, chart_type, domain).expect("built-in domain");
            seed.seed_id = format!("s{i:06}-{}-{}", domain, chart_type.as_str());
            seed
        })
        .collect();
    SeedCatalog {
        seeds,
        rejected: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    pub(crate) fn fixture_seed() -> ChartSeed {
        ChartSeed {
            seed_id: "fixture".into(),
            chart_type: ChartType::Line,
            title: "Monthly Medication Costs".into(),
            domain_tag: "healthcare".into(),
            x_axis: AxisDescriptor {
                topic: "Month".into(),
                unit: String::new(),
                label_kind: LabelKind::ContinuousTemporal,
                vocabulary: ["Jan", "Feb", "Mar", "Apr", "May", "Jun"].map(String::from).to_vec(),
                range: None,
            },
            y_axis: AxisDescriptor {
                topic: "Costs".into(),
                unit: "USD".into(),
                label_kind: LabelKind::ContinuousNumeric,
                vocabulary: vec![],
                range: Some([50.0, 100.0]),
            },
            series_vocabulary: ["Medication", "Insulin", "Aspirin", "Statins"].map(String::from).to_vec(),
            value_range: [50.0, 100.0],
            palette_id: "p000".into(),
            precision: 1,
        }
    }

    #[test]
    fn conforming_seed_has_empty_report() {
        assert!(validate_seed(&fixture_seed()).is_valid());
    }

    #[test]
    fn inverted_range_is_reported() {
        let mut s = fixture_seed();
        s.value_range = [100.0, 50.0];
        let r = validate_seed(&s);
        assert!(r.violations.contains(&"value_range inverted".to_string()));
    }

    #[test]
    fn short_pie_vocabulary_is_reported() {
        let mut s = fixture_seed();
        s.chart_type = ChartType::Pie;
        s.value_range = [0.0, 100.0];
        s.series_vocabulary.truncate(2);
        let r = validate_seed(&s);
        assert!(r.violations.contains(&"vocabulary < 4".to_string()));
    }

    #[test]
    fn synthesis_is_deterministic() {
        let a = synthesize_seed(&mut rng_from_seed(42), ChartType::Line, "economics").unwrap();
        let b = synthesize_seed(&mut rng_from_seed(42), ChartType::Line, "economics").unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn synthesized_pie_is_valid() {
        let s = synthesize_seed(&mut rng_from_seed(42), ChartType::Pie, "economics").unwrap();
        assert_eq!(s.chart_type, ChartType::Pie);
        assert!(validate_seed(&s).is_valid(), "{:?}", validate_seed(&s));
    }

    #[test]
    fn unknown_domain_is_not_found() {
        let err = synthesize_seed(&mut rng_from_seed(1), ChartType::Bar, "astrology").unwrap_err();
        assert!(matches!(err, SeedError::UnknownDomain(_)));
    }

    #[test]
    fn builtin_tables_meet_size_floor() {
        assert!(DOMAINS.len() >= 10);
        for d in DOMAINS.iter() {
            assert!(d.subjects.len() * d.measures.len() >= 20, "{}", d.tag);
            assert!(d.entities.len() >= MIN_SERIES_VOCABULARY);
            assert!(d.categories.len() >= 6);
        }
    }

    #[test]
    fn synthesized_titles_are_diverse() {
        // Threshold from a seeded run: 1000 draws give several hundred
        // distinct titles; 50 is the contractual floor.
        let domains = builtin_domains();
        let mut titles = HashSet::new();
        for i in 0..1000u64 {
            let mut rng = split_rng(9, "titles", i);
            let t = ChartType::ALL[(i % 5) as usize];
            let d = domains[(i as usize / 5) % domains.len()];
            let s = synthesize_seed(&mut rng, t, d).unwrap();
            assert!(validate_seed(&s).is_valid(), "{:?}", validate_seed(&s));
            titles.insert(s.title);
        }
        assert!(titles.len() >= 50, "only {} distinct titles", titles.len());
    }
}
