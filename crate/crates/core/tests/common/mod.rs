#![allow(dead_code)]

pub mod rederive;
pub mod stub;
pub mod svgcheck;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chartloop_core::chart::{ChartSpec, GroundTruth};
use chartloop_core::compose::{compose_chart, ComposeOptions};
use chartloop_core::palette::PaletteTable;
use chartloop_core::seed::{synthesize_catalog, ChartSeed};

/// Every file under `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Describe how two snapshots differ, or `None` when identical.
pub fn snapshot_diff(a: &BTreeMap<String, Vec<u8>>, b: &BTreeMap<String, Vec<u8>>) -> Option<String> {
    if a.len() != b.len() {
        return Some(format!("{} files vs {} files", a.len(), b.len()));
    }
    for (k, v) in a {
        match b.get(k) {
            None => return Some(format!("{k} missing")),
            Some(w) if w != v => return Some(format!("{k} differs")),
            _ => {}
        }
    }
    None
}

/// `n` composed charts, cycling through a synthesized catalog.
pub fn charts(master: u64, n: usize) -> Vec<(ChartSeed, ChartSpec, GroundTruth)> {
    let catalog = synthesize_catalog(master, 100);
    let palettes = PaletteTable::builtin();
    (0..n)
        .map(|i| {
            let seed = &catalog.seeds[i % catalog.len()];
            let (spec, gt) = compose_chart(seed, &palettes, master.wrapping_mul(1_000_003) + i as u64, &ComposeOptions::default())
                .expect("synthesized seeds compose");
            (seed.clone(), spec, gt)
        })
        .collect()
}

#[derive(serde::Deserialize)]
pub struct FixtureRow {
    pub id: String,
    pub raw: String,
    pub kind: chartloop_core::answer::AnswerKind,
    pub gold: chartloop_core::answer::Answer,
    pub tolerance: chartloop_core::answer::Tolerance,
    pub chart_type: chartloop_core::seed::ChartType,
    pub retrieval_class: chartloop_core::grade::RetrievalClass,
    pub expected: bool,
}

pub fn hand_graded() -> Vec<FixtureRow> {
    include_str!("../fixtures/hand_graded.jsonl")
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Grade the hand-graded fixture; the error lists every disagreement.
pub fn grade_fixture() -> Result<Vec<chartloop_core::grade::GradeRecord>, String> {
    use chartloop_core::answer::normalize_answer;
    use chartloop_core::grade::{grade, GradeRecord};
    let mut bad = Vec::new();
    let mut records = Vec::new();
    for r in hand_graded() {
        let predicted = normalize_answer(&r.raw, r.kind);
        let correct = grade(&predicted, &r.gold, r.tolerance);
        if correct != r.expected {
            bad.push(format!("{} ({:?})", r.id, r.raw));
        }
        records.push(GradeRecord {
            qa_id: r.id,
            chart_id: "fixture".into(),
            predicted,
            gold: r.gold,
            tolerance: r.tolerance,
            correct,
            chart_type: r.chart_type,
            retrieval_class: r.retrieval_class,
        });
    }
    if bad.is_empty() {
        Ok(records)
    } else {
        Err(format!("disagreements: {}", bad.join(", ")))
    }
}
