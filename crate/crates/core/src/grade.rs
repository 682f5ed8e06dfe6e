//! Strict / flex grading and accuracy tables.
//!
//! Strict: numbers equal (up to float noise), text equal after
//! normalization, lists equal element-wise in order. Flex: numbers within 5%
//! of gold (an absolute 1e-9 when gold is 0), lists element-wise within 5%;
//! text and counts always fall back to strict. Axis labels, years included,
//! are gold text and therefore always strict.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::answer::{parse_number, Answer, Normalized, Tolerance};
use crate::seed::ChartType;

pub const FLEX_RELATIVE: f64 = 0.05;
pub const ZERO_EPSILON: f64 = 1e-9;
const FLOAT_NOISE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalClass {
    Direct,
    Complex,
}

fn strict_eq(p: f64, g: f64) -> bool {
    (p - g).abs() <= FLOAT_NOISE * g.abs().max(1.0)
}

fn flex_eq(p: f64, g: f64) -> bool {
    if g == 0.0 {
        p.abs() <= ZERO_EPSILON
    } else {
        (p - g).abs() <= FLEX_RELATIVE * g.abs() * (1.0 + 1e-12)
    }
}

/// Grade a normalized prediction.
pub fn grade(predicted: &Normalized, gold: &Answer, tolerance: Tolerance) -> bool {
    let num_eq = |p: f64, g: f64| match tolerance {
        Tolerance::Strict => strict_eq(p, g),
        Tolerance::Flex => flex_eq(p, g),
    };
    match (gold, predicted) {
        (Answer::Number(g), Normalized::Number(p)) => num_eq(*p, *g),
        (Answer::Count(g), Normalized::Number(p)) => strict_eq(*p, *g as f64),
        (Answer::List(g), Normalized::List(p)) => {
            g.len() == p.len() && g.iter().zip(p).all(|(g, p)| num_eq(*p, *g))
        }
        (Answer::List(g), Normalized::Number(p)) => g.len() == 1 && num_eq(*p, g[0]),
        (Answer::Text(g), Normalized::Text(p)) => {
            let g = crate::answer::clean_text(g);
            if g == *p {
                return true;
            }
            // "25 years" against the label "25": compare as numbers, strictly.
            match (parse_number(&g), parse_number(p)) {
                (Some(a), Some(b)) => g.parse::<f64>().is_ok() && strict_eq(a, b),
                _ => false,
            }
        }
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeRecord {
    pub qa_id: String,
    pub chart_id: String,
    pub predicted: Normalized,
    pub gold: Answer,
    pub tolerance: Tolerance,
    pub correct: bool,
    pub chart_type: ChartType,
    pub retrieval_class: RetrievalClass,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

impl Cell {
    fn add(&mut self, ok: bool) {
        self.total += 1;
        self.correct += usize::from(ok);
        self.accuracy = self.correct as f64 / self.total as f64;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassColumn {
    Direct,
    Complex,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub chart_type: ChartType,
    pub class: ClassColumn,
    #[serde(flatten)]
    pub cell: Cell,
}

/// Accuracy overall and per chart type x {direct, complex, all}. Cells with
/// no records are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub overall: Cell,
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn cell(&self, chart_type: ChartType, class: ClassColumn) -> Option<&Cell> {
        self.rows
            .iter()
            .find(|r| r.chart_type == chart_type && r.class == class)
            .map(|r| &r.cell)
    }
}

pub fn aggregate(records: &[GradeRecord]) -> Report {
    let mut overall = Cell::default();
    let mut cells: BTreeMap<(usize, ClassColumn), Cell> = BTreeMap::new();
    let type_index = |t: ChartType| ChartType::ALL.iter().position(|c| *c == t).unwrap();
    for r in records {
        overall.add(r.correct);
        let class = match r.retrieval_class {
            RetrievalClass::Direct => ClassColumn::Direct,
            RetrievalClass::Complex => ClassColumn::Complex,
        };
        let t = type_index(r.chart_type);
        cells.entry((t, class)).or_default().add(r.correct);
        cells.entry((t, ClassColumn::All)).or_default().add(r.correct);
    }
    Report {
        overall,
        rows: cells
            .into_iter()
            .map(|((t, class), cell)| ReportRow {
                chart_type: ChartType::ALL[t],
                class,
                cell,
            })
            .collect(),
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<16} {:>16} {:>16} {:>16}", "chart type", "direct", "complex", "all")?;
        let show = |c: Option<&Cell>| match c {
            Some(c) => format!("{:.1}% ({}/{})", 100.0 * c.accuracy, c.correct, c.total),
            None => "-".to_string(),
        };
        for t in ChartType::ALL {
            if self.cell(t, ClassColumn::All).is_none() {
                continue;
            }
            writeln!(
                f,
                "{:<16} {:>16} {:>16} {:>16}",
                t.as_str(),
                show(self.cell(t, ClassColumn::Direct)),
                show(self.cell(t, ClassColumn::Complex)),
                show(self.cell(t, ClassColumn::All))
            )?;
        }
        write!(f, "{:<16} {:>50}", "overall", show(Some(&self.overall)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answer::{normalize_answer, AnswerKind};
    use proptest::prelude::*;

    fn n(v: f64) -> Normalized {
        Normalized::Number(v)
    }

    #[test]
    fn strict_and_flex_boundaries() {
        assert!(!grade(&n(1995.0), &Answer::Number(2008.0), Tolerance::Strict));
        assert!(grade(&n(104.0), &Answer::Number(100.0), Tolerance::Flex));
        assert!(!grade(&n(106.0), &Answer::Number(100.0), Tolerance::Flex));
        assert!(grade(&n(1e-12), &Answer::Number(0.0), Tolerance::Flex));
        assert!(!grade(&n(1e-6), &Answer::Number(0.0), Tolerance::Flex));
        assert!(grade(&n(105.0), &Answer::Number(100.0), Tolerance::Flex));
    }

    #[test]
    fn text_is_case_folded() {
        let pred = normalize_answer("blue", AnswerKind::ColorName);
        assert!(grade(&pred, &Answer::Text("Blue".into()), Tolerance::Strict));
        let pred = normalize_answer("25 years", AnswerKind::LabelText);
        assert!(grade(&pred, &Answer::Text("25".into()), Tolerance::Strict));
        let pred = normalize_answer("1995", AnswerKind::LabelText);
        assert!(!grade(&pred, &Answer::Text("2008".into()), Tolerance::Flex));
    }

    #[test]
    fn lists_keep_order() {
        let gold = Answer::List(vec![1.0, 2.0, 3.0]);
        assert!(grade(&Normalized::List(vec![1.0, 2.0, 3.0]), &gold, Tolerance::Strict));
        assert!(!grade(&Normalized::List(vec![3.0, 2.0, 1.0]), &gold, Tolerance::Strict));
        assert!(grade(&Normalized::List(vec![1.04, 2.0, 2.9]), &gold, Tolerance::Flex));
        assert!(!grade(&Normalized::List(vec![1.0, 2.0]), &gold, Tolerance::Flex));
    }

    #[test]
    fn unparseable_is_wrong() {
        assert!(!grade(&Normalized::Unparseable("n/a".into()), &Answer::Number(1.0), Tolerance::Flex));
    }

    fn record(t: ChartType, c: RetrievalClass, ok: bool) -> GradeRecord {
        GradeRecord {
            qa_id: String::new(),
            chart_id: String::new(),
            predicted: n(0.0),
            gold: Answer::Number(0.0),
            tolerance: Tolerance::Strict,
            correct: ok,
            chart_type: t,
            retrieval_class: c,
        }
    }

    #[test]
    fn aggregate_counts_and_absent_cells() {
        let recs = vec![
            record(ChartType::Line, RetrievalClass::Direct, true),
            record(ChartType::Line, RetrievalClass::Direct, true),
            record(ChartType::Line, RetrievalClass::Direct, false),
            record(ChartType::Pie, RetrievalClass::Direct, true),
        ];
        let r = aggregate(&recs);
        assert_eq!(r.overall.accuracy, 0.75);
        assert!(r.cell(ChartType::Line, ClassColumn::Complex).is_none());
        assert!(r.cell(ChartType::Bar, ClassColumn::All).is_none());
        let line = r.cell(ChartType::Line, ClassColumn::All).unwrap();
        assert_eq!((line.correct, line.total), (2, 3));
    }

    proptest! {
        #[test]
        fn strict_implies_flex(g in -1.0e6f64..1.0e6, d in -1.0f64..1.0) {
            let p = g + d;
            if grade(&n(p), &Answer::Number(g), Tolerance::Strict) {
                prop_assert!(grade(&n(p), &Answer::Number(g), Tolerance::Flex));
            }
        }

        #[test]
        fn gold_grades_itself(g in -1.0e6f64..1.0e6, prec in 0u8..4) {
            let g = crate::chart::snap(g, prec);
            let gold = Answer::Number(g);
            let pred = normalize_answer(&gold.render(prec), AnswerKind::Number);
            prop_assert!(grade(&pred, &gold, Tolerance::Strict));
            prop_assert!(grade(&pred, &gold, Tolerance::Flex));
        }
    }
}
