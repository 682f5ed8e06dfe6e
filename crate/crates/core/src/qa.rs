//! QA pair generation from parametric template families.
//!
//! Templates live in `data/templates.json`: one record per family with its
//! chart types, answer kind, retrieval class, tolerance rule and a list of
//! surface paraphrases. Each paraphrase becomes one template with id
//! `<family>.<index>`. Gold answers are derived from [`GroundTruth`] alone.

use std::collections::{BTreeMap, HashSet};
use std::sync::LazyLock;

use rand::seq::{index, IndexedRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::{Answer, AnswerKind, Tolerance};
use crate::chart::{format_value, BorderType, ChartSpec, GroundTruth, ValueLabelMode};
use crate::grade::RetrievalClass;
use crate::rng::ChartRng;
use crate::seed::ChartType;

pub const DEFAULT_VCOT_RATIO: f64 = 0.20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ValueAtLabel,
    LabelForValue,
    ValuesBottomToTop,
    ValuesAscendingAtLabel,
    ValuesAscendingLeftOf,
    LegendByLineVisual,
    LineStyleOfLegend,
    NthPointOnLine,
    LinesBelowCount,
    PeakXlabelByLegend,
    TroughXlabelByLegend,
    TroughXlabelByVisual,
    PeakXlabelByVisual,
    NthBarFromLeft,
    NthBarFromBottom,
    LongestBarOfColor,
    ShortestBarOfColor,
    BarLeftOfLongest,
    ColorOfLegend,
    LegendByColor,
    SectorCount,
    SectorShareByLabel,
    SectorLabelByShare,
    SectorShareByColor,
    SectorLabelByColor,
    SectorColorByLabel,
    LargestSectorShare,
    SmallestSectorShare,
    ScatterYAtX,
    ScatterXAtY,
    ScatterLegendAtXy,
    LegendCount,
    DistinctColorCount,
    PeakXByTopic,
    TroughXByTopic,
}

impl Family {
    pub fn as_str(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceRule {
    Strict,
    Flex,
    ValueLabelDependent,
}

#[derive(Debug, Clone, Deserialize)]
struct FamilyRecord {
    family: Family,
    chart_types: Vec<ChartType>,
    answer_kind: AnswerKind,
    retrieval_class: RetrievalClass,
    tolerance_rule: ToleranceRule,
    patterns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QaTemplate {
    pub template_id: String,
    pub family: Family,
    pub chart_types: Vec<ChartType>,
    pub question_pattern: String,
    pub answer_kind: AnswerKind,
    pub retrieval_class: RetrievalClass,
    pub tolerance_rule: ToleranceRule,
}

static TEMPLATES: LazyLock<Vec<QaTemplate>> = LazyLock::new(|| {
    let records: Vec<FamilyRecord> =
        serde_json::from_str(include_str!("../data/templates.json")).expect("bundled templates parse");
    records
        .into_iter()
        .flat_map(|r| {
            r.patterns.clone().into_iter().enumerate().map(move |(i, p)| QaTemplate {
                template_id: format!("{}.{i:02}", r.family.as_str()),
                family: r.family,
                chart_types: r.chart_types.clone(),
                question_pattern: p,
                answer_kind: r.answer_kind,
                retrieval_class: r.retrieval_class,
                tolerance_rule: r.tolerance_rule,
            })
        })
        .collect()
});

pub fn templates() -> &'static [QaTemplate] {
    &TEMPLATES
}

pub fn template(template_id: &str) -> Option<&'static QaTemplate> {
    TEMPLATES.iter().find(|t| t.template_id == template_id)
}

/// All families present in the template table, in table order.
pub fn families() -> Vec<Family> {
    let mut out: Vec<Family> = Vec::new();
    for t in templates() {
        if !out.contains(&t.family) {
            out.push(t.family);
        }
    }
    out
}

fn family_template(family: Family) -> &'static QaTemplate {
    templates()
        .iter()
        .find(|t| t.family == family)
        .expect("every family has a template")
}

pub fn family_answer_kind(family: Family) -> AnswerKind {
    family_template(family).answer_kind
}

pub fn family_retrieval_class(family: Family) -> RetrievalClass {
    family_template(family).retrieval_class
}

pub fn family_chart_types(family: Family) -> &'static [ChartType] {
    &family_template(family).chart_types
}

pub type Bindings = BTreeMap<String, String>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QaError {
    #[error("slot {0} is not bound")]
    Unbound(String),
    #[error("ambiguous lookup: {0}")]
    Ambiguous(String),
    #[error("binding refers to nothing on the chart: {0}")]
    NotFound(String),
    #[error("family {0} does not apply to this chart")]
    Inapplicable(String),
}

fn slot<'a>(b: &'a Bindings, name: &str) -> Result<&'a str, QaError> {
    b.get(name).map(String::as_str).ok_or_else(|| QaError::Unbound(name.to_string()))
}

fn row<'a>(gt: &'a GroundTruth, series: &str) -> Result<&'a indexmap::IndexMap<String, f64>, QaError> {
    gt.data_table
        .get(series)
        .ok_or_else(|| QaError::NotFound(format!("series {series:?}")))
}

fn cell(gt: &GroundTruth, series: &str, x: &str) -> Result<f64, QaError> {
    row(gt, series)?
        .get(x)
        .copied()
        .ok_or_else(|| QaError::NotFound(format!("x label {x:?}")))
}

fn column(gt: &GroundTruth, x: &str) -> Result<Vec<f64>, QaError> {
    gt.series_labels().map(|s| cell(gt, s, x)).collect()
}

fn fmt(gt: &GroundTruth, v: f64) -> String {
    format_value(v, gt.precision)
}

fn unique<'a>(mut hits: impl Iterator<Item = &'a str>, what: &str) -> Result<String, QaError> {
    let first = hits.next().ok_or_else(|| QaError::NotFound(what.to_string()))?;
    if hits.next().is_some() {
        return Err(QaError::Ambiguous(what.to_string()));
    }
    Ok(first.to_string())
}

fn series_by_color(gt: &GroundTruth, color: &str) -> Result<String, QaError> {
    unique(
        gt.visual_map
            .iter()
            .filter(|(_, v)| v.color.as_str() == color)
            .map(|(s, _)| s.as_str()),
        &format!("series colored {color}"),
    )
}

fn series_by_line(gt: &GroundTruth, color: &str, style: &str) -> Result<String, QaError> {
    unique(
        gt.visual_map
            .iter()
            .filter(|(_, v)| v.color.as_str() == color && v.line_style.map(|l| l.as_str()) == Some(style))
            .map(|(s, _)| s.as_str()),
        &format!("{color} {style} line"),
    )
}

fn series_by_bar(gt: &GroundTruth, color: &str, border: &str) -> Result<String, QaError> {
    unique(
        gt.visual_map
            .iter()
            .filter(|(_, v)| v.color.as_str() == color && v.border_type.map(|b| b.as_str()) == Some(border))
            .map(|(s, _)| s.as_str()),
        &format!("{color} bar with {border} border"),
    )
}

fn parse_n(b: &Bindings) -> Result<usize, QaError> {
    slot(b, "n")?
        .parse::<usize>()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| QaError::NotFound("n".into()))
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn extremum_label(gt: &GroundTruth, series: &str, peak: bool) -> Result<String, QaError> {
    let e = gt
        .extrema
        .get(series)
        .ok_or_else(|| QaError::NotFound(format!("extrema of {series:?}")))?;
    if peak {
        if e.max_tied {
            return Err(QaError::Ambiguous(format!("peak of {series:?} is tied")));
        }
        Ok(e.argmax.clone())
    } else {
        if e.min_tied {
            return Err(QaError::Ambiguous(format!("trough of {series:?} is tied")));
        }
        Ok(e.argmin.clone())
    }
}

/// Index of the bar with the largest (or smallest) length in a series.
fn bar_extreme(gt: &GroundTruth, series: &str, longest: bool) -> Result<usize, QaError> {
    let vals: Vec<f64> = row(gt, series)?.values().copied().collect();
    let target = if longest {
        vals.iter().map(|v| v.abs()).fold(f64::NEG_INFINITY, f64::max)
    } else {
        vals.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
    };
    let hits: Vec<usize> = (0..vals.len()).filter(|i| vals[*i].abs() == target).collect();
    if hits.len() != 1 {
        return Err(QaError::Ambiguous(format!("several bars of {series:?} share the extreme length")));
    }
    Ok(hits[0])
}

fn require_types(family: Family, gt: &GroundTruth) -> Result<(), QaError> {
    if family_chart_types(family).contains(&gt.chart_type) {
        Ok(())
    } else {
        Err(QaError::Inapplicable(family.as_str()))
    }
}

/// Compute the gold answer for `family` under `bindings` from ground truth only.
pub fn derive_answer(family: Family, b: &Bindings, gt: &GroundTruth) -> Result<Answer, QaError> {
    require_types(family, gt)?;
    use Family::*;
    let multi = gt.data_table.len() >= 2;
    Ok(match family {
        ValueAtLabel => Answer::Number(cell(gt, slot(b, "legend_label")?, slot(b, "xlabel")?)?),
        LabelForValue => {
            let x = slot(b, "xlabel")?;
            let want = slot(b, "value_label")?;
            let hits: Vec<&str> = gt
                .series_labels()
                .filter(|s| cell(gt, s, x).map(|v| fmt(gt, v) == want).unwrap_or(false))
                .collect();
            Answer::Text(unique(hits.into_iter(), &format!("value {want} at {x}"))?)
        }
        ValuesBottomToTop => {
            let x = slot(b, "xlabel")?;
            if !multi {
                return Err(QaError::Inapplicable("single series".into()));
            }
            match gt.chart_type {
                ChartType::Bar if gt.stacked => Answer::List(column(gt, x)?),
                ChartType::Line => Answer::List(sorted(column(gt, x)?)),
                _ => return Err(QaError::Inapplicable("bars are not stacked".into())),
            }
        }
        ValuesAscendingAtLabel => {
            if !multi {
                return Err(QaError::Inapplicable("single series".into()));
            }
            Answer::List(sorted(column(gt, slot(b, "xlabel")?)?))
        }
        ValuesAscendingLeftOf => {
            if !multi {
                return Err(QaError::Inapplicable("single series".into()));
            }
            let x = slot(b, "xlabel")?;
            let i = gt
                .x_labels
                .iter()
                .position(|l| l == x)
                .ok_or_else(|| QaError::NotFound(x.to_string()))?;
            if i == 0 {
                return Err(QaError::NotFound(format!("nothing left of {x}")));
            }
            Answer::List(sorted(column(gt, &gt.x_labels[i - 1])?))
        }
        LegendByLineVisual => Answer::Text(series_by_line(gt, slot(b, "line_color")?, slot(b, "line_style")?)?),
        LineStyleOfLegend => {
            let s = slot(b, "legend_label")?;
            let v = gt.visual_map.get(s).ok_or_else(|| QaError::NotFound(s.into()))?;
            Answer::Text(v.line_style.ok_or_else(|| QaError::NotFound("line style".into()))?.as_str().into())
        }
        NthPointOnLine => {
            let s = series_by_line(gt, slot(b, "line_color")?, slot(b, "line_style")?)?;
            let n = parse_n(b)?;
            let vals = row(gt, &s)?;
            Answer::Number(*vals.get_index(n - 1).ok_or_else(|| QaError::NotFound(format!("point {n}")))?.1)
        }
        LinesBelowCount => {
            if !multi {
                return Err(QaError::Inapplicable("single series".into()));
            }
            let s = slot(b, "legend_label")?;
            let x = slot(b, "xlabel")?;
            let v = cell(gt, s, x)?;
            if fmt(gt, v) != slot(b, "value_label")? {
                return Err(QaError::NotFound("value_label does not match".into()));
            }
            let others: Vec<f64> = gt
                .series_labels()
                .filter(|o| *o != s)
                .map(|o| cell(gt, o, x))
                .collect::<Result<_, _>>()?;
            if others.contains(&v) {
                return Err(QaError::Ambiguous(format!("lines tie at {x}")));
            }
            Answer::Count(others.iter().filter(|o| **o < v).count() as u64)
        }
        PeakXlabelByLegend => Answer::Text(extremum_label(gt, slot(b, "legend_label")?, true)?),
        TroughXlabelByLegend => Answer::Text(extremum_label(gt, slot(b, "legend_label")?, false)?),
        PeakXlabelByVisual | TroughXlabelByVisual => {
            let s = series_by_line(gt, slot(b, "line_color")?, slot(b, "line_style")?)?;
            Answer::Text(extremum_label(gt, &s, family == PeakXlabelByVisual)?)
        }
        NthBarFromLeft | NthBarFromBottom => {
            let s = series_by_bar(gt, slot(b, "line_color")?, slot(b, "border_type")?)?;
            let n = parse_n(b)?;
            let vals = row(gt, &s)?;
            Answer::Number(*vals.get_index(n - 1).ok_or_else(|| QaError::NotFound(format!("bar {n}")))?.1)
        }
        LongestBarOfColor | ShortestBarOfColor => {
            let s = series_by_color(gt, slot(b, "line_color")?)?;
            let i = bar_extreme(gt, &s, family == LongestBarOfColor)?;
            Answer::Number(*row(gt, &s)?.get_index(i).unwrap().1)
        }
        BarLeftOfLongest => {
            let s = series_by_color(gt, slot(b, "line_color")?)?;
            let n = parse_n(b)?;
            let i = bar_extreme(gt, &s, true)?;
            if n > i {
                return Err(QaError::NotFound(format!("no bar {n} to the left")));
            }
            Answer::Text(gt.x_labels[i - n].clone())
        }
        ColorOfLegend => {
            let s = slot(b, "legend_label")?;
            Answer::Text(gt.visual_map.get(s).ok_or_else(|| QaError::NotFound(s.into()))?.color.as_str().into())
        }
        LegendByColor | SectorLabelByColor => {
            let key = if family == LegendByColor { "line_color" } else { "name_color" };
            Answer::Text(series_by_color(gt, slot(b, key)?)?)
        }
        SectorCount | LegendCount => Answer::Count(gt.data_table.len() as u64),
        DistinctColorCount => {
            let colors: HashSet<_> = gt.visual_map.values().map(|v| v.color).collect();
            Answer::Count(colors.len() as u64)
        }
        SectorShareByLabel => {
            let pie = slot(b, "series_label")?;
            Answer::Number(cell(gt, slot(b, "sector_label")?, pie)?)
        }
        SectorLabelByShare => {
            let pie = slot(b, "series_label")?;
            let want = slot(b, "value_label")?;
            let hits: Vec<&str> = gt
                .series_labels()
                .filter(|s| cell(gt, s, pie).map(|v| fmt(gt, v) == want).unwrap_or(false))
                .collect();
            Answer::Text(unique(hits.into_iter(), &format!("sector with {want}%"))?)
        }
        SectorShareByColor => {
            let s = series_by_color(gt, slot(b, "name_color")?)?;
            Answer::Number(cell(gt, &s, gt.pie_name())?)
        }
        SectorColorByLabel => {
            let s = slot(b, "sector_label")?;
            Answer::Text(gt.visual_map.get(s).ok_or_else(|| QaError::NotFound(s.into()))?.color.as_str().into())
        }
        LargestSectorShare | SmallestSectorShare => {
            let pie = slot(b, "series_label")?;
            let shares: Vec<f64> = gt.series_labels().map(|s| cell(gt, s, pie)).collect::<Result<_, _>>()?;
            let v = if family == LargestSectorShare {
                shares.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            } else {
                shares.iter().copied().fold(f64::INFINITY, f64::min)
            };
            Answer::Number(v)
        }
        ScatterYAtX => Answer::Number(cell(gt, slot(b, "legend_name")?, slot(b, "x_value")?)?),
        ScatterXAtY => {
            let s = slot(b, "legend_name")?;
            let want = slot(b, "y_value")?;
            let r = row(gt, s)?;
            let hits = r.iter().filter(|(_, v)| fmt(gt, **v) == want).map(|(x, _)| x.as_str());
            Answer::Text(unique(hits, &format!("{s} at {want}"))?)
        }
        ScatterLegendAtXy => {
            let x = slot(b, "x_value")?;
            let want = slot(b, "y_value")?;
            let hits: Vec<&str> = gt
                .series_labels()
                .filter(|s| cell(gt, s, x).map(|v| fmt(gt, v) == want).unwrap_or(false))
                .collect();
            Answer::Text(unique(hits.into_iter(), &format!("series at ({x}, {want})"))?)
        }
        PeakXByTopic => Answer::Text(extremum_label(gt, slot(b, "legend_name")?, true)?),
        TroughXByTopic => Answer::Text(extremum_label(gt, slot(b, "legend_name")?, false)?),
    })
}

fn bind(pairs: &[(&str, String)]) -> Bindings {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Every binding of `family`'s slots on this chart, valid or not.
pub fn candidate_bindings(family: Family, gt: &GroundTruth, spec: &ChartSpec) -> Vec<Bindings> {
    use Family::*;
    if !family_chart_types(family).contains(&gt.chart_type) {
        return Vec::new();
    }
    let series: Vec<&str> = gt.series_labels().collect();
    let xs = &gt.x_labels;
    let color = |s: &str| gt.visual_map[s].color.as_str().to_string();
    let style = |s: &str| gt.visual_map[s].line_style.map(|l| l.as_str().to_string()).unwrap_or_default();
    let x_topic = spec.x_topic.clone();
    let y_topic = spec.y_topic.clone();
    let value = |s: &str, x: &str| fmt(gt, gt.value(s, x).unwrap_or(f64::NAN));
    let pie = gt.pie_name().to_string();
    let mut out = Vec::new();
    let each_sx = |f: &mut dyn FnMut(&str, &str)| {
        for s in &series {
            for x in xs {
                f(s, x);
            }
        }
    };
    match family {
        ValueAtLabel => each_sx(&mut |s, x| out.push(bind(&[("legend_label", s.into()), ("xlabel", x.into())]))),
        LabelForValue => {
            each_sx(&mut |s, x| out.push(bind(&[("xlabel", x.into()), ("value_label", value(s, x))])))
        }
        ValuesBottomToTop | ValuesAscendingAtLabel | ValuesAscendingLeftOf => {
            out.extend(xs.iter().map(|x| bind(&[("xlabel", x.clone())])))
        }
        LegendByLineVisual | PeakXlabelByVisual | TroughXlabelByVisual => out.extend(
            series
                .iter()
                .map(|s| bind(&[("line_color", color(s)), ("line_style", style(s))])),
        ),
        LineStyleOfLegend | PeakXlabelByLegend | TroughXlabelByLegend | ColorOfLegend => {
            out.extend(series.iter().map(|s| bind(&[("legend_label", s.to_string())])))
        }
        NthPointOnLine => {
            for s in &series {
                for n in 1..=xs.len() {
                    out.push(bind(&[
                        ("line_color", color(s)),
                        ("line_style", style(s)),
                        ("n", n.to_string()),
                    ]));
                }
            }
        }
        LinesBelowCount => each_sx(&mut |s, x| {
            out.push(bind(&[
                ("legend_label", s.into()),
                ("value_label", value(s, x)),
                ("xlabel", x.into()),
            ]))
        }),
        NthBarFromLeft | NthBarFromBottom => {
            for s in &series {
                let border = match gt.visual_map[*s].border_type {
                    Some(BorderType::Solid) => "solid",
                    Some(BorderType::Dashed) => "dashed",
                    _ => continue,
                };
                for n in 1..=xs.len() {
                    out.push(bind(&[
                        ("border_type", border.into()),
                        ("line_color", color(s)),
                        ("n", n.to_string()),
                    ]));
                }
            }
        }
        LongestBarOfColor | ShortestBarOfColor | LegendByColor => {
            out.extend(series.iter().map(|s| bind(&[("line_color", color(s))])))
        }
        BarLeftOfLongest => {
            for s in &series {
                for n in 1..xs.len() {
                    out.push(bind(&[
                        ("line_color", color(s)),
                        ("n", n.to_string()),
                        ("x_axis_topic", x_topic.clone()),
                    ]));
                }
            }
        }
        SectorCount | LegendCount | DistinctColorCount => out.push(Bindings::new()),
        SectorShareByLabel => out.extend(
            series
                .iter()
                .map(|s| bind(&[("sector_label", s.to_string()), ("series_label", pie.clone())])),
        ),
        SectorLabelByShare => out.extend(
            series
                .iter()
                .map(|s| bind(&[("series_label", pie.clone()), ("value_label", value(s, &pie))])),
        ),
        SectorShareByColor | SectorLabelByColor => {
            out.extend(series.iter().map(|s| bind(&[("name_color", color(s))])))
        }
        SectorColorByLabel => out.extend(series.iter().map(|s| bind(&[("sector_label", s.to_string())]))),
        LargestSectorShare | SmallestSectorShare => out.push(bind(&[("series_label", pie.clone())])),
        ScatterYAtX => each_sx(&mut |s, x| {
            out.push(bind(&[
                ("legend_name", s.into()),
                ("x_value", x.into()),
                ("x_axis_topic", x_topic.clone()),
                ("y_axis_topic", y_topic.clone()),
            ]))
        }),
        ScatterXAtY => each_sx(&mut |s, x| {
            out.push(bind(&[
                ("legend_name", s.into()),
                ("y_value", value(s, x)),
                ("x_axis_topic", x_topic.clone()),
                ("y_axis_topic", y_topic.clone()),
            ]))
        }),
        ScatterLegendAtXy => each_sx(&mut |s, x| {
            out.push(bind(&[
                ("x_value", x.into()),
                ("y_value", value(s, x)),
                ("x_axis_topic", x_topic.clone()),
                ("y_axis_topic", y_topic.clone()),
            ]))
        }),
        PeakXByTopic | TroughXByTopic => out.extend(series.iter().map(|s| {
            bind(&[
                ("legend_name", s.to_string()),
                ("x_axis_topic", x_topic.clone()),
                ("y_axis_topic", y_topic.clone()),
            ])
        })),
    }
    out.sort();
    out.dedup();
    out
}

/// Bindings of `family` whose answer derives without error.
pub fn valid_bindings(family: Family, gt: &GroundTruth, spec: &ChartSpec) -> Vec<(Bindings, Answer)> {
    candidate_bindings(family, gt, spec)
        .into_iter()
        .filter_map(|b| derive_answer(family, &b, gt).ok().map(|a| (b, a)))
        .collect()
}

/// Families with at least one satisfiable binding on this chart.
pub fn applicable_families(gt: &GroundTruth, spec: &ChartSpec) -> Vec<Family> {
    families()
        .into_iter()
        .filter(|f| !valid_bindings(*f, gt, spec).is_empty())
        .collect()
}

pub fn applicable_templates(gt: &GroundTruth, spec: &ChartSpec) -> Vec<String> {
    let fams = applicable_families(gt, spec);
    templates()
        .iter()
        .filter(|t| fams.contains(&t.family))
        .map(|t| t.template_id.clone())
        .collect()
}

pub fn tolerance_for(rule: ToleranceRule, kind: AnswerKind, gt: &GroundTruth) -> Tolerance {
    if !matches!(kind, AnswerKind::Number | AnswerKind::OrderedNumberList) {
        return Tolerance::Strict;
    }
    match rule {
        ToleranceRule::Strict => Tolerance::Strict,
        ToleranceRule::Flex => Tolerance::Flex,
        ToleranceRule::ValueLabelDependent => match gt.value_label_mode {
            ValueLabelMode::Labeled => Tolerance::Strict,
            ValueLabelMode::Unlabeled => Tolerance::Flex,
        },
    }
}

fn ordinal(n: usize) -> String {
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

/// Substitute slots into a question pattern.
pub fn fill(pattern: &str, b: &Bindings) -> String {
    let mut q = pattern.to_string();
    if let Some(n) = b.get("n").and_then(|n| n.parse::<usize>().ok()) {
        q = q.replace("{n}th", &ordinal(n));
    }
    for (k, v) in b {
        q = q.replace(&format!("{{{k}}}"), v);
    }
    if let Some(s) = b.get("legend_label").or_else(|| b.get("legend_name")) {
        q = q.replace("{legend_name}", s).replace("{legend_label}", s);
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaForm {
    DirectAnswer,
    Vcot,
}

pub const DIRECT_INSTRUCTION: &str = "Answer the question using a single word or number.";
pub const VCOT_INSTRUCTION: &str =
    "Read the chart step by step, stating each element you locate, then give the final answer.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaPair {
    pub qa_id: String,
    pub chart_id: String,
    pub template_id: String,
    pub family: Family,
    pub bindings: Bindings,
    pub question: String,
    pub answer_kind: AnswerKind,
    pub gold: Answer,
    pub gold_text: String,
    pub tolerance: Tolerance,
    pub retrieval_class: RetrievalClass,
    pub form: QaForm,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cot_text: Option<String>,
}

/// Step-by-step extraction narrative for a binding, built from the same
/// lookups that produce the gold answer.
pub fn cot_text(family: Family, b: &Bindings, gt: &GroundTruth, gold: &str) -> String {
    use Family::*;
    let g = |k: &str| b.get(k).cloned().unwrap_or_default();
    let color_of = |s: &str| gt.visual_map.get(s).map(|v| v.color.as_str()).unwrap_or("");
    let mut steps: Vec<String> = Vec::new();
    match family {
        ValueAtLabel | ScatterYAtX => {
            let s = b.get("legend_label").or_else(|| b.get("legend_name")).cloned().unwrap_or_default();
            let x = b.get("xlabel").or_else(|| b.get("x_value")).cloned().unwrap_or_default();
            steps.push(format!("Find the legend entry \"{s}\", drawn in {}.", color_of(&s)));
            steps.push(format!("Follow the {} series to the x position \"{x}\".", color_of(&s)));
            steps.push(format!("Read the value there: {gold}."));
        }
        LabelForValue | ScatterLegendAtXy => {
            let x = b.get("xlabel").or_else(|| b.get("x_value")).cloned().unwrap_or_default();
            let v = b.get("value_label").or_else(|| b.get("y_value")).cloned().unwrap_or_default();
            steps.push(format!("Go to the x position \"{x}\"."));
            steps.push(format!("Find the element whose value is {v}; it is drawn in {}.", color_of(gold)));
            steps.push(format!("Match that color in the legend: {gold}."));
        }
        ScatterXAtY => {
            let s = g("legend_name");
            steps.push(format!("Find the legend entry \"{s}\", drawn in {}.", color_of(&s)));
            steps.push(format!("Scan its points for the value {}.", g("y_value")));
            steps.push(format!("Read the x position of that point: {gold}."));
        }
        ValuesBottomToTop | ValuesAscendingAtLabel | ValuesAscendingLeftOf => {
            let x = g("xlabel");
            if family == ValuesAscendingLeftOf {
                let i = gt.x_labels.iter().position(|l| *l == x).unwrap_or(1);
                let left = gt.x_labels.get(i.wrapping_sub(1)).cloned().unwrap_or_default();
                steps.push(format!("Move one tick to the left of \"{x}\", to \"{left}\"."));
            } else {
                steps.push(format!("Go to the x position \"{x}\"."));
            }
            steps.push(format!("Read every series there ({} in total).", gt.data_table.len()));
            steps.push(format!("Order the values as asked: {gold}."));
        }
        LegendByLineVisual | LegendByColor | SectorLabelByColor => {
            let c = b.get("line_color").or_else(|| b.get("name_color")).cloned().unwrap_or_default();
            steps.push(format!("Look for the {c} element{}.", b.get("line_style").map(|s| format!(" with a {s} line")).unwrap_or_default()));
            steps.push(format!("Match it against the legend: {gold}."));
        }
        LineStyleOfLegend | ColorOfLegend | SectorColorByLabel => {
            let s = b.get("legend_label").or_else(|| b.get("sector_label")).cloned().unwrap_or_default();
            steps.push(format!("Find the legend entry \"{s}\"."));
            steps.push(format!("Inspect its swatch: {gold}."));
        }
        NthPointOnLine | NthBarFromLeft | NthBarFromBottom => {
            let c = g("line_color");
            let n: usize = g("n").parse().unwrap_or(1);
            let x = gt.x_labels.get(n.saturating_sub(1)).cloned().unwrap_or_default();
            let dir = if family == NthBarFromBottom { "bottom" } else { "left" };
            steps.push(format!("Pick out the {c} series."));
            steps.push(format!("Count {} from the {dir}; that lands on \"{x}\".", ordinal(n)));
            steps.push(format!("Read its value: {gold}."));
        }
        LinesBelowCount => {
            steps.push(format!("At \"{}\", \"{}\" is at {}.", g("xlabel"), g("legend_label"), g("value_label")));
            steps.push("Compare it with every other line at the same position.".into());
            steps.push(format!("Lines below it: {gold}."));
        }
        PeakXlabelByLegend | TroughXlabelByLegend | PeakXlabelByVisual | TroughXlabelByVisual | PeakXByTopic
        | TroughXByTopic => {
            let which = if matches!(family, PeakXlabelByLegend | PeakXlabelByVisual | PeakXByTopic) {
                "highest"
            } else {
                "lowest"
            };
            let s = b
                .get("legend_label")
                .or_else(|| b.get("legend_name"))
                .cloned()
                .unwrap_or_else(|| format!("{} {}", g("line_color"), g("line_style")));
            steps.push(format!("Trace the series \"{s}\" across the chart."));
            steps.push(format!("Find its {which} point."));
            steps.push(format!("Read the x position below it: {gold}."));
        }
        LongestBarOfColor | ShortestBarOfColor | BarLeftOfLongest => {
            let c = g("line_color");
            let which = if family == ShortestBarOfColor { "shortest" } else { "longest" };
            steps.push(format!("Compare the lengths of all {c} bars."));
            steps.push(format!("Pick the {which} one."));
            if family == BarLeftOfLongest {
                steps.push(format!("Count {} bars to its left.", g("n")));
            }
            steps.push(format!("Answer: {gold}."));
        }
        SectorCount | LegendCount | DistinctColorCount => {
            steps.push("Count the distinct entries shown.".into());
            steps.push(format!("Total: {gold}."));
        }
        SectorShareByLabel | SectorShareByColor => {
            let what = b
                .get("sector_label")
                .cloned()
                .unwrap_or_else(|| format!("the {} sector", g("name_color")));
            steps.push(format!("Locate {what} in the pie."));
            steps.push(format!("Read its share: {gold}."));
        }
        SectorLabelByShare => {
            steps.push(format!("Find the sector holding {} percent.", g("value_label")));
            steps.push(format!("Match its color in the legend: {gold}."));
        }
        LargestSectorShare | SmallestSectorShare => {
            let which = if family == LargestSectorShare { "largest" } else { "smallest" };
            steps.push(format!("Compare the sector sizes and pick the {which}."));
            steps.push(format!("Read its share: {gold}."));
        }
    }
    steps
        .iter()
        .enumerate()
        .map(|(i, s)| format!("Step {}: {s}", i + 1))
        .collect::<Vec<_>>()
        .join(" ")
}

fn make_pair(
    template: &QaTemplate,
    bindings: Bindings,
    gold: Answer,
    gt: &GroundTruth,
    qa_id: String,
    form: QaForm,
) -> QaPair {
    let gold_text = gold.render(gt.precision);
    let cot = (form == QaForm::Vcot).then(|| cot_text(template.family, &bindings, gt, &gold_text));
    QaPair {
        qa_id,
        chart_id: gt.chart_id.clone(),
        template_id: template.template_id.clone(),
        family: template.family,
        question: fill(&template.question_pattern, &bindings),
        bindings,
        answer_kind: template.answer_kind,
        tolerance: tolerance_for(template.tolerance_rule, template.answer_kind, gt),
        retrieval_class: template.retrieval_class,
        gold,
        gold_text,
        form,
        instruction: match form {
            QaForm::DirectAnswer => DIRECT_INSTRUCTION.to_string(),
            QaForm::Vcot => VCOT_INSTRUCTION.to_string(),
        },
        cot_text: cot,
    }
}

/// Instantiate one template with a seeded binding draw.
pub fn instantiate(
    template: &QaTemplate,
    gt: &GroundTruth,
    spec: &ChartSpec,
    rng: &mut ChartRng,
) -> Result<QaPair, QaError> {
    let valid = valid_bindings(template.family, gt, spec);
    let (b, gold) = valid
        .choose(rng)
        .cloned()
        .ok_or_else(|| QaError::Inapplicable(template.template_id.clone()))?;
    let qa_id = format!("{}-{}", gt.chart_id, template.template_id);
    Ok(make_pair(template, b, gold, gt, qa_id, QaForm::DirectAnswer))
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaBatch {
    pub pairs: Vec<QaPair>,
    /// Fewer unique instantiations existed than requested.
    pub shortfall: bool,
}

/// `round(count * ratio)`, half away from zero.
pub fn vcot_count(count: usize, ratio: f64) -> usize {
    (count as f64 * ratio).round() as usize
}

/// vCoT quota for the `index`-th batch of a run so that the running total
/// stays at `round(total * ratio)`.
pub fn vcot_quota(index: u64, count: usize, ratio: f64) -> usize {
    let before = (index as f64 * count as f64 * ratio).round() as i64;
    let after = ((index + 1) as f64 * count as f64 * ratio).round() as i64;
    (after - before).clamp(0, count as i64) as usize
}

pub fn generate_qa_batch(
    gt: &GroundTruth,
    spec: &ChartSpec,
    count: usize,
    vcot_ratio: f64,
    rng: &mut ChartRng,
) -> QaBatch {
    generate_qa_batch_with_quota(gt, spec, count, vcot_count(count, vcot_ratio), rng)
}

/// Generate up to `count` unique pairs, `n_vcot` of them in vCoT form.
/// Families are drawn uniformly, then a binding and a paraphrase.
pub fn generate_qa_batch_with_quota(
    gt: &GroundTruth,
    spec: &ChartSpec,
    count: usize,
    n_vcot: usize,
    rng: &mut ChartRng,
) -> QaBatch {
    let mut pools: Vec<(Family, Vec<(Bindings, Answer)>)> = families()
        .into_iter()
        .map(|f| (f, valid_bindings(f, gt, spec)))
        .filter(|(_, v)| !v.is_empty())
        .collect();
    let mut chosen: Vec<(&'static QaTemplate, Bindings, Answer)> = Vec::with_capacity(count);
    while chosen.len() < count && !pools.is_empty() {
        let fi = rng.random_range(0..pools.len());
        let pool = &mut pools[fi].1;
        let bi = rng.random_range(0..pool.len());
        let (b, gold) = pool.remove(bi);
        let family = pools[fi].0;
        if pools[fi].1.is_empty() {
            pools.remove(fi);
        }
        let variants: Vec<&'static QaTemplate> = templates().iter().filter(|t| t.family == family).collect();
        let t = variants.choose(rng).expect("family has templates");
        chosen.push((t, b, gold));
    }
    let n = chosen.len();
    let vcot: HashSet<usize> = index::sample(rng, n, n_vcot.min(n)).into_iter().collect();
    let pairs = chosen
        .into_iter()
        .enumerate()
        .map(|(j, (t, b, gold))| {
            let form = if vcot.contains(&j) { QaForm::Vcot } else { QaForm::DirectAnswer };
            make_pair(t, b, gold, gt, format!("{}-q{j:02}", gt.chart_id), form)
        })
        .collect();
    QaBatch {
        pairs,
        shortfall: n < count,
    }
}
