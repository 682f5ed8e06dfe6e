//! Concrete chart description and its exact ground truth.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::color::{ColorName, Rgb};
use crate::seed::{ChartType, LabelKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineStyle {
    Solid,
    Dashed,
}

impl LineStyle {
    pub fn as_str(self) -> &'static str {
        match self {
            LineStyle::Solid => "solid",
            LineStyle::Dashed => "dashed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BorderType {
    Solid,
    Dashed,
    None,
}

impl BorderType {
    pub fn as_str(self) -> &'static str {
        match self {
            BorderType::Solid => "solid",
            BorderType::Dashed => "dashed",
            BorderType::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerShape {
    Circle,
    Square,
    Triangle,
    Diamond,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegendPosition {
    Top,
    Bottom,
    Left,
    Right,
}

impl LegendPosition {
    pub const ALL: [LegendPosition; 4] = [
        LegendPosition::Top,
        LegendPosition::Bottom,
        LegendPosition::Left,
        LegendPosition::Right,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FontFamily {
    Sans,
    Serif,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueLabelPosition {
    Above,
    Inside,
}

/// Which omission pattern the tick sampler chose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TickBranch {
    KeepAll,
    OmitOneOfThree,
    OmitTwoOfFour,
    /// Categorical axes and pies never omit labels.
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub label: String,
    pub rgb: Rgb,
    pub color: ColorName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_style: Option<LineStyle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub border_type: Option<BorderType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marker: Option<MarkerShape>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
    pub x_visible: bool,
    pub y_visible: bool,
}

impl AxisSpec {
    pub fn ticks(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step).round() as i64;
        (0..=n).map(|i| self.min + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub chart_id: String,
    pub seed_id: String,
    pub chart_type: ChartType,
    pub title: String,
    pub title_visible: bool,
    pub x_topic: String,
    pub x_unit: String,
    pub y_topic: String,
    pub y_unit: String,
    pub label_kind: LabelKind,
    pub series: Vec<SeriesSpec>,
    pub x_labels: Vec<String>,
    pub shown_x_labels: Vec<String>,
    pub tick_branch: TickBranch,
    /// Series label to values aligned with `x_labels`. Pies have one
    /// series per sector and a single x label naming the pie.
    pub values: IndexMap<String, Vec<f64>>,
    pub value_range: [f64; 2],
    pub precision: u8,
    pub value_labels_visible: bool,
    pub value_label_position: ValueLabelPosition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<AxisSpec>,
    pub legend_position: LegendPosition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stacked: Option<bool>,
    pub grid_visible: bool,
    pub font: FontFamily,
    pub font_size: u32,
    pub line_width: f64,
    pub bar_width_ratio: f64,
    pub canvas: [u32; 2],
    pub palette_id: String,
    pub background: Rgb,
}

impl ChartSpec {
    pub fn is_stacked(&self) -> bool {
        self.stacked.unwrap_or(false)
    }

    pub fn series_by_label(&self, label: &str) -> Option<&SeriesSpec> {
        self.series.iter().find(|s| s.label == label)
    }

    /// Largest stacked total per x position (or largest single value when unstacked).
    pub fn value_extent(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in self.values.values().flatten() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        if self.is_stacked() {
            for i in 0..self.x_labels.len() {
                let total: f64 = self.values.values().map(|v| v[i]).sum();
                hi = hi.max(total);
            }
        }
        (lo, hi)
    }

    /// Round `v` onto this chart's precision grid.
    pub fn snap(&self, v: f64) -> f64 {
        snap(v, self.precision)
    }
}

pub fn snap(v: f64, precision: u8) -> f64 {
    let scale = 10f64.powi(i32::from(precision));
    (v * scale).round() / scale
}

/// Canonical decimal text with exactly `precision` decimals and no negative zero.
pub fn format_value(v: f64, precision: u8) -> String {
    let s = format!("{:.*}", usize::from(precision), v);
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueLabelMode {
    /// Values are printed on the chart: strict grading.
    Labeled,
    /// Values must be estimated from geometry: flex grading.
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualEntry {
    pub color: ColorName,
    pub rgb: Rgb,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_style: Option<LineStyle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub border_type: Option<BorderType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marker: Option<MarkerShape>,
    pub legend_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extrema {
    pub argmax: String,
    pub argmin: String,
    pub max_tied: bool,
    pub min_tied: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickPlan {
    pub branch: TickBranch,
    pub shown: Vec<String>,
    pub omitted: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub chart_id: String,
    pub chart_type: ChartType,
    pub stacked: bool,
    pub precision: u8,
    pub x_labels: Vec<String>,
    pub data_table: IndexMap<String, IndexMap<String, f64>>,
    pub visual_map: IndexMap<String, VisualEntry>,
    pub extrema: IndexMap<String, Extrema>,
    pub tick_plan: TickPlan,
    pub value_label_mode: ValueLabelMode,
}

/// Leftmost argmax/argmin over `(label, value)` pairs, with tie flags.
pub fn compute_extrema<'a>(points: impl IntoIterator<Item = (&'a str, f64)>) -> Option<Extrema> {
    let mut max: Option<(&str, f64)> = None;
    let mut min: Option<(&str, f64)> = None;
    let mut max_tied = false;
    let mut min_tied = false;
    for (label, v) in points {
        match max {
            None => max = Some((label, v)),
            Some((_, m)) if v > m => {
                max = Some((label, v));
                max_tied = false;
            }
            Some((_, m)) if v == m => max_tied = true,
            _ => {}
        }
        match min {
            None => min = Some((label, v)),
            Some((_, m)) if v < m => {
                min = Some((label, v));
                min_tied = false;
            }
            Some((_, m)) if v == m => min_tied = true,
            _ => {}
        }
    }
    Some(Extrema {
        argmax: max?.0.to_string(),
        argmin: min?.0.to_string(),
        max_tied,
        min_tied,
    })
}

impl GroundTruth {
    /// Re-key the spec's values and visual attributes into the oracle table.
    pub fn from_spec(spec: &ChartSpec) -> GroundTruth {
        let data_table: IndexMap<String, IndexMap<String, f64>> = spec
            .values
            .iter()
            .map(|(series, vals)| {
                let row = spec.x_labels.iter().cloned().zip(vals.iter().copied()).collect();
                (series.clone(), row)
            })
            .collect();
        let visual_map = spec
            .series
            .iter()
            .enumerate()
            .map(|(i, s)| {
                (
                    s.label.clone(),
                    VisualEntry {
                        color: s.color,
                        rgb: s.rgb,
                        line_style: s.line_style,
                        border_type: s.border_type,
                        marker: s.marker,
                        legend_index: i,
                    },
                )
            })
            .collect();
        let extrema = if spec.chart_type == ChartType::Pie {
            // One pseudo-series keyed by the pie name ranks sectors.
            let pie_name = spec.x_labels.first().cloned().unwrap_or_default();
            let points = spec.values.iter().map(|(s, v)| (s.as_str(), v[0]));
            compute_extrema(points)
                .map(|e| IndexMap::from([(pie_name, e)]))
                .unwrap_or_default()
        } else {
            data_table
                .iter()
                .filter_map(|(series, row)| {
                    compute_extrema(row.iter().map(|(x, v)| (x.as_str(), *v)))
                        .map(|e| (series.clone(), e))
                })
                .collect()
        };
        let omitted = spec
            .x_labels
            .iter()
            .filter(|x| !spec.shown_x_labels.contains(x))
            .cloned()
            .collect();
        GroundTruth {
            chart_id: spec.chart_id.clone(),
            chart_type: spec.chart_type,
            stacked: spec.is_stacked(),
            precision: spec.precision,
            x_labels: spec.x_labels.clone(),
            data_table,
            visual_map,
            extrema,
            tick_plan: TickPlan {
                branch: spec.tick_branch,
                shown: spec.shown_x_labels.clone(),
                omitted,
            },
            value_label_mode: if spec.value_labels_visible {
                ValueLabelMode::Labeled
            } else {
                ValueLabelMode::Unlabeled
            },
        }
    }

    pub fn value(&self, series: &str, x: &str) -> Option<f64> {
        self.data_table.get(series)?.get(x).copied()
    }

    pub fn series_labels(&self) -> impl Iterator<Item = &str> {
        self.data_table.keys().map(String::as_str)
    }

    /// For pies: the name shown as `{series_label}` in questions.
    pub fn pie_name(&self) -> &str {
        self.x_labels.first().map(String::as_str).unwrap_or("")
    }
}

pub const PIE_SUM_TOLERANCE: f64 = 1e-6;

/// Every violated ChartSpec / GroundTruth invariant.
pub fn check_chart(spec: &ChartSpec, gt: &GroundTruth) -> Vec<String> {
    let mut v = Vec::new();
    let [lo, hi] = spec.value_range;
    let n = spec.x_labels.len();

    if spec.values.len() != spec.series.len() {
        v.push("values and series differ in count".to_string());
    }
    for (s, (label, vals)) in spec.series.iter().zip(&spec.values) {
        if &s.label != label {
            v.push(format!("series order mismatch at {label}"));
        }
        if vals.len() != n {
            v.push(format!("series {label} has {} values for {n} labels", vals.len()));
        }
        for x in vals {
            if !(lo <= *x && *x <= hi) || !x.is_finite() {
                v.push(format!("value {x} of {label} outside [{lo}, {hi}]"));
            }
            if (snap(*x, spec.precision) - x).abs() > 1e-9 {
                v.push(format!("value {x} of {label} off the precision grid"));
            }
        }
    }

    let mut labels: Vec<&str> = spec.series.iter().map(|s| s.label.as_str()).collect();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() != spec.series.len() {
        v.push("series labels not distinct".to_string());
    }
    let mut colors: Vec<ColorName> = spec.series.iter().map(|s| s.color).collect();
    colors.sort_unstable();
    colors.dedup();
    if colors.len() != spec.series.len() {
        v.push("series color names not distinct".to_string());
    }
    if spec.series.is_empty() {
        v.push("no series".to_string());
    }

    if spec.shown_x_labels.iter().any(|x| !spec.x_labels.contains(x)) {
        v.push("shown_x_labels not a subset of x_labels".to_string());
    }

    if spec.chart_type == ChartType::Pie {
        let total: f64 = spec.values.values().map(|v| v[0]).sum();
        if (total - 100.0).abs() > PIE_SUM_TOLERANCE {
            v.push(format!("pie shares sum to {total}"));
        }
        if spec.values.values().any(|v| v[0] <= 0.0) {
            v.push("pie share not positive".to_string());
        }
        if n != 1 {
            v.push("pie must have exactly one x label".to_string());
        }
        if spec.axis.is_some() || spec.stacked.is_some() {
            v.push("pie carries cartesian options".to_string());
        }
    } else {
        match &spec.axis {
            None => v.push("cartesian chart without axis".to_string()),
            Some(axis) => {
                let (vmin, vmax) = spec.value_extent();
                if axis.step.is_nan() || axis.step <= 0.0 || axis.min >= axis.max {
                    v.push("axis degenerate".to_string());
                }
                if axis.min > vmin + 1e-9 || axis.max < vmax - 1e-9 {
                    v.push(format!(
                        "axis [{}, {}] does not cover data [{vmin}, {vmax}]",
                        axis.min, axis.max
                    ));
                }
            }
        }
        if n < 2 {
            v.push("fewer than two x labels".to_string());
        }
        if spec.stacked.is_some() != spec.chart_type.is_bar() {
            v.push("stacked flag present iff bar chart".to_string());
        }
    }

    let expected = GroundTruth::from_spec(spec);
    if expected.data_table != gt.data_table {
        v.push("data_table differs from spec values".to_string());
    }
    if expected.visual_map != gt.visual_map {
        v.push("visual_map inconsistent with series".to_string());
    }
    if expected.extrema != gt.extrema {
        v.push("extrema not recomputable from data_table".to_string());
    }
    if expected.tick_plan != gt.tick_plan || expected.value_label_mode != gt.value_label_mode {
        v.push("tick plan or label mode inconsistent".to_string());
    }
    if gt.chart_id != spec.chart_id || gt.chart_type != spec.chart_type {
        v.push("ground truth does not join spec".to_string());
    }
    v
}
