//! Sampling a concrete chart from a seed.
//!
//! Style option table (every field is drawn from a closed set):
//!
//! | option                | values                                   |
//! |-----------------------|------------------------------------------|
//! | line width            | 1.5, 2.0, 2.5, 3.0                       |
//! | font family           | sans, serif                              |
//! | font size             | 10, 11, 12, 13, 14                       |
//! | bar width ratio       | 0.5, 0.6, 0.7, 0.8                       |
//! | y tick target         | 4, 5, 6, 8                               |
//! | title visible         | true (p = 0.9), false                    |
//! | value labels          | shown (p = 0.5), hidden                  |
//! | value label position  | above, inside                            |
//! | legend position       | top, bottom, left, right                 |
//! | grid lines            | on (p = 0.5), off                        |
//! | axis line visibility  | x, y independently, visible p = 0.85     |
//! | line style (lines)    | solid, dashed                            |
//! | border (bars)         | solid, dashed, none                      |
//! | marker (scatter)      | circle, square, triangle, diamond        |
//! | stacking (bars)       | on (p = 0.5, needs >= 2 series and lo >= 0) |
//! | series colors         | palette entries, without replacement     |

use indexmap::IndexMap;
use rand::seq::index;
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{
    AxisSpec, BorderType, ChartSpec, FontFamily, GroundTruth, LegendPosition, LineStyle,
    MarkerShape, SeriesSpec, TickBranch, ValueLabelPosition,
};
use crate::color::{ColorName, Rgb};
use crate::palette::{Palette, PaletteError, PaletteTable};
use crate::render::{layout, RenderError};
use crate::rng::{rng_from_seed, ChartRng};
use crate::seed::{ChartSeed, ChartType, LabelKind};

pub const LINE_WIDTHS: [f64; 4] = [1.5, 2.0, 2.5, 3.0];
pub const FONT_SIZES: [u32; 5] = [10, 11, 12, 13, 14];
pub const FONTS: [FontFamily; 2] = [FontFamily::Sans, FontFamily::Serif];
pub const BAR_WIDTH_RATIOS: [f64; 4] = [0.5, 0.6, 0.7, 0.8];
pub const TICK_TARGETS: [usize; 4] = [4, 5, 6, 8];
pub const MARKERS: [MarkerShape; 4] = [
    MarkerShape::Circle,
    MarkerShape::Square,
    MarkerShape::Triangle,
    MarkerShape::Diamond,
];
pub const BORDERS: [BorderType; 3] = [BorderType::Solid, BorderType::Dashed, BorderType::None];
pub const DEFAULT_CANVAS: [u32; 2] = [800, 600];

/// Largest step between consecutive values, as a fraction of the range span.
pub const SMOOTHNESS_BOUND: f64 = 0.35;

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("need {needed} {what} but the seed offers {available}")]
    Capacity {
        what: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("seed {0} is invalid: {1}")]
    InvalidSeed(String, String),
    #[error(transparent)]
    Palette(#[from] PaletteError),
    #[error("chart does not lay out: {0}")]
    Layout(#[from] RenderError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComposeOptions {
    pub canvas: [u32; 2],
}

impl Default for ComposeOptions {
    fn default() -> Self {
        ComposeOptions {
            canvas: DEFAULT_CANVAS,
        }
    }
}

fn grid_bounds(range: [f64; 2], precision: u8) -> (i64, i64, f64) {
    let scale = 10f64.powi(i32::from(precision));
    let lo = (range[0] * scale - 1e-9).ceil() as i64;
    let hi = (range[1] * scale + 1e-9).floor() as i64;
    (lo, hi, scale)
}

/// Bounded random walk on the precision grid inside `range`.
pub fn random_walk(rng: &mut ChartRng, n: usize, range: [f64; 2], precision: u8) -> Vec<f64> {
    let (lo, hi, scale) = grid_bounds(range, precision);
    let max_step = ((SMOOTHNESS_BOUND * (range[1] - range[0]) * scale) + 1e-9).floor() as i64;
    let mut cur = rng.random_range(lo..=hi);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 && max_step > 0 {
            cur = (cur + rng.random_range(-max_step..=max_step)).clamp(lo, hi);
        }
        out.push(cur as f64 / scale);
    }
    out
}

/// Positive shares on the precision grid summing to exactly 100.
pub fn sample_shares(rng: &mut ChartRng, n: usize, precision: u8) -> Vec<f64> {
    let scale = 10f64.powi(i32::from(precision));
    let total = (100.0 * scale).round() as i64;
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..10.0)).collect();
    let wsum: f64 = weights.iter().sum();
    // Largest remainder, with every share at least one grid unit.
    let spare = total - n as i64;
    let exact: Vec<f64> = weights.iter().map(|w| w / wsum * spare as f64).collect();
    let mut units: Vec<i64> = exact.iter().map(|e| e.floor() as i64).collect();
    let mut left = spare - units.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        units[i] += 1;
        left -= 1;
    }
    units.into_iter().map(|u| (u + 1) as f64 / scale).collect()
}

fn max_series(chart_type: ChartType) -> usize {
    match chart_type {
        ChartType::Line => 4,
        ChartType::Bar | ChartType::HorizontalBar | ChartType::Scatter => 3,
        ChartType::Pie => 6,
    }
}

/// Pick series labels and sample their values. For pies `n_points` is the
/// number of sectors and each sector carries a single percentage.
pub fn sample_data(
    seed: &ChartSeed,
    n_points: usize,
    rng: &mut ChartRng,
) -> Result<IndexMap<String, Vec<f64>>, ComposeError> {
    let vocab = &seed.series_vocabulary;
    if seed.chart_type == ChartType::Pie {
        if n_points < 3 {
            return Err(ComposeError::Capacity {
                what: "sectors (minimum 3)",
                needed: 3,
                available: n_points,
            });
        }
        if n_points > vocab.len() {
            return Err(ComposeError::Capacity {
                what: "sector labels",
                needed: n_points,
                available: vocab.len(),
            });
        }
        let picks = index::sample(rng, vocab.len(), n_points).into_vec();
        let shares = sample_shares(rng, n_points, seed.precision);
        return Ok(picks
            .into_iter()
            .zip(shares)
            .map(|(i, s)| (vocab[i].clone(), vec![s]))
            .collect());
    }

    if n_points < 2 {
        return Err(ComposeError::Capacity {
            what: "points (minimum 2)",
            needed: 2,
            available: n_points,
        });
    }
    if n_points > seed.x_axis.vocabulary.len() {
        return Err(ComposeError::Capacity {
            what: "x labels",
            needed: n_points,
            available: seed.x_axis.vocabulary.len(),
        });
    }
    let k = rng.random_range(1..=max_series(seed.chart_type).min(vocab.len()));
    let picks = index::sample(rng, vocab.len(), k).into_vec();
    Ok(picks
        .into_iter()
        .map(|i| {
            let vals = random_walk(rng, n_points, seed.value_range, seed.precision);
            (vocab[i].clone(), vals)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TickDraw {
    pub branch: TickBranch,
    pub shown: Vec<String>,
}

/// Indices omitted by a branch before the endpoint rule is applied.
pub fn omitted_by_branch(branch: TickBranch, i: usize) -> bool {
    match branch {
        TickBranch::KeepAll | TickBranch::NotApplicable => false,
        TickBranch::OmitOneOfThree => i % 3 == 1,
        TickBranch::OmitTwoOfFour => i % 4 == 1 || i % 4 == 3,
    }
}

/// Continuous axes: keep all (p = 0.25), omit one label of every three
/// (p = 0.5), omit two of every four (p = 0.25). Endpoints always stay.
pub fn sample_tick_omission(x_labels: &[String], label_kind: LabelKind, rng: &mut ChartRng) -> TickDraw {
    if !label_kind.is_continuous() {
        return TickDraw {
            branch: TickBranch::NotApplicable,
            shown: x_labels.to_vec(),
        };
    }
    let branch = match rng.random_range(0..4u8) {
        0 => TickBranch::KeepAll,
        1 | 2 => TickBranch::OmitOneOfThree,
        _ => TickBranch::OmitTwoOfFour,
    };
    let last = x_labels.len().saturating_sub(1);
    let shown = x_labels
        .iter()
        .enumerate()
        .filter(|(i, _)| *i == 0 || *i == last || !omitted_by_branch(branch, *i))
        .map(|(_, x)| x.clone())
        .collect();
    TickDraw { branch, shown }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesVisual {
    pub rgb: Rgb,
    pub color: ColorName,
    pub line_style: Option<LineStyle>,
    pub border_type: Option<BorderType>,
    pub marker: Option<MarkerShape>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Style {
    pub series: Vec<SeriesVisual>,
    pub title_visible: bool,
    pub value_labels_visible: bool,
    pub value_label_position: ValueLabelPosition,
    pub legend_position: LegendPosition,
    pub stacked: Option<bool>,
    pub grid_visible: bool,
    pub x_axis_visible: bool,
    pub y_axis_visible: bool,
    pub font: FontFamily,
    pub font_size: u32,
    pub line_width: f64,
    pub bar_width_ratio: f64,
    pub tick_target: usize,
    pub background: Rgb,
}

/// Draw `n` distinct palette entries.
pub fn draw_colors(
    palette: &Palette,
    n: usize,
    rng: &mut ChartRng,
) -> Result<Vec<(Rgb, ColorName)>, ComposeError> {
    if n > palette.entries.len() {
        return Err(ComposeError::Capacity {
            what: "palette colors",
            needed: n,
            available: palette.entries.len(),
        });
    }
    Ok(index::sample(rng, palette.entries.len(), n)
        .into_iter()
        .map(|i| (palette.entries[i].rgb, palette.entries[i].name))
        .collect())
}

pub fn sample_series_visual(chart_type: ChartType, rgb: Rgb, color: ColorName, rng: &mut ChartRng) -> SeriesVisual {
    SeriesVisual {
        rgb,
        color,
        line_style: (chart_type == ChartType::Line).then(|| {
            if rng.random_bool(0.5) {
                LineStyle::Solid
            } else {
                LineStyle::Dashed
            }
        }),
        border_type: chart_type.is_bar().then(|| *BORDERS.choose(rng).unwrap()),
        marker: (chart_type == ChartType::Scatter).then(|| *MARKERS.choose(rng).unwrap()),
    }
}

pub fn sample_style(
    seed: &ChartSeed,
    palette: &Palette,
    n_series: usize,
    rng: &mut ChartRng,
) -> Result<Style, ComposeError> {
    let colors = draw_colors(palette, n_series, rng)?;
    let series = colors
        .into_iter()
        .map(|(rgb, color)| sample_series_visual(seed.chart_type, rgb, color, rng))
        .collect();
    let stacked = seed.chart_type.is_bar().then(|| {
        let want = rng.random_bool(0.5);
        want && n_series >= 2 && seed.value_range[0] >= 0.0
    });
    Ok(Style {
        series,
        title_visible: rng.random_bool(0.9),
        value_labels_visible: rng.random_bool(0.5),
        value_label_position: if rng.random_bool(0.5) {
            ValueLabelPosition::Above
        } else {
            ValueLabelPosition::Inside
        },
        legend_position: *LegendPosition::ALL.choose(rng).unwrap(),
        stacked,
        grid_visible: rng.random_bool(0.5),
        x_axis_visible: rng.random_bool(0.85),
        y_axis_visible: rng.random_bool(0.85),
        font: *FONTS.choose(rng).unwrap(),
        font_size: *FONT_SIZES.choose(rng).unwrap(),
        line_width: *LINE_WIDTHS.choose(rng).unwrap(),
        bar_width_ratio: *BAR_WIDTH_RATIOS.choose(rng).unwrap(),
        tick_target: *TICK_TARGETS.choose(rng).unwrap(),
        background: palette.background,
    })
}

/// Smallest number of decimals that represents `x` exactly (up to 1e-9).
pub fn decimals_of(x: f64) -> usize {
    (0..=8)
        .find(|d| {
            let s = x * 10f64.powi(*d as i32);
            (s - s.round()).abs() < 1e-6
        })
        .unwrap_or(8)
}

/// Axis bounds on a "nice" step (1, 2, 2.5, 5 times a power of ten) covering `[lo, hi]`.
pub fn nice_axis(lo: f64, hi: f64, target_ticks: usize, zero_base: bool) -> (f64, f64, f64) {
    let (mut lo, mut hi) = (lo, hi);
    if zero_base {
        lo = lo.min(0.0);
        hi = hi.max(0.0);
    }
    if hi - lo < 1e-12 {
        let pad = if hi.abs() > 0.0 { hi.abs() * 0.1 } else { 1.0 };
        lo -= pad;
        hi += pad;
    }
    let raw = (hi - lo) / target_ticks.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw * (1.0 - 1e-12))
        .unwrap_or(10.0 * mag);
    let d = decimals_of(step) as u8;
    let mut min = crate::chart::snap((lo / step + 1e-9).floor() * step, d);
    let mut max = crate::chart::snap((hi / step - 1e-9).ceil() * step, d);
    if min > lo {
        min = crate::chart::snap(min - step, d);
    }
    if max < hi {
        max = crate::chart::snap(max + step, d);
    }
    if max <= min {
        max = crate::chart::snap(min + step, d);
    }
    (min, max, step)
}

pub fn axis_for(spec_like: &ChartSpec, target_ticks: usize, x_visible: bool, y_visible: bool) -> AxisSpec {
    let (lo, hi) = spec_like.value_extent();
    let (min, max, step) = nice_axis(lo, hi, target_ticks, spec_like.chart_type.is_bar());
    AxisSpec {
        min,
        max,
        step,
        x_visible,
        y_visible,
    }
}

fn points_range(chart_type: ChartType) -> (usize, usize) {
    match chart_type {
        ChartType::Line => (5, 10),
        ChartType::Bar | ChartType::HorizontalBar => (3, 8),
        ChartType::Scatter => (6, 12),
        ChartType::Pie => (3, 6),
    }
}

pub fn chart_id_for(seed_id: &str, rng_seed: u64) -> String {
    format!("{seed_id}-{rng_seed:016x}")
}

/// Compose one chart. The result depends only on `(seed, rng_seed, options)`
/// and the palette table.
pub fn compose_chart(
    seed: &ChartSeed,
    palettes: &PaletteTable,
    rng_seed: u64,
    options: &ComposeOptions,
) -> Result<(ChartSpec, GroundTruth), ComposeError> {
    let report = crate::seed::validate_seed(seed);
    if !report.is_valid() {
        return Err(ComposeError::InvalidSeed(
            seed.seed_id.clone(),
            report.violations.join("; "),
        ));
    }
    let palette = palettes.get(&seed.palette_id)?;
    let mut rng = rng_from_seed(rng_seed);

    let available = if seed.chart_type == ChartType::Pie {
        seed.series_vocabulary.len()
    } else {
        seed.x_axis.vocabulary.len()
    };
    let (min_n, max_n) = points_range(seed.chart_type);
    let hi = max_n.min(available);
    let lo = min_n.min(hi);
    let mut n_points = rng.random_range(lo..=hi);

    loop {
        let mut attempt = rng.clone();
        match compose_once(seed, palette, n_points, &mut attempt, rng_seed, options) {
            Ok(pair) => return Ok(pair),
            Err(ComposeError::Layout(RenderError::LabelsDoNotFit(_)))
                if n_points > lo.max(2) =>
            {
                n_points -= 1;
            }
            Err(e) => return Err(e),
        }
    }
}

fn compose_once(
    seed: &ChartSeed,
    palette: &Palette,
    n_points: usize,
    rng: &mut ChartRng,
    rng_seed: u64,
    options: &ComposeOptions,
) -> Result<(ChartSpec, GroundTruth), ComposeError> {
    let x_labels: Vec<String> = match (seed.chart_type, seed.x_axis.label_kind) {
        (ChartType::Pie, _) => vec![seed.x_axis.vocabulary[0].clone()],
        (_, kind) if kind.is_continuous() => {
            let vocab = &seed.x_axis.vocabulary;
            let start = rng.random_range(0..=vocab.len() - n_points);
            vocab[start..start + n_points].to_vec()
        }
        _ => {
            let vocab = &seed.x_axis.vocabulary;
            let mut idx = index::sample(rng, vocab.len(), n_points).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| vocab[i].clone()).collect()
        }
    };
    let values = sample_data(seed, n_points, rng)?;
    let ticks = sample_tick_omission(&x_labels, seed.x_axis.label_kind, rng);
    let style = sample_style(seed, palette, values.len(), rng)?;

    let series = values
        .keys()
        .zip(&style.series)
        .map(|(label, v)| SeriesSpec {
            label: label.clone(),
            rgb: v.rgb,
            color: v.color,
            line_style: v.line_style,
            border_type: v.border_type,
            marker: v.marker,
        })
        .collect();

    let mut spec = ChartSpec {
        chart_id: chart_id_for(&seed.seed_id, rng_seed),
        seed_id: seed.seed_id.clone(),
        chart_type: seed.chart_type,
        title: seed.title.clone(),
        title_visible: style.title_visible,
        x_topic: seed.x_axis.topic.clone(),
        x_unit: seed.x_axis.unit.clone(),
        y_topic: seed.y_axis.topic.clone(),
        y_unit: seed.y_axis.unit.clone(),
        label_kind: seed.x_axis.label_kind,
        series,
        x_labels,
        shown_x_labels: ticks.shown,
        tick_branch: ticks.branch,
        values,
        value_range: seed.value_range,
        precision: seed.precision,
        value_labels_visible: style.value_labels_visible,
        value_label_position: style.value_label_position,
        axis: None,
        legend_position: style.legend_position,
        stacked: style.stacked,
        grid_visible: style.grid_visible,
        font: style.font,
        font_size: style.font_size,
        line_width: style.line_width,
        bar_width_ratio: style.bar_width_ratio,
        canvas: options.canvas,
        palette_id: palette.palette_id.clone(),
        background: style.background,
    };
    if spec.chart_type.is_cartesian() {
        spec.axis = Some(axis_for(&spec, style.tick_target, style.x_axis_visible, style.y_axis_visible));
    }
    layout(&spec)?;
    let gt = GroundTruth::from_spec(&spec);
    Ok((spec, gt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::check_chart;
    use crate::rng::split_rng;
    use crate::seed::{synthesize_catalog, AxisDescriptor};

    fn range_seed(chart_type: ChartType, range: [f64; 2]) -> ChartSeed {
        ChartSeed {
            seed_id: "t".into(),
            chart_type,
            title: "Test".into(),
            domain_tag: "test".into(),
            x_axis: AxisDescriptor {
                topic: "Year".into(),
                unit: String::new(),
                label_kind: LabelKind::ContinuousTemporal,
                vocabulary: (2010..2020).map(|y| y.to_string()).collect(),
                range: None,
            },
            y_axis: AxisDescriptor {
                topic: "Value".into(),
                unit: "USD".into(),
                label_kind: LabelKind::ContinuousNumeric,
                vocabulary: vec![],
                range: None,
            },
            series_vocabulary: ["A", "B", "C", "D", "E"].map(String::from).to_vec(),
            value_range: range,
            palette_id: "p001".into(),
            precision: 1,
        }
    }

    #[test]
    fn data_stays_in_range() {
        let seed = range_seed(ChartType::Line, [50.0, 100.0]);
        let mut rng = split_rng(1, "t", 0);
        let data = sample_data(&seed, 6, &mut rng).unwrap();
        for vals in data.values() {
            assert_eq!(vals.len(), 6);
            assert!(vals.iter().all(|v| (50.0..=100.0).contains(v)));
        }
    }

    #[test]
    fn walk_respects_smoothness() {
        let mut rng = split_rng(2, "walk", 0);
        for _ in 0..500 {
            let v = random_walk(&mut rng, 10, [0.0, 1.0], 1);
            for w in v.windows(2) {
                assert!((w[1] - w[0]).abs() <= SMOOTHNESS_BOUND + 1e-9, "{v:?}");
            }
        }
    }

    #[test]
    fn pie_shares_sum_to_100() {
        let seed = range_seed(ChartType::Pie, [0.0, 100.0]);
        let mut rng = split_rng(3, "pie", 0);
        let data = sample_data(&seed, 4, &mut rng).unwrap();
        let total: f64 = data.values().map(|v| v[0]).sum();
        assert!((total - 100.0).abs() < 1e-6);
        assert!(data.values().all(|v| v[0] > 0.0));
    }

    #[test]
    fn capacity_error_when_too_many_points() {
        let seed = range_seed(ChartType::Line, [0.0, 10.0]);
        let err = sample_data(&seed, 11, &mut split_rng(0, "x", 0)).unwrap_err();
        assert!(matches!(err, ComposeError::Capacity { .. }));
    }

    #[test]
    fn sample_data_is_deterministic() {
        let seed = range_seed(ChartType::Bar, [0.0, 10.0]);
        let a = sample_data(&seed, 5, &mut split_rng(4, "d", 0)).unwrap();
        let b = sample_data(&seed, 5, &mut split_rng(4, "d", 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn categorical_ticks_keep_everything() {
        let labels = vec!["USA".to_string(), "China".to_string()];
        for i in 0..50 {
            let d = sample_tick_omission(&labels, LabelKind::Categorical, &mut split_rng(5, "c", i));
            assert_eq!(d.shown, labels);
            assert_eq!(d.branch, TickBranch::NotApplicable);
        }
    }

    #[test]
    fn one_of_three_pattern_keeps_endpoints() {
        let labels: Vec<String> = (2010..=2017).map(|y| y.to_string()).collect();
        let mut found = false;
        for i in 0..100 {
            let d = sample_tick_omission(&labels, LabelKind::ContinuousTemporal, &mut split_rng(6, "t", i));
            assert_eq!(d.shown.first(), labels.first());
            assert_eq!(d.shown.last(), labels.last());
            if d.branch == TickBranch::OmitOneOfThree {
                found = true;
                assert_eq!(d.shown, ["2010", "2012", "2013", "2015", "2016", "2017"]);
            }
        }
        assert!(found);
    }

    #[test]
    fn tick_branch_frequencies() {
        // 10,000 seeded draws; expected 2500 / 5000 / 2500.
        let labels: Vec<String> = (0..8).map(|i| i.to_string()).collect();
        let mut counts = [0usize; 3];
        for i in 0..10_000 {
            let d = sample_tick_omission(&labels, LabelKind::ContinuousNumeric, &mut split_rng(7, "freq", i));
            match d.branch {
                TickBranch::KeepAll => counts[0] += 1,
                TickBranch::OmitOneOfThree => counts[1] += 1,
                TickBranch::OmitTwoOfFour => counts[2] += 1,
                TickBranch::NotApplicable => unreachable!(),
            }
        }
        for (c, p) in counts.iter().zip([0.25, 0.5, 0.25]) {
            assert!((*c as f64 / 10_000.0 - p).abs() <= 0.02, "{counts:?}");
        }
    }

    #[test]
    fn style_colors_are_distinct() {
        let seed = range_seed(ChartType::Line, [0.0, 10.0]);
        let palettes = PaletteTable::builtin();
        let palette = palettes.get("p001").unwrap();
        let style = sample_style(&seed, palette, 3, &mut split_rng(8, "s", 0)).unwrap();
        let mut names: Vec<_> = style.series.iter().map(|s| s.color).collect();
        names.dedup();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 3);
    }

    #[test]
    fn style_options_cover_line_styles() {
        let seed = range_seed(ChartType::Line, [0.0, 10.0]);
        let palettes = PaletteTable::builtin();
        let palette = palettes.get("p001").unwrap();
        let mut seen = std::collections::HashSet::new();
        for i in 0..1000 {
            let style = sample_style(&seed, palette, 1, &mut split_rng(9, "ls", i)).unwrap();
            seen.insert(style.series[0].line_style.unwrap());
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn stacked_flag_only_on_bars() {
        let palettes = PaletteTable::builtin();
        let palette = palettes.get("p001").unwrap();
        let bar = sample_style(&range_seed(ChartType::Bar, [0.0, 1.0]), palette, 2, &mut split_rng(1, "b", 0)).unwrap();
        assert!(bar.stacked.is_some());
        let pie = sample_style(&range_seed(ChartType::Pie, [0.0, 100.0]), palette, 3, &mut split_rng(1, "b", 0)).unwrap();
        assert!(pie.stacked.is_none());
    }

    #[test]
    fn palette_capacity_error() {
        let palettes = PaletteTable::builtin();
        let palette = palettes.get("p001").unwrap();
        let err = sample_style(&range_seed(ChartType::Line, [0.0, 1.0]), palette, 9, &mut split_rng(1, "b", 0));
        assert!(matches!(err, Err(ComposeError::Capacity { .. })));
    }

    #[test]
    fn nice_axis_covers() {
        assert_eq!(nice_axis(10.0, 20.0, 5, true), (0.0, 20.0, 5.0));
        let (min, max, step) = nice_axis(0.13, 0.97, 5, false);
        assert!(min <= 0.13 && max >= 0.97 && step > 0.0);
        let (min, max, _) = nice_axis(-3.2, 7.7, 4, true);
        assert!(min <= -3.2 && max >= 7.7);
    }

    #[test]
    fn composed_charts_validate_and_repeat() {
        let catalog = synthesize_catalog(11, 25);
        let palettes = PaletteTable::builtin();
        for (i, seed) in catalog.seeds.iter().enumerate() {
            let (spec, gt) = compose_chart(seed, &palettes, i as u64, &ComposeOptions::default()).unwrap();
            assert!(check_chart(&spec, &gt).is_empty(), "{:?}", check_chart(&spec, &gt));
            let again = compose_chart(seed, &palettes, i as u64, &ComposeOptions::default()).unwrap();
            assert_eq!(serde_json::to_string(&spec).unwrap(), serde_json::to_string(&again.0).unwrap());
        }
    }
}
