//! Chart evaluation batteries, scores, and the refinement action space.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::{normalize_answer, Answer, AnswerKind, Normalized, Tolerance};
use crate::chart::{check_chart, snap, AxisSpec, ChartSpec, GroundTruth, LegendPosition};
use crate::compose::{
    decimals_of, draw_colors, nice_axis, random_walk, sample_series_visual, sample_shares, ComposeError,
};
use crate::grade::grade;
use crate::palette::PaletteTable;
use crate::qa::{self, Bindings, Family};
use crate::render::{layout, RenderError};
use crate::rng::ChartRng;
use crate::seed::{ChartSeed, ChartType};

pub const VALUE_ITEMS: usize = 10;
pub const VISUAL_ITEMS: usize = 10;
pub const DEFAULT_TAU: f64 = 0.2;
pub const DEFAULT_PRIOR: f64 = 0.5;

/// What an evaluation or QA item asks, in structured form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "probe", rename_all = "snake_case")]
pub enum Probe {
    IsChartType { chart_type: ChartType },
    IsTitleClear,
    Template { family: Family, bindings: Bindings },
}

impl Probe {
    pub fn is_identity(&self) -> bool {
        !matches!(self, Probe::Template { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Identity,
    Value,
    Visual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalItem {
    pub item_id: String,
    pub dimension: Dimension,
    pub question: String,
    pub answer_kind: AnswerKind,
    #[serde(flatten)]
    pub probe: Probe,
    pub gold: Answer,
    pub gold_text: String,
    pub tolerance: Tolerance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalBattery {
    pub chart_id: String,
    pub items: Vec<EvalItem>,
    /// Some value or visual items repeat because the chart has too few distinct lookups.
    pub with_replacement: bool,
}

impl EvalBattery {
    pub fn identity_items(&self) -> impl Iterator<Item = &EvalItem> {
        self.items.iter().filter(|i| i.dimension == Dimension::Identity)
    }
}

/// Title is shown and its box stays clear of the plot area.
pub fn title_is_clear(spec: &ChartSpec) -> Result<bool, RenderError> {
    let model = layout(spec)?;
    Ok(match &model.title {
        Some(t) => !t.rect.intersects(&model.plot_rect),
        None => false,
    })
}

fn value_families(t: ChartType) -> [Family; 2] {
    match t {
        ChartType::Pie => [Family::SectorShareByLabel, Family::SectorLabelByShare],
        ChartType::Scatter => [Family::ScatterYAtX, Family::ScatterLegendAtXy],
        _ => [Family::ValueAtLabel, Family::LabelForValue],
    }
}

fn visual_families(t: ChartType) -> Vec<Family> {
    match t {
        ChartType::Pie => vec![Family::SectorColorByLabel, Family::SectorLabelByColor],
        ChartType::Line => vec![Family::ColorOfLegend, Family::LegendByLineVisual, Family::LineStyleOfLegend],
        _ => vec![Family::ColorOfLegend, Family::LegendByColor],
    }
}

type Pool = Vec<(Family, Bindings, Answer)>;

fn pool_of(families: &[Family], gt: &GroundTruth, spec: &ChartSpec) -> Vec<Pool> {
    families
        .iter()
        .map(|f| {
            qa::valid_bindings(*f, gt, spec)
                .into_iter()
                .map(|(b, a)| (*f, b, a))
                .collect()
        })
        .collect()
}

/// Draw `n` items alternating between the pools, without replacement while possible.
fn draw_items(mut pools: Vec<Pool>, n: usize, rng: &mut ChartRng) -> (Pool, bool) {
    let all: Pool = pools.iter().flatten().cloned().collect();
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    while out.len() < n && pools.iter().any(|p| !p.is_empty()) {
        let idx = k % pools.len();
        k += 1;
        if pools[idx].is_empty() {
            continue;
        }
        let j = rng.random_range(0..pools[idx].len());
        out.push(pools[idx].remove(j));
    }
    let replaced = out.len() < n;
    while out.len() < n && !all.is_empty() {
        out.push(all.choose(rng).unwrap().clone());
    }
    (out, replaced)
}

fn template_item(
    item_id: String,
    dimension: Dimension,
    (family, bindings, gold): (Family, Bindings, Answer),
    gt: &GroundTruth,
    rng: &mut ChartRng,
) -> EvalItem {
    let variants: Vec<&qa::QaTemplate> = qa::templates().iter().filter(|t| t.family == family).collect();
    let t = variants.choose(rng).expect("family has templates");
    EvalItem {
        item_id,
        dimension,
        question: qa::fill(&t.question_pattern, &bindings),
        answer_kind: t.answer_kind,
        gold_text: gold.render(gt.precision),
        tolerance: qa::tolerance_for(t.tolerance_rule, t.answer_kind, gt),
        probe: Probe::Template { family, bindings },
        gold,
    }
}

/// Two identity items, ten value items and ten visual items.
pub fn build_battery(gt: &GroundTruth, spec: &ChartSpec, rng: &mut ChartRng) -> Result<EvalBattery, RenderError> {
    let id = |i: usize| format!("{}-e{i:02}", gt.chart_id);
    let yes = |b: bool| if b { "yes" } else { "no" };
    let clear = title_is_clear(spec)?;
    let mut items = vec![
        EvalItem {
            item_id: id(0),
            dimension: Dimension::Identity,
            question: format!("Is the image a {} chart?", spec.chart_type.phrase()),
            answer_kind: AnswerKind::YesNo,
            probe: Probe::IsChartType {
                chart_type: spec.chart_type,
            },
            gold: Answer::Text("yes".into()),
            gold_text: "yes".into(),
            tolerance: Tolerance::Strict,
        },
        EvalItem {
            item_id: id(1),
            dimension: Dimension::Identity,
            question: "Is the title of the chart clear and readable?".into(),
            answer_kind: AnswerKind::YesNo,
            probe: Probe::IsTitleClear,
            gold: Answer::Text(yes(clear).into()),
            gold_text: yes(clear).into(),
            tolerance: Tolerance::Strict,
        },
    ];
    let (values, r1) = draw_items(pool_of(&value_families(gt.chart_type), gt, spec), VALUE_ITEMS, rng);
    let (visuals, r2) = draw_items(pool_of(&visual_families(gt.chart_type), gt, spec), VISUAL_ITEMS, rng);
    for v in values {
        let item = template_item(id(items.len()), Dimension::Value, v, gt, rng);
        items.push(item);
    }
    for v in visuals {
        let item = template_item(id(items.len()), Dimension::Visual, v, gt, rng);
        items.push(item);
    }
    Ok(EvalBattery {
        chart_id: gt.chart_id.clone(),
        items,
        with_replacement: r1 || r2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalScore {
    pub chart_id: String,
    pub stage_k: u32,
    pub identity_pass: bool,
    pub e_value: f64,
    pub e_visual: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{answers} answers for {items} battery items")]
    Alignment { items: usize, answers: usize },
    #[error("action {0:?} does not apply to a {1} chart")]
    Inapplicable(ActionKind, ChartType),
    #[error(transparent)]
    Compose(#[from] ComposeErrorText),
    #[error("action output violates invariants: {0}")]
    Invalid(String),
}

/// Compose errors carry non-clonable sources; keep their message.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct ComposeErrorText(pub String);

impl From<ComposeError> for EvalError {
    fn from(e: ComposeError) -> Self {
        EvalError::Compose(ComposeErrorText(e.to_string()))
    }
}

impl From<RenderError> for EvalError {
    fn from(e: RenderError) -> Self {
        EvalError::Invalid(e.to_string())
    }
}

/// Per-item correctness of normalized answers.
pub fn grade_battery(battery: &EvalBattery, answers: &[Normalized]) -> Result<Vec<bool>, EvalError> {
    if answers.len() != battery.items.len() {
        return Err(EvalError::Alignment {
            items: battery.items.len(),
            answers: answers.len(),
        });
    }
    Ok(battery
        .items
        .iter()
        .zip(answers)
        .map(|(item, a)| grade(a, &item.gold, item.tolerance))
        .collect())
}

pub fn normalize_battery_answers(battery: &EvalBattery, raw: &[String]) -> Vec<Normalized> {
    battery
        .items
        .iter()
        .zip(raw)
        .map(|(i, r)| normalize_answer(r, i.answer_kind))
        .collect()
}

fn tenths(correct: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    // Round to a multiple of 0.1 so accuracies compare exactly.
    ((correct as f64 / total as f64) * 10.0).round() / 10.0
}

pub fn score_chart(battery: &EvalBattery, answers: &[Normalized], stage_k: u32) -> Result<EvalScore, EvalError> {
    let ok = grade_battery(battery, answers)?;
    let mut counts: BTreeMap<Dimension, (usize, usize)> = BTreeMap::new();
    for (item, ok) in battery.items.iter().zip(&ok) {
        let c = counts.entry(item.dimension).or_default();
        c.0 += usize::from(*ok);
        c.1 += 1;
    }
    let get = |d| counts.get(&d).copied().unwrap_or((0, 0));
    let (id_ok, id_n) = get(Dimension::Identity);
    let (v_ok, v_n) = get(Dimension::Value);
    let (vis_ok, vis_n) = get(Dimension::Visual);
    Ok(EvalScore {
        chart_id: battery.chart_id.clone(),
        stage_k,
        identity_pass: id_ok == id_n,
        e_value: tenths(v_ok, v_n),
        e_visual: tenths(vis_ok, vis_n),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionKind {
    Drop,
    None,
    #[serde(rename = "VaEM_RandNum")]
    VaemRandNum,
    #[serde(rename = "VaEM_MoreLegends")]
    VaemMoreLegends,
    #[serde(rename = "VaEM_ChangeNumScale")]
    VaemChangeNumScale,
    #[serde(rename = "ViEM_ShuffleColor")]
    ViemShuffleColor,
    #[serde(rename = "ViEM_ChangeAxisScale")]
    ViemChangeAxisScale,
    #[serde(rename = "ViEM_ChangeColorSchemes")]
    ViemChangeColorSchemes,
    #[serde(rename = "ViEM_SwitchLegendPosition")]
    ViemSwitchLegendPosition,
}

impl ActionKind {
    pub const ALL: [ActionKind; 9] = [
        ActionKind::Drop,
        ActionKind::None,
        ActionKind::VaemRandNum,
        ActionKind::VaemMoreLegends,
        ActionKind::VaemChangeNumScale,
        ActionKind::ViemShuffleColor,
        ActionKind::ViemChangeAxisScale,
        ActionKind::ViemChangeColorSchemes,
        ActionKind::ViemSwitchLegendPosition,
    ];
    pub const VALUE: [ActionKind; 3] = [
        ActionKind::VaemRandNum,
        ActionKind::VaemMoreLegends,
        ActionKind::VaemChangeNumScale,
    ];
    pub const VISUAL: [ActionKind; 4] = [
        ActionKind::ViemShuffleColor,
        ActionKind::ViemChangeAxisScale,
        ActionKind::ViemChangeColorSchemes,
        ActionKind::ViemSwitchLegendPosition,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Drop => "Drop",
            ActionKind::None => "None",
            ActionKind::VaemRandNum => "VaEM_RandNum",
            ActionKind::VaemMoreLegends => "VaEM_MoreLegends",
            ActionKind::VaemChangeNumScale => "VaEM_ChangeNumScale",
            ActionKind::ViemShuffleColor => "ViEM_ShuffleColor",
            ActionKind::ViemChangeAxisScale => "ViEM_ChangeAxisScale",
            ActionKind::ViemChangeColorSchemes => "ViEM_ChangeColorSchemes",
            ActionKind::ViemSwitchLegendPosition => "ViEM_SwitchLegendPosition",
        }
    }

    pub fn is_visual(self) -> bool {
        Self::VISUAL.contains(&self)
    }

    pub fn is_value(self) -> bool {
        Self::VALUE.contains(&self)
    }

    /// Axis rescaling needs an axis; pie shares must keep summing to 100.
    pub fn applies_to(self, chart_type: ChartType) -> bool {
        match self {
            ActionKind::ViemChangeAxisScale => chart_type.is_cartesian(),
            ActionKind::VaemChangeNumScale => chart_type != ChartType::Pie,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub tau_up: f64,
    pub tau_down: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            tau_up: DEFAULT_TAU,
            tau_down: DEFAULT_TAU,
        }
    }
}

/// Differences are compared after rounding to 1e-9 so that 0.7 - 0.5 counts as 0.2.
fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

pub fn select_action(
    curr: &EvalScore,
    prev_e_value: f64,
    prev_e_visual: f64,
    thresholds: Thresholds,
    chart_type: ChartType,
    rng: &mut ChartRng,
) -> ActionKind {
    if !curr.identity_pass {
        return ActionKind::Drop;
    }
    let dv = round9(curr.e_value - prev_e_value);
    let dvis = round9(curr.e_visual - prev_e_visual);
    if dv <= -thresholds.tau_down || dvis <= -thresholds.tau_down {
        return ActionKind::Drop;
    }
    let pick = |set: &[ActionKind], rng: &mut ChartRng| {
        let allowed: Vec<ActionKind> = set.iter().copied().filter(|a| a.applies_to(chart_type)).collect();
        *allowed.choose(rng).expect("at least one action applies")
    };
    if dv >= thresholds.tau_up {
        pick(&ActionKind::VALUE, rng)
    } else if dvis >= thresholds.tau_up {
        pick(&ActionKind::VISUAL, rng)
    } else {
        ActionKind::None
    }
}

/// What an action may draw on besides the chart itself.
pub struct ActionContext<'a> {
    pub seed: &'a ChartSeed,
    pub palettes: &'a PaletteTable,
}

fn tick_target(axis: &AxisSpec) -> usize {
    (((axis.max - axis.min) / axis.step).round() as usize).max(2)
}

fn refit_axis(spec: &mut ChartSpec) {
    if let Some(axis) = spec.axis.clone() {
        let (lo, hi) = spec.value_extent();
        let (min, max, step) = nice_axis(lo, hi, tick_target(&axis), spec.chart_type.is_bar());
        spec.axis = Some(AxisSpec { min, max, step, ..axis });
    }
}

fn resample_values(spec: &mut ChartSpec, rng: &mut ChartRng) {
    let n = spec.x_labels.len();
    if spec.chart_type == ChartType::Pie {
        let shares = sample_shares(rng, spec.values.len(), spec.precision);
        for (v, s) in spec.values.values_mut().zip(shares) {
            *v = vec![s];
        }
    } else {
        for v in spec.values.values_mut() {
            *v = random_walk(rng, n, spec.value_range, spec.precision);
        }
    }
}

fn more_legends(spec: &mut ChartSpec, ctx: &ActionContext, rng: &mut ChartRng) -> Result<(), EvalError> {
    let unused: Vec<&String> = ctx
        .seed
        .series_vocabulary
        .iter()
        .filter(|l| !spec.values.contains_key(*l))
        .collect();
    let palette = ctx.palettes.get(&spec.palette_id).map_err(ComposeError::from)?;
    let free: Vec<_> = palette
        .entries
        .iter()
        .filter(|e| spec.series.iter().all(|s| s.color != e.name))
        .collect();
    let want = rng.random_range(1..=2usize);
    let k = want.min(unused.len()).min(free.len());
    if k == 0 {
        return Err(ComposeError::Capacity {
            what: "unused series labels or colors",
            needed: 1,
            available: 0,
        }
        .into());
    }
    let mut labels: Vec<&String> = unused;
    labels.shuffle(rng);
    let mut colors = free;
    colors.shuffle(rng);
    let n = spec.x_labels.len();
    for (label, entry) in labels.into_iter().take(k).zip(colors) {
        let v = sample_series_visual(spec.chart_type, entry.rgb, entry.name, rng);
        spec.series.push(crate::chart::SeriesSpec {
            label: label.clone(),
            rgb: v.rgb,
            color: v.color,
            line_style: v.line_style,
            border_type: v.border_type,
            marker: v.marker,
        });
        let vals = if spec.chart_type == ChartType::Pie {
            vec![0.0]
        } else {
            random_walk(rng, n, spec.value_range, spec.precision)
        };
        spec.values.insert(label.clone(), vals);
    }
    if spec.chart_type == ChartType::Pie {
        resample_values(spec, rng);
    }
    Ok(())
}

fn change_num_scale(spec: &mut ChartSpec, rng: &mut ChartRng) -> Result<(), EvalError> {
    let options: Vec<i32> = [-2i32, -1, 1, 2]
        .into_iter()
        .filter(|m: &i32| i32::from(spec.precision) + (-*m).max(0) <= i32::from(crate::seed::MAX_PRECISION))
        .collect();
    let m = *options.choose(rng).expect("m = 1 always fits");
    let factor = 10f64.powi(m);
    let precision = spec.precision + (-m).max(0) as u8;
    for v in spec.values.values_mut().flatten() {
        *v = snap(*v * factor, precision);
    }
    spec.value_range = [snap(spec.value_range[0] * factor, precision), snap(spec.value_range[1] * factor, precision)];
    spec.precision = precision;
    if let Some(axis) = spec.axis.as_mut() {
        let step = axis.step * factor;
        let d = decimals_of(step) as u8;
        axis.min = snap(axis.min * factor, d);
        axis.max = snap(axis.max * factor, d);
        axis.step = snap(step, d);
    }
    Ok(())
}

fn shuffle_colors(spec: &mut ChartSpec, rng: &mut ChartRng) {
    let n = spec.series.len();
    if n < 2 {
        return;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut deranged = false;
    for _ in 0..16 {
        perm.shuffle(rng);
        if perm.iter().enumerate().all(|(i, p)| i != *p) {
            deranged = true;
            break;
        }
    }
    if !deranged {
        let k = rng.random_range(1..n);
        perm = (0..n).map(|i| (i + k) % n).collect();
    }
    let colors: Vec<_> = spec.series.iter().map(|s| (s.rgb, s.color)).collect();
    for (s, p) in spec.series.iter_mut().zip(perm) {
        (s.rgb, s.color) = colors[p];
    }
}

fn change_axis_scale(spec: &mut ChartSpec, rng: &mut ChartRng) -> Result<(), EvalError> {
    let old = spec.axis.clone().ok_or(EvalError::Inapplicable(ActionKind::ViemChangeAxisScale, spec.chart_type))?;
    let (lo, hi) = spec.value_extent();
    let mut candidates: Vec<(f64, f64, f64)> = Vec::new();
    for target in [3usize, 4, 5, 6, 8, 10] {
        let (min, max, step) = nice_axis(lo, hi, target, spec.chart_type.is_bar());
        let d = decimals_of(step) as u8;
        for extra in 0..=2 {
            let c = (min, snap(max + extra as f64 * step, d), step);
            if !candidates.contains(&c) && c != (old.min, old.max, old.step) {
                candidates.push(c);
            }
        }
    }
    candidates.shuffle(rng);
    for (min, max, step) in candidates {
        spec.axis = Some(AxisSpec { min, max, step, ..old.clone() });
        if layout(spec).is_ok() {
            return Ok(());
        }
    }
    spec.axis = Some(old);
    Err(EvalError::Invalid("no alternative axis lays out".into()))
}

fn change_color_scheme(spec: &mut ChartSpec, ctx: &ActionContext, rng: &mut ChartRng) -> Result<(), EvalError> {
    let n = spec.series.len();
    let ids: Vec<&str> = ctx
        .palettes
        .ids()
        .filter(|id| *id != spec.palette_id)
        .filter(|id| ctx.palettes.get(id).map(|p| p.entries.len() >= n).unwrap_or(false))
        .collect();
    let id = *ids.choose(rng).ok_or_else(|| EvalError::Invalid("no other palette fits".into()))?;
    let palette = ctx.palettes.get(id).map_err(ComposeError::from)?;
    let colors = draw_colors(palette, n, rng)?;
    for (s, (rgb, name)) in spec.series.iter_mut().zip(colors) {
        s.rgb = rgb;
        s.color = name;
    }
    spec.palette_id = palette.palette_id.clone();
    spec.background = palette.background;
    Ok(())
}

fn switch_legend(spec: &mut ChartSpec, rng: &mut ChartRng) {
    let others: Vec<LegendPosition> = LegendPosition::ALL
        .into_iter()
        .filter(|p| *p != spec.legend_position)
        .collect();
    spec.legend_position = *others.choose(rng).unwrap();
}

/// Apply a refinement action. `Ok(None)` for Drop, the unchanged pair for None.
/// The result gets `new_chart_id` and is re-validated.
pub fn apply_action(
    spec: &ChartSpec,
    gt: &GroundTruth,
    action: ActionKind,
    ctx: &ActionContext,
    new_chart_id: &str,
    rng: &mut ChartRng,
) -> Result<Option<(ChartSpec, GroundTruth)>, EvalError> {
    if !action.applies_to(spec.chart_type) {
        return Err(EvalError::Inapplicable(action, spec.chart_type));
    }
    let mut out = spec.clone();
    match action {
        ActionKind::Drop => return Ok(None),
        ActionKind::None => return Ok(Some((spec.clone(), gt.clone()))),
        ActionKind::VaemRandNum => {
            resample_values(&mut out, rng);
            refit_axis(&mut out);
        }
        ActionKind::VaemMoreLegends => {
            more_legends(&mut out, ctx, rng)?;
            refit_axis(&mut out);
        }
        ActionKind::VaemChangeNumScale => change_num_scale(&mut out, rng)?,
        ActionKind::ViemShuffleColor => shuffle_colors(&mut out, rng),
        ActionKind::ViemChangeAxisScale => change_axis_scale(&mut out, rng)?,
        ActionKind::ViemChangeColorSchemes => change_color_scheme(&mut out, ctx, rng)?,
        ActionKind::ViemSwitchLegendPosition => switch_legend(&mut out, rng),
    }
    out.chart_id = new_chart_id.to_string();
    layout(&out)?;
    let new_gt = GroundTruth::from_spec(&out);
    let problems = check_chart(&out, &new_gt);
    if !problems.is_empty() {
        return Err(EvalError::Invalid(problems.join("; ")));
    }
    Ok(Some((out, new_gt)))
}
