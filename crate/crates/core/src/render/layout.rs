//! Pixel geometry for a chart.

use serde::Serialize;

use super::fonts::text_width;
use super::RenderError;
use crate::chart::{format_value, ChartSpec, FontFamily, LegendPosition, ValueLabelPosition};
use crate::compose::decimals_of;
use crate::seed::ChartType;

pub const MIN_CANVAS: [u32; 2] = [320, 240];
pub const MIN_TICK_FONT: f64 = 7.0;
const MARGIN: f64 = 16.0;
const SWATCH_W: f64 = 18.0;
const SWATCH_GAP: f64 = 6.0;
const ENTRY_GAP: f64 = 16.0;
const MIN_PLOT: [f64; 2] = [120.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x < other.right() && other.x < self.right() && self.y < other.bottom() && other.y < self.bottom()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Start,
    Middle,
    End,
}

impl Anchor {
    pub fn as_str(self) -> &'static str {
        match self {
            Anchor::Start => "start",
            Anchor::Middle => "middle",
            Anchor::End => "end",
        }
    }
}

/// A single line of text placed at a baseline point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TextBox {
    pub text: String,
    pub x: f64,
    pub y: f64,
    pub size: f64,
    pub anchor: Anchor,
    pub rotate: bool,
    /// Approximate ink box, used for overlap checks.
    pub rect: Rect,
}

impl TextBox {
    fn new(text: &str, x: f64, y: f64, size: f64, anchor: Anchor, font: FontFamily) -> TextBox {
        let w = text_width(text, font, size);
        let left = match anchor {
            Anchor::Start => x,
            Anchor::Middle => x - w / 2.0,
            Anchor::End => x - w,
        };
        TextBox {
            text: text.to_string(),
            x,
            y,
            size,
            anchor,
            rotate: false,
            rect: Rect {
                x: left,
                y: y - size * 0.8,
                w,
                h: size,
            },
        }
    }
}

/// `pixel = offset + scale * value`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Affine {
    pub scale: f64,
    pub offset: f64,
}

impl Affine {
    pub fn apply(&self, v: f64) -> f64 {
        self.offset + self.scale * v
    }

    fn between(d0: f64, d1: f64, p0: f64, p1: f64) -> Affine {
        let scale = (p1 - p0) / (d1 - d0);
        Affine {
            scale,
            offset: p0 - scale * d0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarGeom {
    pub x_label: String,
    pub value: f64,
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointGeom {
    pub x_label: String,
    pub value: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorGeom {
    pub value: f64,
    pub start_deg: f64,
    pub end_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesGeom {
    Polyline(Vec<PointGeom>),
    Bars(Vec<BarGeom>),
    Sector(SectorGeom),
    Points(Vec<PointGeom>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegendEntry {
    pub label: String,
    pub swatch: Rect,
    pub text: TextBox,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegendLayout {
    pub position: LegendPosition,
    pub rect: Rect,
    pub entries: Vec<LegendEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PieFrame {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayoutModel {
    pub canvas: [f64; 2],
    pub plot_rect: Rect,
    pub font_size: f64,
    pub tick_font_size: f64,
    pub title: Option<TextBox>,
    /// Data value to pixel along the value axis (y for vertical charts, x for horizontal bars).
    pub value_map: Option<Affine>,
    /// Category centers along the category axis, in x_labels order.
    pub category_centers: Vec<f64>,
    pub band: f64,
    pub series: Vec<(String, SeriesGeom)>,
    pub pie: Option<PieFrame>,
    pub legend: LegendLayout,
    pub category_ticks: Vec<TextBox>,
    pub value_ticks: Vec<(f64, TextBox)>,
    pub axis_titles: Vec<TextBox>,
    pub value_labels: Vec<TextBox>,
}

fn legend_entry_width(label: &str, font: FontFamily, fs: f64) -> f64 {
    SWATCH_W + SWATCH_GAP + text_width(label, font, fs)
}

/// Lays legend entries out in rows of at most `max_w`; returns row assignments.
fn legend_rows(labels: &[String], font: FontFamily, fs: f64, max_w: f64) -> Result<Vec<Vec<usize>>, RenderError> {
    let mut rows: Vec<Vec<usize>> = Vec::new();
    let mut cur_w = 0.0;
    for (i, l) in labels.iter().enumerate() {
        let w = legend_entry_width(l, font, fs);
        if w > max_w {
            return Err(RenderError::CanvasTooSmall(format!("legend entry {l:?} wider than canvas")));
        }
        match rows.last_mut() {
            Some(row) if cur_w + ENTRY_GAP + w <= max_w => {
                row.push(i);
                cur_w += ENTRY_GAP + w;
            }
            _ => {
                rows.push(vec![i]);
                cur_w = w;
            }
        }
    }
    Ok(rows)
}

fn place_legend(
    spec: &ChartSpec,
    labels: &[String],
    fs: f64,
    area: &mut Rect,
) -> Result<LegendLayout, RenderError> {
    let font = spec.font;
    let row_h = fs + 8.0;
    let mut entries = Vec::new();
    let mut push = |i: usize, x: f64, y: f64| {
        let label = &labels[i];
        let swatch = Rect {
            x,
            y: y + (row_h - 10.0) / 2.0,
            w: SWATCH_W,
            h: 10.0,
        };
        let text = TextBox::new(
            label,
            x + SWATCH_W + SWATCH_GAP,
            y + row_h / 2.0 + fs * 0.35,
            fs,
            Anchor::Start,
            font,
        );
        entries.push(LegendEntry {
            label: label.clone(),
            swatch,
            text,
        });
    };
    let rect = match spec.legend_position {
        LegendPosition::Top | LegendPosition::Bottom => {
            let rows = legend_rows(labels, font, fs, area.w)?;
            let h = rows.len() as f64 * row_h;
            let y0 = if spec.legend_position == LegendPosition::Top {
                area.y
            } else {
                area.bottom() - h
            };
            for (r, row) in rows.iter().enumerate() {
                let total: f64 = row.iter().map(|&i| legend_entry_width(&labels[i], font, fs)).sum::<f64>()
                    + ENTRY_GAP * (row.len() as f64 - 1.0);
                let mut x = area.x + (area.w - total) / 2.0;
                for &i in row {
                    push(i, x, y0 + r as f64 * row_h);
                    x += legend_entry_width(&labels[i], font, fs) + ENTRY_GAP;
                }
            }
            let rect = Rect {
                x: area.x,
                y: y0,
                w: area.w,
                h,
            };
            if spec.legend_position == LegendPosition::Top {
                area.y += h + 8.0;
            }
            area.h -= h + 8.0;
            rect
        }
        LegendPosition::Left | LegendPosition::Right => {
            let w = labels
                .iter()
                .map(|l| legend_entry_width(l, font, fs))
                .fold(0.0, f64::max);
            let h = labels.len() as f64 * row_h;
            if h > area.h {
                return Err(RenderError::CanvasTooSmall("legend taller than canvas".into()));
            }
            let x0 = if spec.legend_position == LegendPosition::Left {
                area.x
            } else {
                area.right() - w
            };
            let y0 = area.y + (area.h - h) / 2.0;
            for i in 0..labels.len() {
                push(i, x0, y0 + i as f64 * row_h);
            }
            if spec.legend_position == LegendPosition::Left {
                area.x += w + 12.0;
            }
            area.w -= w + 12.0;
            Rect { x: x0, y: y0, w, h }
        }
    };
    Ok(LegendLayout {
        position: spec.legend_position,
        rect,
        entries,
    })
}

fn value_axis_title(spec: &ChartSpec) -> String {
    if spec.y_unit.is_empty() {
        spec.y_topic.clone()
    } else {
        format!("{} ({})", spec.y_topic, spec.y_unit)
    }
}

fn category_axis_title(spec: &ChartSpec) -> String {
    if spec.x_unit.is_empty() {
        spec.x_topic.clone()
    } else {
        format!("{} ({})", spec.x_topic, spec.x_unit)
    }
}

/// Compute the full pixel layout of `spec`.
pub fn layout(spec: &ChartSpec) -> Result<LayoutModel, RenderError> {
    let [cw, ch] = spec.canvas;
    if cw < MIN_CANVAS[0] || ch < MIN_CANVAS[1] {
        return Err(RenderError::CanvasTooSmall(format!(
            "{cw}x{ch} is below the {}x{} minimum",
            MIN_CANVAS[0], MIN_CANVAS[1]
        )));
    }
    let fs = f64::from(spec.font_size);
    let mut ts = fs;
    loop {
        match layout_with_tick_font(spec, ts) {
            Err(RenderError::LabelsDoNotFit(_)) if ts > MIN_TICK_FONT => ts -= 1.0,
            other => return other,
        }
    }
}

fn layout_with_tick_font(spec: &ChartSpec, ts: f64) -> Result<LayoutModel, RenderError> {
    let (cw, ch) = (f64::from(spec.canvas[0]), f64::from(spec.canvas[1]));
    let fs = f64::from(spec.font_size);
    let font = spec.font;
    let mut area = Rect {
        x: MARGIN,
        y: MARGIN,
        w: cw - 2.0 * MARGIN,
        h: ch - 2.0 * MARGIN,
    };

    let title = spec.title_visible.then(|| {
        let size = fs + 4.0;
        let tb = TextBox::new(&spec.title, cw / 2.0, area.y + size * 0.9, size, Anchor::Middle, font);
        area.y += size * 1.3 + 8.0;
        area.h -= size * 1.3 + 8.0;
        tb
    });
    if let Some(t) = &title {
        if t.rect.w > cw - 2.0 * MARGIN {
            return Err(RenderError::CanvasTooSmall("title wider than canvas".into()));
        }
    }

    let labels: Vec<String> = spec.series.iter().map(|s| s.label.clone()).collect();
    let legend = place_legend(spec, &labels, fs, &mut area)?;

    let mut model = LayoutModel {
        canvas: [cw, ch],
        plot_rect: area,
        font_size: fs,
        tick_font_size: ts,
        title,
        value_map: None,
        category_centers: Vec::new(),
        band: 0.0,
        series: Vec::new(),
        pie: None,
        legend,
        category_ticks: Vec::new(),
        value_ticks: Vec::new(),
        axis_titles: Vec::new(),
        value_labels: Vec::new(),
    };

    if spec.chart_type == ChartType::Pie {
        layout_pie(spec, area, &mut model)?;
    } else {
        layout_cartesian(spec, area, ts, &mut model)?;
    }
    Ok(model)
}

fn layout_pie(spec: &ChartSpec, area: Rect, model: &mut LayoutModel) -> Result<(), RenderError> {
    let r = (area.w.min(area.h) / 2.0 - 8.0).floor();
    if r < 40.0 {
        return Err(RenderError::CanvasTooSmall("no room for the pie".into()));
    }
    let frame = PieFrame {
        cx: area.x + area.w / 2.0,
        cy: area.y + area.h / 2.0,
        r,
    };
    let mut start = 0.0;
    for (label, vals) in &spec.values {
        let sweep = vals[0] * 3.6;
        let end = start + sweep;
        if spec.value_labels_visible {
            let mid = (start + end) / 2.0;
            let (x, y) = polar(&frame, 0.65 * r, mid);
            model.value_labels.push(TextBox::new(
                &format!("{}%", format_value(vals[0], spec.precision)),
                x,
                y + model.tick_font_size * 0.35,
                model.tick_font_size,
                Anchor::Middle,
                spec.font,
            ));
        }
        model.series.push((
            label.clone(),
            SeriesGeom::Sector(SectorGeom {
                value: vals[0],
                start_deg: start,
                end_deg: end,
            }),
        ));
        start = end;
    }
    model.plot_rect = area;
    model.pie = Some(frame);
    Ok(())
}

/// Point on the circle at `deg` degrees clockwise from 12 o'clock.
pub fn polar(frame: &PieFrame, r: f64, deg: f64) -> (f64, f64) {
    let rad = deg.to_radians();
    (frame.cx + r * rad.sin(), frame.cy - r * rad.cos())
}

fn layout_cartesian(spec: &ChartSpec, mut area: Rect, ts: f64, model: &mut LayoutModel) -> Result<(), RenderError> {
    let axis = spec
        .axis
        .as_ref()
        .ok_or_else(|| RenderError::InvalidSpec("cartesian chart without axis".into()))?;
    let font = spec.font;
    let fs = model.font_size;
    let horizontal = spec.chart_type == ChartType::HorizontalBar;
    let tick_decimals = decimals_of(axis.step);
    let tick_values = axis.ticks();
    let tick_texts: Vec<String> = tick_values
        .iter()
        .map(|v| format_value(*v, tick_decimals as u8))
        .collect();

    // Axis titles take a strip on the bottom and on the left.
    let (bottom_title, left_title) = if horizontal {
        (value_axis_title(spec), category_axis_title(spec))
    } else {
        (category_axis_title(spec), value_axis_title(spec))
    };
    area.h -= fs + 8.0;
    let bottom_title_y = area.bottom() + 8.0 + fs * 0.8;
    let left_title_x = area.x + fs * 0.8;
    area.x += fs + 8.0;
    area.w -= fs + 8.0;

    // Tick label strips.
    let left_labels_w = if horizontal {
        spec.x_labels
            .iter()
            .filter(|l| spec.shown_x_labels.contains(l))
            .map(|l| text_width(l, font, ts))
            .fold(0.0, f64::max)
    } else {
        tick_texts.iter().map(|t| text_width(t, font, ts)).fold(0.0, f64::max)
    };
    area.x += left_labels_w + 8.0;
    area.w -= left_labels_w + 8.0;
    area.h -= ts + 10.0;
    // Headroom for labels drawn above the top data point.
    if spec.value_labels_visible {
        if horizontal {
            area.w -= 6.0 * ts;
        } else {
            area.y += ts + 4.0;
            area.h -= ts + 4.0;
        }
    }
    if area.w < MIN_PLOT[0] || area.h < MIN_PLOT[1] {
        return Err(RenderError::CanvasTooSmall(format!(
            "plot area {:.0}x{:.0} below minimum",
            area.w, area.h
        )));
    }
    model.plot_rect = area;

    let n = spec.x_labels.len();
    let value_map = if horizontal {
        Affine::between(axis.min, axis.max, area.x, area.right())
    } else {
        Affine::between(axis.min, axis.max, area.bottom(), area.y)
    };
    model.value_map = Some(value_map);
    let band = if horizontal { area.h } else { area.w } / n as f64;
    model.band = band;
    model.category_centers = (0..n)
        .map(|i| {
            if horizontal {
                area.bottom() - band * (i as f64 + 0.5)
            } else {
                area.x + band * (i as f64 + 0.5)
            }
        })
        .collect();

    // Category tick labels (shown only) and the overlap check.
    for (i, label) in spec.x_labels.iter().enumerate() {
        if !spec.shown_x_labels.contains(label) {
            continue;
        }
        let c = model.category_centers[i];
        let tb = if horizontal {
            TextBox::new(label, area.x - 6.0, c + ts * 0.35, ts, Anchor::End, font)
        } else {
            TextBox::new(label, c, area.bottom() + 6.0 + ts * 0.8, ts, Anchor::Middle, font)
        };
        model.category_ticks.push(tb);
    }
    if horizontal && band < ts + 2.0 {
        return Err(RenderError::LabelsDoNotFit("category labels taller than their band".into()));
    }
    if !horizontal {
        for w in model.category_ticks.windows(2) {
            if w[0].rect.right() + 2.0 > w[1].rect.x {
                return Err(RenderError::LabelsDoNotFit(format!(
                    "tick labels {:?} and {:?} overlap",
                    w[0].text, w[1].text
                )));
            }
        }
    }

    for (v, text) in tick_values.iter().zip(&tick_texts) {
        let p = value_map.apply(*v);
        let tb = if horizontal {
            TextBox::new(text, p, area.bottom() + 6.0 + ts * 0.8, ts, Anchor::Middle, font)
        } else {
            TextBox::new(text, area.x - 6.0, p + ts * 0.35, ts, Anchor::End, font)
        };
        model.value_ticks.push((*v, tb));
    }
    if horizontal {
        for w in model.value_ticks.windows(2) {
            if w[0].1.rect.right() + 2.0 > w[1].1.rect.x {
                return Err(RenderError::LabelsDoNotFit("value tick labels overlap".into()));
            }
        }
    }

    let mut bt = TextBox::new(&bottom_title, area.x + area.w / 2.0, bottom_title_y, fs, Anchor::Middle, font);
    bt.rect.y = bottom_title_y - fs * 0.8;
    let mut lt = TextBox::new(&left_title, left_title_x, area.y + area.h / 2.0, fs, Anchor::Middle, font);
    lt.rotate = true;
    model.axis_titles = vec![bt, lt];

    let baseline = if axis.min <= 0.0 && 0.0 <= axis.max {
        0.0
    } else {
        axis.min
    };
    let ls = ts;
    let stacked = spec.is_stacked();
    let k = spec.values.len();
    let group = band * spec.bar_width_ratio;
    let mut stack_top = vec![baseline; n];

    for (j, (label, vals)) in spec.values.iter().enumerate() {
        let geom = match spec.chart_type {
            ChartType::Line | ChartType::Scatter => {
                let pts: Vec<PointGeom> = vals
                    .iter()
                    .enumerate()
                    .map(|(i, v)| PointGeom {
                        x_label: spec.x_labels[i].clone(),
                        value: *v,
                        x: model.category_centers[i],
                        y: value_map.apply(*v),
                    })
                    .collect();
                if spec.value_labels_visible {
                    for p in &pts {
                        let dy = match spec.value_label_position {
                            ValueLabelPosition::Above => -8.0,
                            ValueLabelPosition::Inside => ls + 6.0,
                        };
                        model.value_labels.push(TextBox::new(
                            &format_value(p.value, spec.precision),
                            p.x,
                            p.y + dy,
                            ls,
                            Anchor::Middle,
                            font,
                        ));
                    }
                }
                if spec.chart_type == ChartType::Line {
                    SeriesGeom::Polyline(pts)
                } else {
                    SeriesGeom::Points(pts)
                }
            }
            ChartType::Bar | ChartType::HorizontalBar => {
                let mut bars = Vec::with_capacity(n);
                for (i, v) in vals.iter().enumerate() {
                    let c = model.category_centers[i];
                    let (from, to, lo_edge, thick) = if stacked {
                        let from = stack_top[i];
                        stack_top[i] += v;
                        (from, from + v, c - group / 2.0, group)
                    } else {
                        let sub = group / k as f64;
                        (baseline, *v, c - group / 2.0 + sub * j as f64, sub)
                    };
                    let p0 = value_map.apply(from);
                    let p1 = value_map.apply(to);
                    let rect = if horizontal {
                        // lo_edge runs top-down in pixel space for horizontal bars.
                        Rect {
                            x: p0.min(p1),
                            y: lo_edge,
                            w: (p1 - p0).abs(),
                            h: thick,
                        }
                    } else {
                        Rect {
                            x: lo_edge,
                            y: p0.min(p1),
                            w: thick,
                            h: (p1 - p0).abs(),
                        }
                    };
                    if spec.value_labels_visible {
                        let text = format_value(*v, spec.precision);
                        let tb = match (horizontal, spec.value_label_position) {
                            (false, ValueLabelPosition::Above) => {
                                TextBox::new(&text, rect.x + rect.w / 2.0, rect.y - 4.0, ls, Anchor::Middle, font)
                            }
                            (false, ValueLabelPosition::Inside) => TextBox::new(
                                &text,
                                rect.x + rect.w / 2.0,
                                rect.y + rect.h / 2.0 + ls * 0.35,
                                ls,
                                Anchor::Middle,
                                font,
                            ),
                            (true, ValueLabelPosition::Above) => TextBox::new(
                                &text,
                                rect.right() + 4.0,
                                rect.y + rect.h / 2.0 + ls * 0.35,
                                ls,
                                Anchor::Start,
                                font,
                            ),
                            (true, ValueLabelPosition::Inside) => TextBox::new(
                                &text,
                                rect.x + rect.w / 2.0,
                                rect.y + rect.h / 2.0 + ls * 0.35,
                                ls,
                                Anchor::Middle,
                                font,
                            ),
                        };
                        model.value_labels.push(tb);
                    }
                    bars.push(BarGeom {
                        x_label: spec.x_labels[i].clone(),
                        value: *v,
                        rect,
                    });
                }
                SeriesGeom::Bars(bars)
            }
            ChartType::Pie => unreachable!("pie handled separately"),
        };
        model.series.push((label.clone(), geom));
    }
    Ok(())
}
