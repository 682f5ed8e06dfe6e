//! SVG serialization of a laid-out chart.

use std::fmt::Write;

use super::layout::{polar, LayoutModel, Rect, SeriesGeom, TextBox};
use crate::chart::{BorderType, ChartSpec, LineStyle, MarkerShape, SeriesSpec};
use crate::color::Rgb;
use crate::seed::ChartType;

const GRID: &str = "rgb(224,224,224)";
const INK: &str = "rgb(51,51,51)";
const DASH: &str = "6,4";

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn rgb(c: Rgb) -> String {
    format!("rgb({},{},{})", c[0], c[1], c[2])
}

fn text(out: &mut String, class: &str, tb: &TextBox, extra: &str) {
    let rotate = if tb.rotate {
        format!(" transform=\"rotate(-90 {:.2} {:.2})\"", tb.x, tb.y)
    } else {
        String::new()
    };
    let _ = writeln!(
        out,
        "<text class=\"{class}\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"{}\" text-anchor=\"{}\"{rotate}{extra}>{}</text>",
        tb.x,
        tb.y,
        tb.size,
        tb.anchor.as_str(),
        escape(&tb.text)
    );
}

fn rect_attrs(r: &Rect) -> String {
    format!(
        "x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\"",
        r.x, r.y, r.w, r.h
    )
}

fn marker(out: &mut String, shape: MarkerShape, x: f64, y: f64, s: f64, attrs: &str) {
    match shape {
        MarkerShape::Circle => {
            let _ = writeln!(out, "<circle class=\"point\" cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{s:.2}\"{attrs}/>");
        }
        MarkerShape::Square => {
            let _ = writeln!(
                out,
                "<rect class=\"point\" x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\"{attrs}/>",
                x - s,
                y - s,
                2.0 * s,
                2.0 * s
            );
        }
        MarkerShape::Triangle => {
            let _ = writeln!(
                out,
                "<polygon class=\"point\" points=\"{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}\"{attrs}/>",
                x,
                y - s * 1.2,
                x + s * 1.1,
                y + s * 0.8,
                x - s * 1.1,
                y + s * 0.8
            );
        }
        MarkerShape::Diamond => {
            let _ = writeln!(
                out,
                "<polygon class=\"point\" points=\"{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}\"{attrs}/>",
                x,
                y - s * 1.3,
                x + s,
                y,
                x,
                y + s * 1.3,
                x - s,
                y
            );
        }
    }
}

fn border_attrs(s: &SeriesSpec) -> String {
    match s.border_type {
        Some(BorderType::Solid) => format!(" stroke=\"{INK}\" stroke-width=\"1.5\""),
        Some(BorderType::Dashed) => format!(" stroke=\"{INK}\" stroke-width=\"1.5\" stroke-dasharray=\"{DASH}\""),
        Some(BorderType::None) | None => String::new(),
    }
}

fn sector_path(model: &LayoutModel, start: f64, end: f64) -> String {
    let frame = model.pie.as_ref().expect("pie frame");
    if end - start >= 360.0 - 1e-9 {
        let (x0, y0) = polar(frame, frame.r, 0.0);
        let (x1, y1) = polar(frame, frame.r, 180.0);
        return format!(
            "M {x0:.2} {y0:.2} A {r:.2} {r:.2} 0 1 1 {x1:.2} {y1:.2} A {r:.2} {r:.2} 0 1 1 {x0:.2} {y0:.2} Z",
            r = frame.r
        );
    }
    let (x0, y0) = polar(frame, frame.r, start);
    let (x1, y1) = polar(frame, frame.r, end);
    let large = if end - start > 180.0 { 1 } else { 0 };
    format!(
        "M {:.2} {:.2} L {x0:.2} {y0:.2} A {r:.2} {r:.2} 0 {large} 1 {x1:.2} {y1:.2} Z",
        frame.cx,
        frame.cy,
        r = frame.r
    )
}

/// Serialize `spec` laid out as `model`.
pub fn write_svg(spec: &ChartSpec, model: &LayoutModel) -> String {
    let [w, h] = spec.canvas;
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" data-chart-id=\"{}\" data-chart-type=\"{}\" font-family=\"{}\" fill=\"{INK}\">",
        escape(&spec.chart_id),
        spec.chart_type.as_str(),
        spec.font.css_family()
    );
    let _ = writeln!(
        out,
        "<rect class=\"background\" x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"{}\"/>",
        rgb(spec.background)
    );
    if let Some(t) = &model.title {
        text(&mut out, "title", t, " font-weight=\"bold\"");
    }

    let p = &model.plot_rect;
    let horizontal = spec.chart_type == ChartType::HorizontalBar;
    if let (Some(axis), Some(map)) = (&spec.axis, &model.value_map) {
        if spec.grid_visible {
            out.push_str("<g class=\"grid\">\n");
            for (v, _) in &model.value_ticks {
                let q = map.apply(*v);
                let (x1, y1, x2, y2) = if horizontal {
                    (q, p.y, q, p.bottom())
                } else {
                    (p.x, q, p.right(), q)
                };
                let _ = writeln!(
                    out,
                    "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{GRID}\" stroke-width=\"1\"/>"
                );
            }
            out.push_str("</g>\n");
        }

        // Category axis along the bottom (or the left for horizontal bars).
        out.push_str("<g class=\"axis category-axis\">\n");
        if axis.x_visible {
            let (x1, y1, x2, y2) = if horizontal {
                (p.x, p.y, p.x, p.bottom())
            } else {
                (p.x, p.bottom(), p.right(), p.bottom())
            };
            let _ = writeln!(
                out,
                "<line class=\"axis-line\" x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{INK}\" stroke-width=\"1\"/>"
            );
        }
        for tb in &model.category_ticks {
            text(&mut out, "x-tick", tb, &format!(" data-label=\"{}\"", escape(&tb.text)));
        }
        out.push_str("</g>\n");

        out.push_str("<g class=\"axis value-axis\">\n");
        if axis.y_visible {
            let (x1, y1, x2, y2) = if horizontal {
                (p.x, p.bottom(), p.right(), p.bottom())
            } else {
                (p.x, p.y, p.x, p.bottom())
            };
            let _ = writeln!(
                out,
                "<line class=\"axis-line\" x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{INK}\" stroke-width=\"1\"/>"
            );
        }
        for (v, tb) in &model.value_ticks {
            text(&mut out, "y-tick", tb, &format!(" data-value=\"{v}\""));
        }
        out.push_str("</g>\n");
        for tb in &model.axis_titles {
            text(&mut out, "axis-title", tb, "");
        }
    }

    for (idx, ((label, geom), s)) in model.series.iter().zip(&spec.series).enumerate() {
        let color = rgb(s.rgb);
        let _ = writeln!(
            out,
            "<g class=\"series\" data-series=\"{}\" data-color=\"{}\" data-index=\"{idx}\">",
            escape(label),
            s.color
        );
        let id = format!(" data-series=\"{}\"", escape(label));
        match geom {
            SeriesGeom::Polyline(pts) => {
                let points: Vec<String> = pts.iter().map(|q| format!("{:.2},{:.2}", q.x, q.y)).collect();
                let dash = match s.line_style {
                    Some(LineStyle::Dashed) => format!(" stroke-dasharray=\"{DASH}\""),
                    _ => String::new(),
                };
                let _ = writeln!(
                    out,
                    "<polyline class=\"series-line\"{id} data-line-style=\"{}\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{}\"{dash}/>",
                    s.line_style.unwrap_or(LineStyle::Solid).as_str(),
                    points.join(" "),
                    spec.line_width
                );
                for q in pts {
                    let attrs = format!(
                        "{id} data-x=\"{}\" data-value=\"{}\" fill=\"{color}\"",
                        escape(&q.x_label),
                        q.value
                    );
                    marker(&mut out, MarkerShape::Circle, q.x, q.y, spec.line_width + 1.5, &attrs);
                }
            }
            SeriesGeom::Points(pts) => {
                for q in pts {
                    let attrs = format!(
                        "{id} data-x=\"{}\" data-value=\"{}\" fill=\"{color}\"",
                        escape(&q.x_label),
                        q.value
                    );
                    marker(&mut out, s.marker.unwrap_or(MarkerShape::Circle), q.x, q.y, 4.5, &attrs);
                }
            }
            SeriesGeom::Bars(bars) => {
                let border = border_attrs(s);
                for b in bars {
                    let _ = writeln!(
                        out,
                        "<rect class=\"bar\"{id} data-x=\"{}\" data-value=\"{}\" {} fill=\"{color}\"{border}/>",
                        escape(&b.x_label),
                        b.value,
                        rect_attrs(&b.rect)
                    );
                }
            }
            SeriesGeom::Sector(sec) => {
                let _ = writeln!(
                    out,
                    "<path class=\"sector\"{id} data-value=\"{}\" data-start=\"{}\" data-end=\"{}\" d=\"{}\" fill=\"{color}\" stroke=\"{}\" stroke-width=\"1\"/>",
                    sec.value,
                    sec.start_deg,
                    sec.end_deg,
                    sector_path(model, sec.start_deg, sec.end_deg),
                    rgb(spec.background)
                );
            }
        }
        out.push_str("</g>\n");
    }

    if !model.value_labels.is_empty() {
        out.push_str("<g class=\"value-labels\">\n");
        for tb in &model.value_labels {
            text(&mut out, "value-label", tb, "");
        }
        out.push_str("</g>\n");
    }

    let _ = writeln!(
        out,
        "<g class=\"legend\" data-position=\"{}\">",
        match model.legend.position {
            crate::chart::LegendPosition::Top => "top",
            crate::chart::LegendPosition::Bottom => "bottom",
            crate::chart::LegendPosition::Left => "left",
            crate::chart::LegendPosition::Right => "right",
        }
    );
    for (i, (e, s)) in model.legend.entries.iter().zip(&spec.series).enumerate() {
        let _ = writeln!(
            out,
            "<g class=\"legend-entry\" data-series=\"{}\" data-index=\"{i}\">",
            escape(&e.label)
        );
        let color = rgb(s.rgb);
        match spec.chart_type {
            ChartType::Line => {
                let y = e.swatch.y + e.swatch.h / 2.0;
                let dash = match s.line_style {
                    Some(LineStyle::Dashed) => format!(" stroke-dasharray=\"{DASH}\""),
                    _ => String::new(),
                };
                let _ = writeln!(
                    out,
                    "<line class=\"legend-swatch\" x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"{color}\" stroke-width=\"{}\"{dash}/>",
                    e.swatch.x,
                    e.swatch.right(),
                    spec.line_width
                );
            }
            ChartType::Scatter => {
                marker(
                    &mut out,
                    s.marker.unwrap_or(MarkerShape::Circle),
                    e.swatch.x + e.swatch.w / 2.0,
                    e.swatch.y + e.swatch.h / 2.0,
                    4.5,
                    &format!(" fill=\"{color}\""),
                );
            }
            _ => {
                let _ = writeln!(
                    out,
                    "<rect class=\"legend-swatch\" {} fill=\"{color}\"{}/>",
                    rect_attrs(&e.swatch),
                    border_attrs(s)
                );
            }
        }
        text(&mut out, "legend-label", &e.text, "");
        out.push_str("</g>\n");
    }
    out.push_str("</g>\n</svg>\n");
    out
}
