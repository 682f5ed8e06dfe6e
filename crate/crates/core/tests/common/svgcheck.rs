//! Reads a rendered SVG back and compares it with ground truth.

use chartloop_core::chart::GroundTruth;
use chartloop_core::seed::ChartType;
use roxmltree::{Document, Node};

fn has_class(n: &Node, c: &str) -> bool {
    n.attribute("class").is_some_and(|v| v.split_whitespace().any(|x| x == c))
}

fn num(n: &Node, a: &str) -> Result<f64, String> {
    n.attribute(a)
        .ok_or_else(|| format!("missing {a}"))?
        .parse()
        .map_err(|e| format!("{a}: {e}"))
}

fn css(rgb: [u8; 3]) -> String {
    format!("rgb({},{},{})", rgb[0], rgb[1], rgb[2])
}

fn children_with<'a, 'i>(n: Node<'a, 'i>, class: &'a str) -> impl Iterator<Item = Node<'a, 'i>> + 'a {
    n.children().filter(move |c| c.is_element() && has_class(c, class))
}

/// Pixels per data unit along the value axis, read from the tick labels.
fn tick_scale(doc: &Document, horizontal: bool) -> Option<f64> {
    let ticks: Vec<(f64, f64)> = doc
        .descendants()
        .filter(|n| has_class(n, "y-tick"))
        .filter_map(|n| {
            let v = num(&n, "data-value").ok()?;
            let p = num(&n, if horizontal { "x" } else { "y" }).ok()?;
            Some((v, p))
        })
        .collect();
    let (a, b) = (ticks.first()?, ticks.last()?);
    (a.0 != b.0).then(|| ((b.1 - a.1) / (b.0 - a.0)).abs())
}

/// Check colors, legend order, values, bar lengths and sector angles.
pub fn check(svg: &[u8], gt: &GroundTruth) -> Result<(), String> {
    let text = std::str::from_utf8(svg).map_err(|e| e.to_string())?;
    let doc = Document::parse(text).map_err(|e| e.to_string())?;
    let root = doc.root_element();
    if root.attribute("data-chart-id") != Some(gt.chart_id.as_str()) {
        return Err("chart id mismatch".into());
    }
    if root.attribute("data-chart-type") != Some(gt.chart_type.as_str()) {
        return Err("chart type mismatch".into());
    }

    let groups: Vec<Node> = doc.descendants().filter(|n| n.has_tag_name("g") && has_class(n, "series")).collect();
    let labels: Vec<&String> = gt.data_table.keys().collect();
    if groups.len() != labels.len() {
        return Err(format!("{} series groups for {} series", groups.len(), labels.len()));
    }

    let horizontal = gt.chart_type == ChartType::HorizontalBar;
    let mut bar_lengths: Vec<(f64, f64)> = Vec::new();
    let mut sweep = 0.0;
    for (g, label) in groups.iter().zip(&labels) {
        if g.attribute("data-series") != Some(label.as_str()) {
            return Err(format!("series order differs at {label}"));
        }
        let vis = &gt.visual_map[label.as_str()];
        let color = css(vis.rgb);
        if g.attribute("data-color") != Some(vis.color.as_str()) {
            return Err(format!("{label}: color name differs"));
        }
        let row = &gt.data_table[label.as_str()];
        match gt.chart_type {
            ChartType::Line => {
                let line = children_with(*g, "series-line").next().ok_or("no polyline")?;
                if line.attribute("stroke") != Some(color.as_str()) {
                    return Err(format!("{label}: line stroke differs"));
                }
                if line.attribute("data-line-style") != vis.line_style.map(|s| s.as_str()) {
                    return Err(format!("{label}: line style differs"));
                }
                check_marks(*g, "point", row, &color, label)?;
            }
            ChartType::Scatter => check_marks(*g, "point", row, &color, label)?,
            ChartType::Bar | ChartType::HorizontalBar => {
                check_marks(*g, "bar", row, &color, label)?;
                for r in children_with(*g, "bar") {
                    let len = num(&r, if horizontal { "width" } else { "height" })?;
                    bar_lengths.push((num(&r, "data-value")?.abs(), len));
                }
            }
            ChartType::Pie => {
                let s = children_with(*g, "sector").next().ok_or("no sector")?;
                if s.attribute("fill") != Some(color.as_str()) {
                    return Err(format!("{label}: sector fill differs"));
                }
                let share = row[gt.x_labels[0].as_str()];
                if num(&s, "data-value")? != share {
                    return Err(format!("{label}: sector value differs"));
                }
                let (start, end) = (num(&s, "data-start")?, num(&s, "data-end")?);
                if (start - sweep).abs() > 1e-9 {
                    return Err(format!("{label}: sector starts at {start}, expected {sweep}"));
                }
                if ((end - start) - share * 3.6).abs() > 1e-9 {
                    return Err(format!("{label}: sweep {} for share {share}", end - start));
                }
                sweep = end;
            }
        }
    }
    if gt.chart_type == ChartType::Pie && (sweep - 360.0).abs() > 1e-9 {
        return Err(format!("sectors cover {sweep} degrees"));
    }
    if !bar_lengths.is_empty() {
        let k = match tick_scale(&doc, horizontal) {
            Some(k) => k,
            None => {
                let (v, l) = bar_lengths.iter().cloned().fold((0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
                if v == 0.0 {
                    return Ok(());
                }
                l / v
            }
        };
        for (v, l) in &bar_lengths {
            if (l - k * v).abs() > 0.5 {
                return Err(format!("bar for {v} is {l} px, expected {}", k * v));
            }
        }
    }

    let legend = doc.descendants().find(|n| has_class(n, "legend")).ok_or("no legend")?;
    let entries: Vec<Node> = children_with(legend, "legend-entry").collect();
    let mut by_index: Vec<&String> = labels.clone();
    by_index.sort_by_key(|l| gt.visual_map[l.as_str()].legend_index);
    if entries.len() != by_index.len() {
        return Err("legend entry count differs".into());
    }
    for (e, label) in entries.iter().zip(by_index) {
        if e.attribute("data-series") != Some(label.as_str()) {
            return Err(format!("legend order differs at {label}"));
        }
        let color = css(gt.visual_map[label.as_str()].rgb);
        let swatch = e
            .children()
            .find(|c| c.is_element() && (has_class(c, "legend-swatch") || has_class(c, "point")))
            .ok_or("legend entry without swatch")?;
        let paint = swatch.attribute("fill").filter(|f| *f != "none").or(swatch.attribute("stroke"));
        if swatch.has_tag_name("line") {
            if swatch.attribute("stroke") != Some(color.as_str()) {
                return Err(format!("{label}: legend stroke differs"));
            }
        } else if paint != Some(color.as_str()) {
            return Err(format!("{label}: legend fill differs"));
        }
        let text = children_with(*e, "legend-label").next().and_then(|t| t.text()).unwrap_or_default();
        if text != label.as_str() {
            return Err(format!("legend label {text:?} for {label}"));
        }
    }

    if gt.chart_type.is_cartesian() {
        let shown: Vec<&str> = doc
            .descendants()
            .filter(|n| has_class(n, "x-tick"))
            .filter_map(|n| n.attribute("data-label"))
            .collect();
        if !shown.is_empty() && shown != gt.tick_plan.shown.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err("x tick labels differ from the tick plan".into());
        }
    }
    Ok(())
}

fn check_marks(
    g: Node,
    class: &str,
    row: &indexmap::IndexMap<String, f64>,
    color: &str,
    label: &str,
) -> Result<(), String> {
    let marks: Vec<Node> = children_with(g, class).collect();
    if marks.len() != row.len() {
        return Err(format!("{label}: {} marks for {} values", marks.len(), row.len()));
    }
    for (m, (x, v)) in marks.iter().zip(row) {
        if m.attribute("fill") != Some(color) {
            return Err(format!("{label}: mark fill differs"));
        }
        if m.attribute("data-x") != Some(x.as_str()) {
            return Err(format!("{label}: mark order differs at {x}"));
        }
        if num(m, "data-value")? != *v {
            return Err(format!("{label}@{x}: value differs"));
        }
    }
    Ok(())
}
