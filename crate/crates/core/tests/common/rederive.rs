//! Gold answers recomputed from a ground-truth table with plain loops,
//! sharing no code with the generator.

use std::collections::{BTreeMap, BTreeSet};

use chartloop_core::answer::Answer;
use chartloop_core::chart::GroundTruth;

type B = BTreeMap<String, String>;

fn fmt(v: f64, p: u8) -> String {
    let s = format!("{:.*}", p as usize, v);
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn get<'a>(b: &'a B, k: &str) -> Option<&'a str> {
    b.get(k).map(String::as_str)
}

fn val(gt: &GroundTruth, s: &str, x: &str) -> Option<f64> {
    gt.data_table.get(s)?.get(x).copied()
}

fn one(hits: Vec<String>) -> Option<String> {
    if hits.len() == 1 {
        hits.into_iter().next()
    } else {
        None
    }
}

fn col(gt: &GroundTruth, x: &str) -> Option<Vec<f64>> {
    gt.data_table.keys().map(|s| val(gt, s, x)).collect()
}

fn asc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn series_where(gt: &GroundTruth, pred: impl Fn(&str) -> bool) -> Option<String> {
    one(gt.data_table.keys().filter(|s| pred(s)).cloned().collect())
}

fn by_color(gt: &GroundTruth, color: &str) -> Option<String> {
    series_where(gt, |s| gt.visual_map[s].color.as_str() == color)
}

fn by_line(gt: &GroundTruth, b: &B) -> Option<String> {
    let (c, st) = (get(b, "line_color")?, get(b, "line_style")?);
    series_where(gt, |s| {
        let v = &gt.visual_map[s];
        v.color.as_str() == c && v.line_style.map(|l| l.as_str()) == Some(st)
    })
}

/// Unique leftmost extreme x label of a series.
fn extreme_x(gt: &GroundTruth, s: &str, peak: bool) -> Option<String> {
    let row = gt.data_table.get(s)?;
    let mut best: Option<(&String, f64)> = None;
    let mut count = 0;
    for (x, v) in row {
        let better = match best {
            None => true,
            Some((_, b)) => (peak && *v > b) || (!peak && *v < b),
        };
        if better {
            best = Some((x, *v));
            count = 1;
        } else if best.map(|(_, b)| b) == Some(*v) {
            count += 1;
        }
    }
    (count == 1).then(|| best.unwrap().0.clone())
}

fn nth(gt: &GroundTruth, s: &str, n: usize) -> Option<f64> {
    gt.data_table.get(s)?.values().nth(n.checked_sub(1)?).copied()
}

fn longest_index(vals: &[f64], longest: bool) -> Option<usize> {
    let mags: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
    let target = if longest {
        mags.iter().cloned().fold(f64::MIN, f64::max)
    } else {
        mags.iter().cloned().fold(f64::MAX, f64::min)
    };
    let hits: Vec<usize> = (0..mags.len()).filter(|i| mags[*i] == target).collect();
    (hits.len() == 1).then(|| hits[0])
}

pub fn rederive(family: &str, b: &B, gt: &GroundTruth) -> Option<Answer> {
    let p = gt.precision;
    let n = || get(b, "n").and_then(|s| s.parse::<usize>().ok());
    let text = |s: String| Some(Answer::Text(s));
    match family {
        "value_at_label" => Some(Answer::Number(val(gt, get(b, "legend_label")?, get(b, "xlabel")?)?)),
        "label_for_value" => {
            let (x, want) = (get(b, "xlabel")?, get(b, "value_label")?);
            text(series_where(gt, |s| val(gt, s, x).map(|v| fmt(v, p)) == Some(want.to_string()))?)
        }
        "values_bottom_to_top" => {
            let c = col(gt, get(b, "xlabel")?)?;
            if gt.stacked {
                Some(Answer::List(c))
            } else {
                Some(Answer::List(asc(c)))
            }
        }
        "values_ascending_at_label" => Some(Answer::List(asc(col(gt, get(b, "xlabel")?)?))),
        "values_ascending_left_of" => {
            let i = gt.x_labels.iter().position(|l| l == get(b, "xlabel").unwrap())?;
            Some(Answer::List(asc(col(gt, &gt.x_labels[i.checked_sub(1)?])?)))
        }
        "legend_by_line_visual" => text(by_line(gt, b)?),
        "line_style_of_legend" => text(gt.visual_map.get(get(b, "legend_label")?)?.line_style?.as_str().to_string()),
        "nth_point_on_line" => Some(Answer::Number(nth(gt, &by_line(gt, b)?, n()?)?)),
        "lines_below_count" => {
            let (s, x) = (get(b, "legend_label")?, get(b, "xlabel")?);
            let v = val(gt, s, x)?;
            let mut below = 0;
            for o in gt.data_table.keys().filter(|o| o.as_str() != s) {
                let w = val(gt, o, x)?;
                if w == v {
                    return None;
                }
                below += u64::from(w < v);
            }
            Some(Answer::Count(below))
        }
        "peak_xlabel_by_legend" => text(extreme_x(gt, get(b, "legend_label")?, true)?),
        "trough_xlabel_by_legend" => text(extreme_x(gt, get(b, "legend_label")?, false)?),
        "peak_xlabel_by_visual" => text(extreme_x(gt, &by_line(gt, b)?, true)?),
        "trough_xlabel_by_visual" => text(extreme_x(gt, &by_line(gt, b)?, false)?),
        "nth_bar_from_left" | "nth_bar_from_bottom" => {
            let (c, border) = (get(b, "line_color")?, get(b, "border_type")?);
            let s = series_where(gt, |s| {
                let v = &gt.visual_map[s];
                v.color.as_str() == c && v.border_type.map(|t| t.as_str()) == Some(border)
            })?;
            Some(Answer::Number(nth(gt, &s, n()?)?))
        }
        "longest_bar_of_color" | "shortest_bar_of_color" => {
            let s = by_color(gt, get(b, "line_color")?)?;
            let vals: Vec<f64> = gt.data_table[&s].values().copied().collect();
            let i = longest_index(&vals, family == "longest_bar_of_color")?;
            Some(Answer::Number(vals[i]))
        }
        "bar_left_of_longest" => {
            let s = by_color(gt, get(b, "line_color")?)?;
            let vals: Vec<f64> = gt.data_table[&s].values().copied().collect();
            let i = longest_index(&vals, true)?;
            text(gt.x_labels[i.checked_sub(n()?)?].clone())
        }
        "color_of_legend" => text(gt.visual_map.get(get(b, "legend_label")?)?.color.as_str().to_string()),
        "legend_by_color" => text(by_color(gt, get(b, "line_color")?)?),
        "sector_label_by_color" => text(by_color(gt, get(b, "name_color")?)?),
        "sector_count" | "legend_count" => Some(Answer::Count(gt.data_table.len() as u64)),
        "distinct_color_count" => {
            let set: BTreeSet<&str> = gt.visual_map.values().map(|v| v.color.as_str()).collect();
            Some(Answer::Count(set.len() as u64))
        }
        "sector_share_by_label" => Some(Answer::Number(val(gt, get(b, "sector_label")?, get(b, "series_label")?)?)),
        "sector_label_by_share" => {
            let (pie, want) = (get(b, "series_label")?, get(b, "value_label")?);
            text(series_where(gt, |s| val(gt, s, pie).map(|v| fmt(v, p)) == Some(want.to_string()))?)
        }
        "sector_share_by_color" => {
            let s = by_color(gt, get(b, "name_color")?)?;
            Some(Answer::Number(val(gt, &s, &gt.x_labels[0])?))
        }
        "sector_color_by_label" => text(gt.visual_map.get(get(b, "sector_label")?)?.color.as_str().to_string()),
        "largest_sector_share" | "smallest_sector_share" => {
            let pie = get(b, "series_label")?;
            let shares = asc(gt.data_table.keys().map(|s| val(gt, s, pie)).collect::<Option<Vec<_>>>()?);
            Some(Answer::Number(if family == "largest_sector_share" {
                *shares.last()?
            } else {
                shares[0]
            }))
        }
        "scatter_y_at_x" => Some(Answer::Number(val(gt, get(b, "legend_name")?, get(b, "x_value")?)?)),
        "scatter_x_at_y" => {
            let (s, want) = (get(b, "legend_name")?, get(b, "y_value")?);
            let hits = gt.data_table.get(s)?.iter().filter(|(_, v)| fmt(**v, p) == want).map(|(x, _)| x.clone());
            text(one(hits.collect())?)
        }
        "scatter_legend_at_xy" => {
            let (x, want) = (get(b, "x_value")?, get(b, "y_value")?);
            text(series_where(gt, |s| val(gt, s, x).map(|v| fmt(v, p)) == Some(want.to_string()))?)
        }
        "peak_x_by_topic" => text(extreme_x(gt, get(b, "legend_name")?, true)?),
        "trough_x_by_topic" => text(extreme_x(gt, get(b, "legend_name")?, false)?),
        _ => None,
    }
}
