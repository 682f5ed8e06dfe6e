//! Deterministic SVG rendering.
//!
//! Text is measured with bundled metrics only, so the same spec produces the
//! same bytes everywhere. Every series element carries `data-series` with its
//! label; bars, points and sectors also carry `data-value`, and sectors carry
//! `data-start` / `data-end` angles in degrees (clockwise from 12 o'clock).

mod fonts;
mod layout;
#[cfg(feature = "raster")]
mod raster;
mod svg;

use thiserror::Error;

use crate::chart::ChartSpec;

pub use fonts::text_width;
pub use layout::{
    layout, polar, Affine, Anchor, BarGeom, LayoutModel, LegendEntry, LegendLayout, PieFrame, PointGeom, Rect,
    SectorGeom, SeriesGeom, TextBox, MIN_CANVAS, MIN_TICK_FONT,
};
#[cfg(feature = "raster")]
pub use raster::rasterize_png;
pub use svg::escape;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("canvas too small: {0}")]
    CanvasTooSmall(String),
    #[error("labels do not fit: {0}")]
    LabelsDoNotFit(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("rasterization failed: {0}")]
    Raster(String),
}

/// Render `spec` to a standalone SVG 1.1 document.
pub fn render_svg(spec: &ChartSpec) -> Result<Vec<u8>, RenderError> {
    let model = layout(spec)?;
    Ok(svg::write_svg(spec, &model).into_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::{compose_chart, ComposeOptions};
    use crate::palette::PaletteTable;
    use crate::seed::{synthesize_catalog, ChartType};

    fn chart_of(kind: ChartType) -> ChartSpec {
        let catalog = synthesize_catalog(3, 40);
        let palettes = PaletteTable::builtin();
        let seed = catalog.seeds.iter().find(|s| s.chart_type == kind).unwrap();
        compose_chart(seed, &palettes, 17, &ComposeOptions::default()).unwrap().0
    }

    #[test]
    fn equal_pie_sectors_are_quarters() {
        let mut spec = chart_of(ChartType::Pie);
        let labels: Vec<String> = spec.values.keys().take(4).cloned().collect();
        spec.values = labels.iter().map(|l| (l.clone(), vec![25.0])).collect();
        spec.series.truncate(4);
        let model = layout(&spec).unwrap();
        let mut prev = 0.0;
        for (_, g) in &model.series {
            let SeriesGeom::Sector(s) = g else { panic!() };
            assert_eq!(s.start_deg, prev);
            assert!((s.end_deg - s.start_deg - 90.0).abs() < 1e-9);
            prev = s.end_deg;
        }
        assert!((prev - 360.0).abs() < 1e-9);
    }

    #[test]
    fn bar_heights_are_proportional() {
        let mut spec = chart_of(ChartType::Bar);
        let first = spec.series[0].clone();
        spec.series = vec![first.clone()];
        spec.stacked = Some(false);
        spec.x_labels.truncate(2);
        spec.shown_x_labels = spec.x_labels.clone();
        spec.values = [(first.label.clone(), vec![10.0, 20.0])].into_iter().collect();
        spec.value_range = [0.0, 20.0];
        spec.axis = Some(crate::chart::AxisSpec {
            min: 0.0,
            max: 25.0,
            step: 5.0,
            x_visible: true,
            y_visible: true,
        });
        let model = layout(&spec).unwrap();
        let SeriesGeom::Bars(bars) = &model.series[0].1 else { panic!() };
        assert!((bars[1].rect.h - 2.0 * bars[0].rect.h).abs() <= 0.5);
    }

    #[test]
    fn omitted_ticks_have_no_text() {
        let mut spec = chart_of(ChartType::Line);
        let omitted = spec.x_labels[1].clone();
        spec.shown_x_labels.retain(|l| *l != omitted);
        let svg = String::from_utf8(render_svg(&spec).unwrap()).unwrap();
        assert!(!svg.contains(&format!("data-label=\"{}\"", escape(&omitted))));
        assert!(svg.contains(&format!("data-label=\"{}\"", escape(&spec.x_labels[0]))));
    }

    #[test]
    fn color_passes_through() {
        let mut spec = chart_of(ChartType::Bar);
        spec.series[0].rgb = [200, 30, 30];
        let svg = String::from_utf8(render_svg(&spec).unwrap()).unwrap();
        assert!(svg.contains("fill=\"rgb(200,30,30)\""));
    }

    #[test]
    fn rendering_is_byte_identical() {
        for kind in ChartType::ALL {
            let spec = chart_of(kind);
            assert_eq!(render_svg(&spec).unwrap(), render_svg(&spec).unwrap());
        }
    }

    #[test]
    fn tiny_canvas_is_rejected() {
        let mut spec = chart_of(ChartType::Line);
        spec.canvas = [200, 100];
        assert!(matches!(layout(&spec), Err(RenderError::CanvasTooSmall(_))));
    }

    #[test]
    fn tick_labels_never_overlap() {
        let catalog = synthesize_catalog(5, 200);
        let palettes = PaletteTable::builtin();
        for (i, seed) in catalog.seeds.iter().enumerate() {
            let (spec, _) = compose_chart(seed, &palettes, i as u64, &ComposeOptions::default()).unwrap();
            let model = layout(&spec).unwrap();
            let boxes: Vec<&Rect> = model.category_ticks.iter().map(|t| &t.rect).collect();
            for a in 0..boxes.len() {
                for b in a + 1..boxes.len() {
                    assert!(!boxes[a].intersects(boxes[b]), "{} overlaps", spec.chart_id);
                }
            }
        }
    }
}
