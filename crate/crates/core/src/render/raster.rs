//! Optional PNG output for evaluators that only accept raster images.

use super::RenderError;

/// Rasterize an SVG document to PNG at its native size. Text uses whatever
/// system fonts are installed, so PNG bytes are not portable across machines.
pub fn rasterize_png(svg: &[u8]) -> Result<Vec<u8>, RenderError> {
    let mut opt = resvg::usvg::Options::default();
    opt.fontdb_mut().load_system_fonts();
    let tree = resvg::usvg::Tree::from_data(svg, &opt).map_err(|e| RenderError::Raster(e.to_string()))?;
    let size = tree.size().to_int_size();
    let mut pixmap = resvg::tiny_skia::Pixmap::new(size.width(), size.height())
        .ok_or_else(|| RenderError::Raster("empty canvas".into()))?;
    resvg::render(&tree, resvg::tiny_skia::Transform::default(), &mut pixmap.as_mut());
    pixmap.encode_png().map_err(|e| RenderError::Raster(e.to_string()))
}
