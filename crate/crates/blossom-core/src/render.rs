//! Deterministic SVG overlays: detection boxes colored by category and a
//! "+" marker with an ID label at each cluster centroid.
//!
//! Output is a pure function of the inputs: elements appear in input order
//! and every coordinate is formatted with two fractional digits, so byte
//! comparison is a valid equality test.

use crate::annotation::{FrameAnnotations, Taxonomy};
use crate::pipeline::FrameClusterReport;

/// Stroke color per category: the two flower classes keep the palette of
/// the field overlays (unopened orange, opened dark red); anything else
/// falls back to gray.
fn category_color(category: crate::annotation::CategoryId) -> &'static str {
    match category {
        Taxonomy::UNOPENED => "orange",
        Taxonomy::OPENED => "darkred",
        _ => "gray",
    }
}

/// Half-length of a centroid marker arm, in pixels.
const MARKER_ARM: f64 = 6.0;

fn px(value: f64) -> String {
    format!("{value:.2}")
}

/// Render one frame and its cluster report to a standalone SVG document.
///
/// Canvas dimensions are in pixels and must be positive; normalized
/// coordinates scale to pixel space. Boxes extending past the frame edge
/// are clipped by the viewport.
pub fn render_overlay(
    frame: &FrameAnnotations,
    report: &FrameClusterReport,
    canvas_width: u32,
    canvas_height: u32,
) -> String {
    assert!(
        canvas_width > 0 && canvas_height > 0,
        "canvas must be positive"
    );
    let (w, h) = (f64::from(canvas_width), f64::from(canvas_height));

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{canvas_width}\" \
         height=\"{canvas_height}\" viewBox=\"0 0 {canvas_width} {canvas_height}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect width=\"{canvas_width}\" height=\"{canvas_height}\" fill=\"white\"/>\n"
    ));

    for detection in &frame.detections {
        let (x0, y0, x1, y1) = detection.bbox.extents();
        svg.push_str(&format!(
            "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" \
             stroke=\"{}\" stroke-width=\"2\"/>\n",
            px(x0 * w),
            px(y0 * h),
            px((x1 - x0) * w),
            px((y1 - y0) * h),
            category_color(detection.category),
        ));
    }

    for cluster in &report.clusters {
        let cx = cluster.centroid.x * w;
        let cy = cluster.centroid.y * h;
        svg.push_str(&format!(
            "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-width=\"2\"/>\n",
            px(cx - MARKER_ARM),
            px(cy),
            px(cx + MARKER_ARM),
            px(cy),
        ));
        svg.push_str(&format!(
            "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-width=\"2\"/>\n",
            px(cx),
            px(cy - MARKER_ARM),
            px(cx),
            px(cy + MARKER_ARM),
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" \
             fill=\"black\">{}</text>\n",
            px(cx + MARKER_ARM + 2.0),
            px(cy - MARKER_ARM - 2.0),
            cluster.id,
        ));
    }

    svg.push_str("</svg>\n");
    svg
}
