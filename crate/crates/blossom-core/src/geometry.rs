//! Box and point geometry: centroids, distances, intersection-over-union.
//!
//! Everything here is double-precision: silhouette gaps between candidate k
//! values can be small enough that `f32` would flip the argmax.

use crate::annotation::BoundingBox;

/// A 2D point in normalized image coordinates.
///
/// Values are typically inside `[0, 1]` but this is not enforced; centroids
/// of edge boxes or perturbed points may drift outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &Point2) -> f64 {
        euclidean_distance(self, other)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Point2 {
        Point2::new(self.x + dx, self.y + dy)
    }
}

/// Center of a normalized box. YOLO boxes store their center directly, so
/// this is a plain field read even when the box edges extend past the frame.
pub fn box_centroid(bbox: &BoundingBox) -> Point2 {
    Point2::new(bbox.cx, bbox.cy)
}

/// Euclidean distance between two points.
pub fn euclidean_distance(a: &Point2, b: &Point2) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}

/// Squared Euclidean distance; avoids the square root where only ordering
/// or sums of squares are needed.
pub fn squared_distance(a: &Point2, b: &Point2) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    dx * dx + dy * dy
}

/// Intersection-over-union of two axis-aligned boxes.
///
/// Boxes are closed rectangles built from `(cx, cy, w, h)` extents; an
/// edge-touching pair has zero intersection area and therefore IoU 0.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax0, ay0, ax1, ay1) = a.extents();
    let (bx0, by0, bx1, by1) = b.extents();

    let ix = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let iy = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let intersection = ix * iy;

    let union = a.area() + b.area() - intersection;
    if union <= 0.0 {
        return 0.0;
    }
    intersection / union
}
