//! Post-processing for per-frame flower detections.
//!
//! Turns YOLO-format detection annotations into robot-actionable cluster
//! reports: each frame's box centroids are grouped with k-means, the cluster
//! count is chosen by silhouette analysis, and every cluster gets a stable
//! raster-ordered identity plus a centroid waypoint. A separate evaluation
//! path scores predicted detections against ground truth with IoU matching,
//! precision/recall, and per-category average precision.
//!
//! Modules map onto the processing stages:
//!
//! - [`annotation`]: parse and serialize YOLO label files.
//! - [`geometry`]: box centroids, distances, IoU.
//! - [`clustering`]: k-means, silhouette scoring, automatic k selection.
//! - [`evaluation`]: detection matching, precision/recall/AP/mAP.
//! - [`synth`]: seeded synthetic scenes with known cluster structure.
//! - [`pipeline`]: the per-frame loop producing [`pipeline::FrameClusterReport`].
//! - [`render`]: SVG overlays of boxes and cluster centroids.
//! - [`report`]: canonical JSON/CSV emission for downstream consumers.
//!
//! All outputs are deterministic for a fixed seed, with or without the
//! `parallel` feature (enabled by default; parallelism only reorders work,
//! never results).

pub mod annotation;
pub mod clustering;
pub mod evaluation;
mod exec;
pub mod geometry;
pub mod pipeline;
pub mod render;
pub mod report;
pub mod synth;
