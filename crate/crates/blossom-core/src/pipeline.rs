//! The per-frame processing loop: detections in, actionable clusters out.
//!
//! Each frame is filtered, reduced to box centroids, clustered with
//! silhouette-selected k, and summarized with raster-ordered cluster IDs.
//! Frames carry no shared state, so a sequence maps over them in parallel
//! and still reports in input order.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::annotation::{CategoryId, FrameAnnotations};
use crate::clustering::{assign_cluster_ids, select_k, ClusteringError, KmeansConfig};
use crate::exec;
use crate::geometry::{box_centroid, Point2};

/// Knobs of the per-frame loop.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Largest cluster count the silhouette sweep may consider.
    pub k_max: usize,
    /// Best sweep score must exceed this or the frame collapses to one
    /// cluster.
    pub k1_threshold: f64,
    /// Categories to keep; `None` keeps everything.
    pub category_filter: Option<BTreeSet<CategoryId>>,
    pub kmeans: KmeansConfig,
    /// Warn on clusters with more members than this (an overfull cluster is
    /// a thinning candidate).
    pub max_items_warning: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k_max: 20,
            k1_threshold: 0.0,
            category_filter: None,
            kmeans: KmeansConfig::default(),
            max_items_warning: None,
        }
    }
}

/// One cluster of a [`FrameClusterReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSummary {
    /// Raster-order identity: 0..k-1 by ascending centroid x, then y.
    pub id: usize,
    pub centroid: Point2,
    /// Indices into the frame's original detection list, ascending.
    pub member_indices: Vec<usize>,
    pub category_counts: BTreeMap<CategoryId, usize>,
    pub warnings: Vec<String>,
}

/// Robot-facing summary of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameClusterReport {
    pub frame_id: String,
    /// 0 only for frames with no detection left after filtering.
    pub chosen_k: usize,
    /// Ordered by cluster ID.
    pub clusters: Vec<ClusterSummary>,
    /// Mean silhouette per swept k.
    pub sweep_scores: BTreeMap<usize, f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("frame '{frame_id}': {source}")]
    Frame {
        frame_id: String,
        source: ClusteringError,
    },
}

/// Cluster one frame's detections.
pub fn process_frame(
    frame: &FrameAnnotations,
    config: &PipelineConfig,
) -> Result<FrameClusterReport, PipelineError> {
    let kept: Vec<usize> = frame
        .detections
        .iter()
        .enumerate()
        .filter_map(|(index, d)| {
            let keep = config
                .category_filter
                .as_ref()
                .is_none_or(|filter| filter.contains(&d.category));
            keep.then_some(index)
        })
        .collect();

    if kept.is_empty() {
        return Ok(FrameClusterReport {
            frame_id: frame.frame_id.clone(),
            chosen_k: 0,
            clusters: Vec::new(),
            sweep_scores: BTreeMap::new(),
        });
    }

    let points: Vec<Point2> = kept
        .iter()
        .map(|&index| box_centroid(&frame.detections[index].bbox))
        .collect();

    let selection =
        select_k(&points, config.k_max, &config.kmeans, config.k1_threshold).map_err(|source| {
            PipelineError::Frame {
                frame_id: frame.frame_id.clone(),
                source,
            }
        })?;
    let assignment = &selection.assignment;
    let ids = assign_cluster_ids(&assignment.centroids);

    let mut clusters: Vec<ClusterSummary> = (0..assignment.k)
        .map(|cluster| {
            let member_indices: Vec<usize> = assignment
                .labels
                .iter()
                .zip(&kept)
                .filter_map(|(&label, &original)| (label == cluster).then_some(original))
                .collect();
            let mut category_counts: BTreeMap<CategoryId, usize> = BTreeMap::new();
            for &index in &member_indices {
                *category_counts
                    .entry(frame.detections[index].category)
                    .or_insert(0) += 1;
            }
            let mut warnings = Vec::new();
            if let Some(max_items) = config.max_items_warning {
                if member_indices.len() > max_items {
                    warnings.push(format!(
                        "member count {} exceeds the configured maximum of {max_items}",
                        member_indices.len()
                    ));
                }
            }
            ClusterSummary {
                id: ids[cluster],
                centroid: assignment.centroids[cluster],
                member_indices,
                category_counts,
                warnings,
            }
        })
        .collect();
    clusters.sort_by_key(|c| c.id);

    Ok(FrameClusterReport {
        frame_id: frame.frame_id.clone(),
        chosen_k: selection.chosen_k,
        clusters,
        sweep_scores: selection.mean_silhouette_by_k,
    })
}

/// [`process_frame`] over an ordered frame sequence. Frames are independent;
/// failures surface in input order with the offending frame named.
pub fn run_sequence(
    frames: &[FrameAnnotations],
    config: &PipelineConfig,
) -> Result<Vec<FrameClusterReport>, PipelineError> {
    exec::map_slice(frames, |frame| process_frame(frame, config))
        .into_iter()
        .collect()
}
