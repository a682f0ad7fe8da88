//! Seeded synthetic orchard frames with known cluster structure.
//!
//! Scenes are the ground-truth oracle for cluster-recovery and evaluation
//! tests: cluster centers are rejection-sampled at a minimum separation,
//! members scatter around them with isotropic Gaussian noise, and a
//! perturbation pass turns ground truth into imperfect "model output".
//!
//! Everything is a pure function of the seed. The draw order is part of the
//! contract: all centers first, then per cluster its member count followed
//! by each member's x offset, y offset, and category.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use thiserror::Error;

use crate::annotation::{BoundingBox, CategoryId, Detection, FrameAnnotations, Taxonomy};
use crate::geometry::{euclidean_distance, Point2};

/// Cluster centers are drawn from this margin-inset square so member scatter
/// rarely clamps at the frame edge.
pub const CENTER_REGION: RangeInclusive<f64> = 0.1..=0.9;

/// Total center draws before placement is declared infeasible.
pub const PLACEMENT_BUDGET: usize = 10_000;

/// Parameters of one synthetic frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub cluster_count: usize,
    pub members_per_cluster: RangeInclusive<usize>,
    /// Std-dev of member offsets from their cluster center.
    pub intra_spread: f64,
    /// Minimum pairwise distance between cluster centers.
    pub min_separation: f64,
    /// Normalized (width, height) applied to every generated box.
    pub box_size: (f64, f64),
    /// Probability that a member is an opened flower.
    pub opened_fraction: f64,
    pub seed: u64,
}

impl SceneSpec {
    /// Clusters separated comfortably beyond their scatter; k-recovery
    /// guarantees only hold for well-separated specs.
    pub fn is_well_separated(&self) -> bool {
        self.min_separation > 4.0 * self.intra_spread
    }

    fn validate(&self) -> Result<(), SynthError> {
        let fail = |reason: String| Err(SynthError::InvalidSpec { reason });
        if self.cluster_count == 0 {
            return fail("cluster_count must be at least 1".into());
        }
        let (lo, hi) = (
            *self.members_per_cluster.start(),
            *self.members_per_cluster.end(),
        );
        if lo < 1 || lo > hi {
            return fail(format!(
                "members_per_cluster {lo}..={hi} must be a nonempty range from 1"
            ));
        }
        if !self.intra_spread.is_finite() || self.intra_spread < 0.0 {
            return fail(format!(
                "intra_spread {} must be finite and >= 0",
                self.intra_spread
            ));
        }
        if !self.min_separation.is_finite() || self.min_separation <= 0.0 {
            return fail(format!(
                "min_separation {} must be finite and > 0",
                self.min_separation
            ));
        }
        for (name, v) in [
            ("box width", self.box_size.0),
            ("box height", self.box_size.1),
        ] {
            if !v.is_finite() || v <= 0.0 || v > 1.0 {
                return fail(format!("{name} {v} must be in (0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.opened_fraction) {
            return fail(format!(
                "opened_fraction {} must be in [0, 1]",
                self.opened_fraction
            ));
        }
        Ok(())
    }
}

/// A generated frame plus the structure it was generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    /// Ground-truth annotations (no confidences).
    pub frame: FrameAnnotations,
    /// Cluster index of each detection, parallel to `frame.detections`.
    pub true_labels: Vec<usize>,
    /// The drawn cluster centers (not the member means).
    pub true_centers: Vec<Point2>,
}

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid scene spec: {reason}")]
    InvalidSpec { reason: String },
    #[error(
        "could not place {cluster_count} centers at separation {min_separation} \
         within {PLACEMENT_BUDGET} draws"
    )]
    InfeasibleSpec {
        cluster_count: usize,
        min_separation: f64,
    },
}

/// Generate one frame from a spec, fully determined by `spec.seed`.
pub fn generate_scene(spec: &SceneSpec) -> Result<SyntheticScene, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let true_centers = place_centers(spec, &mut rng)?;

    let scatter = Normal::new(0.0, spec.intra_spread).expect("validated spread");
    let mut detections = Vec::new();
    let mut true_labels = Vec::new();
    for (cluster, center) in true_centers.iter().enumerate() {
        let members = rng.random_range(spec.members_per_cluster.clone());
        for _ in 0..members {
            let cx = (center.x + scatter.sample(&mut rng)).clamp(0.0, 1.0);
            let cy = (center.y + scatter.sample(&mut rng)).clamp(0.0, 1.0);
            let category = if rng.random::<f64>() < spec.opened_fraction {
                Taxonomy::OPENED
            } else {
                Taxonomy::UNOPENED
            };
            detections.push(Detection {
                category,
                bbox: BoundingBox::new(cx, cy, spec.box_size.0, spec.box_size.1)
                    .expect("clamped center and validated size"),
                confidence: None,
            });
            true_labels.push(cluster);
        }
    }

    Ok(SyntheticScene {
        frame: FrameAnnotations {
            frame_id: format!("scene_{}", spec.seed),
            detections,
            source_path: None,
        },
        true_labels,
        true_centers,
    })
}

fn place_centers(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Point2>, SynthError> {
    let mut centers: Vec<Point2> = Vec::with_capacity(spec.cluster_count);
    let mut draws = 0;
    while centers.len() < spec.cluster_count {
        if draws == PLACEMENT_BUDGET {
            return Err(SynthError::InfeasibleSpec {
                cluster_count: spec.cluster_count,
                min_separation: spec.min_separation,
            });
        }
        draws += 1;
        let candidate = Point2::new(
            rng.random_range(CENTER_REGION),
            rng.random_range(CENTER_REGION),
        );
        let admissible = centers
            .iter()
            .all(|c| euclidean_distance(c, &candidate) >= spec.min_separation);
        if admissible {
            centers.push(candidate);
        }
    }
    Ok(centers)
}

/// Degrade a scene's ground truth into prediction-style detections: drop
/// each detection with probability `drop_rate`, jitter survivors' centers
/// with Gaussian(`jitter`) noise, then add `Poisson(spurious_rate × n)`
/// spurious boxes uniform over the unit square. Survivors get confidences
/// in [0.5, 1.0) and spurious boxes in [0.1, 0.5), so ranking quality
/// degrades the way a real detector's does.
///
/// Rates must lie in [0, 1). Deterministic per `seed`, independent of the
/// scene's own seed.
pub fn perturb_detections(
    scene: &SyntheticScene,
    jitter: f64,
    drop_rate: f64,
    spurious_rate: f64,
    seed: u64,
) -> FrameAnnotations {
    assert!(
        (0.0..1.0).contains(&drop_rate),
        "drop_rate {drop_rate} outside [0, 1)"
    );
    assert!(
        (0.0..1.0).contains(&spurious_rate),
        "spurious_rate {spurious_rate} outside [0, 1)"
    );
    assert!(
        jitter.is_finite() && jitter >= 0.0,
        "jitter {jitter} must be finite and >= 0"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, jitter).expect("validated jitter");

    let mut detections = Vec::new();
    for detection in &scene.frame.detections {
        if rng.random::<f64>() < drop_rate {
            continue;
        }
        let cx = (detection.bbox.cx + noise.sample(&mut rng)).clamp(0.0, 1.0);
        let cy = (detection.bbox.cy + noise.sample(&mut rng)).clamp(0.0, 1.0);
        let confidence = rng.random_range(0.5..1.0);
        detections.push(Detection {
            category: detection.category,
            bbox: BoundingBox::new(cx, cy, detection.bbox.w, detection.bbox.h)
                .expect("clamped center, size unchanged"),
            confidence: Some(confidence),
        });
    }

    let spurious_size = scene
        .frame
        .detections
        .first()
        .map_or((0.05, 0.05), |d| (d.bbox.w, d.bbox.h));
    let rate = spurious_rate * scene.frame.detections.len() as f64;
    let spurious_count = if rate > 0.0 {
        Poisson::new(rate)
            .expect("positive finite rate")
            .sample(&mut rng) as usize
    } else {
        0
    };
    for _ in 0..spurious_count {
        let cx = rng.random::<f64>();
        let cy = rng.random::<f64>();
        let category = CategoryId(rng.random_range(0..2));
        let confidence = rng.random_range(0.1..0.5);
        detections.push(Detection {
            category,
            bbox: BoundingBox::new(cx, cy, spurious_size.0, spurious_size.1)
                .expect("unit-square center"),
            confidence: Some(confidence),
        });
    }

    FrameAnnotations {
        frame_id: scene.frame.frame_id.clone(),
        detections,
        source_path: None,
    }
}
