//! Property-based invariants over the geometry, clustering, evaluation, and
//! report layers.
//!
//! Coordinates are quantized to the 1e-6 grid of the label format so that
//! serialization round-trips are exact by construction.

use std::collections::BTreeMap;

use proptest::prelude::*;

use blossom_core::annotation::{
    parse_label_file, serialize_label_file, BoundingBox, CategoryId, Detection, FrameAnnotations,
    LabelMode, Taxonomy,
};
use blossom_core::clustering::{
    kmeans, mean_silhouette, select_k, silhouette_coefficient, KmeansConfig,
};
use blossom_core::evaluation::{average_precision, match_detections};
use blossom_core::geometry::{euclidean_distance, iou, Point2};
use blossom_core::pipeline::{process_frame, PipelineConfig};
use blossom_core::report::cluster_report_json;

fn unit6() -> impl Strategy<Value = f64> {
    (0u32..=1_000_000).prop_map(|v| f64::from(v) / 1e6)
}

fn size6() -> impl Strategy<Value = f64> {
    (1u32..=1_000_000).prop_map(|v| f64::from(v) / 1e6)
}

fn conf6() -> impl Strategy<Value = f64> {
    (0u32..=1_000_000).prop_map(|v| f64::from(v) / 1e6)
}

fn bbox() -> impl Strategy<Value = BoundingBox> {
    (unit6(), unit6(), size6(), size6()).prop_map(|(cx, cy, w, h)| {
        BoundingBox::new(cx, cy, w, h).expect("in-range by construction")
    })
}

fn detection(categories: u32, with_confidence: bool) -> impl Strategy<Value = Detection> {
    (0..categories, bbox(), conf6()).prop_map(move |(cat, bbox, conf)| Detection {
        category: CategoryId(cat),
        bbox,
        confidence: with_confidence.then_some(conf),
    })
}

fn point() -> impl Strategy<Value = Point2> {
    (unit6(), unit6()).prop_map(|(x, y)| Point2::new(x, y))
}

/// Points with a labeling that uses at least two clusters.
fn labeled_points() -> impl Strategy<Value = (Vec<Point2>, Vec<usize>)> {
    (2usize..=12)
        .prop_flat_map(|n| {
            (
                proptest::collection::vec(point(), n),
                proptest::collection::vec(0usize..4, n),
            )
        })
        .prop_filter("needs at least two distinct labels", |(_, labels)| {
            labels.iter().any(|&l| l != labels[0])
        })
}

proptest! {
    #[test]
    fn iou_is_symmetric_bounded_and_translation_invariant(a in bbox(), b in bbox()) {
        let forward = iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&forward));
        prop_assert_eq!(forward.to_bits(), iou(&b, &a).to_bits());

        // Deriving extents from center and size costs about one ulp of the
        // center per edge, which a sliver box amplifies to ulp/size relative
        // error; the tolerance has to scale with the worst conditioning.
        let tol = 1e-14 / a.w.min(a.h).min(b.w).min(b.h) + 1e-12;
        let shifted_a = a.translate(0.25, -0.125);
        let shifted_b = b.translate(0.25, -0.125);
        prop_assert!((iou(&shifted_a, &shifted_b) - forward).abs() < tol);

        let self_tol = 1e-14 / a.w.min(a.h) + 1e-12;
        prop_assert!((iou(&a, &a) - 1.0).abs() < self_tol);
    }

    #[test]
    fn distance_satisfies_triangle_inequality(a in point(), b in point(), c in point()) {
        let ab = euclidean_distance(&a, &b);
        prop_assert_eq!(ab.to_bits(), euclidean_distance(&b, &a).to_bits());
        prop_assert!(ab <= euclidean_distance(&a, &c) + euclidean_distance(&c, &b) + 1e-12);
        prop_assert_eq!(euclidean_distance(&a, &a), 0.0);
    }

    #[test]
    fn ground_truth_labels_round_trip(
        detections in proptest::collection::vec(detection(3, false), 0..12)
    ) {
        let frame = FrameAnnotations::new("frame", detections);
        let text = serialize_label_file(&frame, LabelMode::GroundTruth);
        let parsed = parse_label_file(&text, "frame", LabelMode::GroundTruth).unwrap();
        prop_assert_eq!(&parsed.detections, &frame.detections);
        let again = serialize_label_file(&parsed, LabelMode::GroundTruth);
        prop_assert_eq!(text, again, "serialization is canonical");
    }

    #[test]
    fn prediction_labels_round_trip(
        detections in proptest::collection::vec(detection(3, true), 0..12)
    ) {
        let frame = FrameAnnotations::new("frame", detections);
        let text = serialize_label_file(&frame, LabelMode::Prediction);
        let parsed = parse_label_file(&text, "frame", LabelMode::Prediction).unwrap();
        prop_assert_eq!(&parsed.detections, &frame.detections);
    }

    #[test]
    fn silhouette_values_stay_bounded((points, labels) in labeled_points()) {
        for i in 0..points.len() {
            let s = silhouette_coefficient(&points, &labels, i).unwrap();
            prop_assert!((-1.0..=1.0).contains(&s), "s({i}) = {s}");
        }
        let mean = mean_silhouette(&points, &labels).unwrap();
        prop_assert!((-1.0..=1.0).contains(&mean));
    }

    #[test]
    fn kmeans_output_is_internally_consistent(
        (points, k, seed) in (1usize..=24).prop_flat_map(|n| {
            (proptest::collection::vec(point(), n), 1..=n.min(5), any::<u64>())
        })
    ) {
        let config = KmeansConfig::with_seed(seed);
        let result = kmeans(&points, k, &config).unwrap();

        prop_assert_eq!(result.k, k);
        prop_assert_eq!(result.labels.len(), points.len());
        prop_assert_eq!(result.centroids.len(), k);

        let mut counts = vec![0usize; k];
        let mut sums = vec![(0.0, 0.0); k];
        for (p, &label) in points.iter().zip(&result.labels) {
            prop_assert!(label < k);
            counts[label] += 1;
            sums[label].0 += p.x;
            sums[label].1 += p.y;
        }
        for cluster in 0..k {
            prop_assert!(counts[cluster] > 0, "cluster {cluster} is empty");
            let n = counts[cluster] as f64;
            prop_assert!((result.centroids[cluster].x - sums[cluster].0 / n).abs() < 1e-12);
            prop_assert!((result.centroids[cluster].y - sums[cluster].1 / n).abs() < 1e-12);
        }

        let sse: f64 = points
            .iter()
            .zip(&result.labels)
            .map(|(p, &label)| {
                let c = &result.centroids[label];
                (p.x - c.x).powi(2) + (p.y - c.y).powi(2)
            })
            .sum();
        prop_assert!((result.sse - sse).abs() < 1e-9, "{} vs {sse}", result.sse);

        let rerun = kmeans(&points, k, &config).unwrap();
        prop_assert_eq!(result.labels, rerun.labels);
        prop_assert_eq!(result.sse.to_bits(), rerun.sse.to_bits());
    }

    #[test]
    fn select_k_stays_in_range(
        (points, k_max) in (1usize..=16).prop_flat_map(|n| {
            (proptest::collection::vec(point(), n), 1usize..=8)
        })
    ) {
        let result = select_k(&points, k_max, &KmeansConfig::default(), 0.0).unwrap();
        let sweep_hi = k_max.min(points.len().saturating_sub(1));
        prop_assert!(result.chosen_k == 1 || (2..=sweep_hi).contains(&result.chosen_k));
        prop_assert_eq!(result.assignment.k, result.chosen_k);
        for &k in result.mean_silhouette_by_k.keys() {
            prop_assert!((2..=sweep_hi).contains(&k));
        }
    }

    #[test]
    fn ap_depends_only_on_confidence_ranks(
        gt in proptest::collection::vec(detection(2, false), 0..4),
        preds in proptest::collection::vec(detection(2, true), 1..6),
    ) {
        let rescaled: Vec<Detection> = preds
            .iter()
            .map(|d| Detection {
                confidence: d.confidence.map(|c| 0.25 + c * 0.5),
                ..d.clone()
            })
            .collect();
        for category in [CategoryId(0), CategoryId(1)] {
            let base = average_precision(&preds, &gt, category, 0.5).unwrap();
            let transformed = average_precision(&rescaled, &gt, category, 0.5).unwrap();
            prop_assert!((base - transformed).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&base));
        }
    }

    #[test]
    fn removing_a_false_positive_never_lowers_ap(
        gt in proptest::collection::vec(detection(1, false), 1..4),
        preds in proptest::collection::vec(detection(1, true), 1..6),
    ) {
        let category = CategoryId(0);
        let full = average_precision(&preds, &gt, category, 0.5).unwrap();
        let outcome = match_detections(&preds, &gt, 0.5).unwrap();
        for m in outcome.ranked.iter().filter(|m| m.matched_gt.is_none()) {
            let mut reduced = preds.clone();
            reduced.remove(m.prediction_index);
            let without = average_precision(&reduced, &gt, category, 0.5).unwrap();
            prop_assert!(without + 1e-12 >= full, "removing FP dropped AP {full} -> {without}");
        }
    }

    #[test]
    fn match_counts_are_conserved(
        gt in proptest::collection::vec(detection(2, false), 0..6),
        preds in proptest::collection::vec(detection(2, true), 0..6),
    ) {
        let outcome = match_detections(&preds, &gt, 0.5).unwrap();
        prop_assert_eq!(outcome.ranked.len(), preds.len());
        prop_assert_eq!(outcome.ground_truth_count(), gt.len());

        let counts = outcome.confusion_at(0.0);
        prop_assert_eq!(counts.true_positive + counts.false_positive, preds.len());
        prop_assert_eq!(counts.true_positive + counts.false_negative, gt.len());

        let at_half = outcome.confusion_at(0.5);
        let above: usize = outcome.ranked.iter().filter(|m| m.confidence >= 0.5).count();
        prop_assert_eq!(at_half.true_positive + at_half.false_positive, above);
    }

    #[test]
    fn frame_reports_partition_detections(
        detections in proptest::collection::vec(detection(2, false), 0..16),
        filter_one in any::<bool>(),
    ) {
        let frame = FrameAnnotations::new("frame", detections);
        let config = PipelineConfig {
            k_max: 5,
            category_filter: filter_one.then(|| [CategoryId(0)].into()),
            ..PipelineConfig::default()
        };
        let report = process_frame(&frame, &config).unwrap();

        let expected: Vec<usize> = frame
            .detections
            .iter()
            .enumerate()
            .filter_map(|(i, d)| {
                (!filter_one || d.category == CategoryId(0)).then_some(i)
            })
            .collect();

        let mut actual: Vec<usize> = report
            .clusters
            .iter()
            .flat_map(|c| c.member_indices.iter().copied())
            .collect();
        let before_dedup = actual.len();
        actual.sort_unstable();
        actual.dedup();
        prop_assert_eq!(actual.len(), before_dedup, "no index appears twice");
        prop_assert_eq!(actual, expected);

        let mut totals: BTreeMap<CategoryId, usize> = BTreeMap::new();
        for cluster in &report.clusters {
            prop_assert_eq!(
                cluster.category_counts.values().sum::<usize>(),
                cluster.member_indices.len()
            );
            for (&category, &count) in &cluster.category_counts {
                *totals.entry(category).or_insert(0) += count;
            }
        }
        for (&category, &count) in &totals {
            let direct = frame
                .detections
                .iter()
                .filter(|d| d.category == category)
                .count();
            prop_assert!(count <= direct);
        }

        if report.chosen_k > 0 {
            for pair in report.clusters.windows(2) {
                prop_assert!(pair[0].id < pair[1].id);
                prop_assert!(pair[0].centroid.x <= pair[1].centroid.x + 1e-12, "raster order");
            }
        }
    }

    #[test]
    fn cluster_reports_always_serialize_to_valid_json(
        frame_id in "[ -~]{0,24}",
        detections in proptest::collection::vec(detection(2, false), 0..10),
    ) {
        let frame = FrameAnnotations::new(frame_id, detections);
        let report = process_frame(&frame, &PipelineConfig::default()).unwrap();
        let json = cluster_report_json(&[report], &Taxonomy::default_flowers());
        let parsed: Result<serde_json::Value, _> = serde_json::from_str(&json);
        prop_assert!(parsed.is_ok(), "invalid JSON: {json}");
    }
}
