//! Throughput benchmarks for the frame pipeline.
//!
//! Run twice to compare execution modes; the group names carry the mode:
//!
//! ```text
//! cargo bench -p blossom-core
//! cargo bench -p blossom-core --no-default-features
//! ```

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use blossom_core::annotation::FrameAnnotations;
use blossom_core::clustering::{select_k, KmeansConfig};
use blossom_core::evaluation::evaluate_dataset;
use blossom_core::geometry::{box_centroid, Point2};
use blossom_core::pipeline::{run_sequence, PipelineConfig};
use blossom_core::synth::{generate_scene, perturb_detections, SceneSpec};

const MODE: &str = if cfg!(feature = "parallel") {
    "parallel"
} else {
    "sequential"
};

fn scene_spec(clusters: usize, seed: u64) -> SceneSpec {
    SceneSpec {
        cluster_count: clusters,
        members_per_cluster: 4..=8,
        intra_spread: 0.012,
        min_separation: 0.16,
        box_size: (0.04, 0.04),
        opened_fraction: 0.4,
        seed,
    }
}

fn frames(count: usize) -> Vec<FrameAnnotations> {
    (0..count)
        .map(|i| {
            let mut frame = generate_scene(&scene_spec(2 + i % 4, i as u64))
                .expect("feasible spec")
                .frame;
            frame.frame_id = format!("frame_{i:04}");
            frame
        })
        .collect()
}

fn bench_select_k(c: &mut Criterion) {
    let mut group = c.benchmark_group(format!("select_k/{MODE}"));
    let config = KmeansConfig::default();
    for clusters in [3, 5] {
        let scene = generate_scene(&scene_spec(clusters, 99)).expect("feasible spec");
        let points: Vec<Point2> = scene
            .frame
            .detections
            .iter()
            .map(|d| box_centroid(&d.bbox))
            .collect();
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{}pts", points.len())),
            &points,
            |b, points| b.iter(|| select_k(black_box(points), 8, &config, 0.0).unwrap()),
        );
    }
    group.finish();
}

fn bench_run_sequence(c: &mut Criterion) {
    let mut group = c.benchmark_group(format!("run_sequence/{MODE}"));
    group.sample_size(20);
    let config = PipelineConfig {
        k_max: 8,
        ..PipelineConfig::default()
    };
    for count in [8, 32] {
        let input = frames(count);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{count}frames")),
            &input,
            |b, input| b.iter(|| run_sequence(black_box(input), &config).unwrap()),
        );
    }
    group.finish();
}

fn bench_evaluate(c: &mut Criterion) {
    let mut group = c.benchmark_group(format!("evaluate/{MODE}"));
    group.sample_size(30);
    let gt: Vec<FrameAnnotations> = frames(32);
    let preds: Vec<FrameAnnotations> = gt
        .iter()
        .enumerate()
        .map(|(i, frame)| {
            let scene = blossom_core::synth::SyntheticScene {
                frame: frame.clone(),
                true_labels: vec![0; frame.detections.len()],
                true_centers: Vec::new(),
            };
            perturb_detections(&scene, 0.004, 0.1, 0.2, i as u64)
        })
        .collect();
    group.bench_function("32frames", |b| {
        b.iter(|| evaluate_dataset(black_box(&preds), black_box(&gt), 0.5, 0.25).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_select_k, bench_run_sequence, bench_evaluate);
criterion_main!(benches);
