//! Canonical report serialization.
//!
//! The JSON and CSV emitters are the contract with downstream consumers, so
//! their output is byte-stable: object keys are emitted in sorted order and
//! every fractional number carries exactly six fractional digits. That
//! fixed-width float rule is why serialization is hand-rolled rather than
//! delegated to a generic JSON writer.

use crate::annotation::Taxonomy;
use crate::evaluation::EvalReport;
use crate::pipeline::FrameClusterReport;

/// Canonical fractional-number rendering: six fractional digits, with the
/// `-0.000000` rounding artifact normalized away.
pub fn canonical_f64(value: f64) -> String {
    let rendered = format!("{value:.6}");
    if rendered == "-0.000000" {
        "0.000000".to_string()
    } else {
        rendered
    }
}

enum Json {
    Int(i64),
    Float(f64),
    Str(String),
    Array(Vec<Json>),
    /// Pairs must already be in key-sorted order.
    Object(Vec<(&'static str, Json)>),
    /// Like `Object`, for runtime keys (category names, frame IDs).
    KeyedObject(Vec<(String, Json)>),
}

impl Json {
    fn render(&self, out: &mut String, depth: usize) {
        match self {
            Json::Int(v) => out.push_str(&v.to_string()),
            Json::Float(v) => out.push_str(&canonical_f64(*v)),
            Json::Str(v) => render_string(v, out),
            Json::Array(items) => {
                render_items(out, depth, '[', ']', items.iter(), |item, out, d| {
                    item.render(out, d)
                })
            }
            Json::Object(pairs) => {
                debug_assert!(
                    pairs.windows(2).all(|w| w[0].0 < w[1].0),
                    "keys must be sorted"
                );
                render_items(
                    out,
                    depth,
                    '{',
                    '}',
                    pairs.iter(),
                    |(key, value), out, d| {
                        render_string(key, out);
                        out.push_str(": ");
                        value.render(out, d);
                    },
                );
            }
            Json::KeyedObject(pairs) => {
                debug_assert!(
                    pairs.windows(2).all(|w| w[0].0 <= w[1].0),
                    "keys must be sorted"
                );
                render_items(
                    out,
                    depth,
                    '{',
                    '}',
                    pairs.iter(),
                    |(key, value), out, d| {
                        render_string(key, out);
                        out.push_str(": ");
                        value.render(out, d);
                    },
                );
            }
        }
    }
}

fn render_items<T>(
    out: &mut String,
    depth: usize,
    open: char,
    close: char,
    items: impl ExactSizeIterator<Item = T>,
    mut render_one: impl FnMut(T, &mut String, usize),
) {
    if items.len() == 0 {
        out.push(open);
        out.push(close);
        return;
    }
    out.push(open);
    out.push('\n');
    let len = items.len();
    for (index, item) in items.enumerate() {
        out.push_str(&"  ".repeat(depth + 1));
        render_one(item, out, depth + 1);
        if index + 1 < len {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str(&"  ".repeat(depth));
    out.push(close);
}

fn render_string(value: &str, out: &mut String) {
    out.push('"');
    for c in value.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn document(root: Json) -> String {
    let mut out = String::new();
    root.render(&mut out, 0);
    out.push('\n');
    out
}

/// Cluster reports as a canonical JSON document. Category counts are keyed
/// by taxonomy name; sweep scores are `(k, score)` pairs in ascending k.
pub fn cluster_report_json(reports: &[FrameClusterReport], taxonomy: &Taxonomy) -> String {
    let frames = reports
        .iter()
        .map(|report| {
            let clusters = report
                .clusters
                .iter()
                .map(|cluster| {
                    let mut counts: Vec<(String, Json)> = cluster
                        .category_counts
                        .iter()
                        .map(|(&category, &count)| {
                            (taxonomy.name(category), Json::Int(count as i64))
                        })
                        .collect();
                    counts.sort_by(|a, b| a.0.cmp(&b.0));
                    Json::Object(vec![
                        ("category_counts", Json::KeyedObject(counts)),
                        (
                            "centroid",
                            Json::Object(vec![
                                ("x", Json::Float(cluster.centroid.x)),
                                ("y", Json::Float(cluster.centroid.y)),
                            ]),
                        ),
                        ("id", Json::Int(cluster.id as i64)),
                        (
                            "member_indices",
                            Json::Array(
                                cluster
                                    .member_indices
                                    .iter()
                                    .map(|&i| Json::Int(i as i64))
                                    .collect(),
                            ),
                        ),
                        (
                            "warnings",
                            Json::Array(
                                cluster
                                    .warnings
                                    .iter()
                                    .map(|w| Json::Str(w.clone()))
                                    .collect(),
                            ),
                        ),
                    ])
                })
                .collect();
            let sweep = report
                .sweep_scores
                .iter()
                .map(|(&k, &score)| {
                    Json::Object(vec![
                        ("k", Json::Int(k as i64)),
                        ("score", Json::Float(score)),
                    ])
                })
                .collect();
            Json::Object(vec![
                ("chosen_k", Json::Int(report.chosen_k as i64)),
                ("clusters", Json::Array(clusters)),
                ("frame_id", Json::Str(report.frame_id.clone())),
                ("sweep_scores", Json::Array(sweep)),
            ])
        })
        .collect();
    document(Json::Object(vec![("frames", Json::Array(frames))]))
}

/// Cluster reports as CSV, one row per cluster. The `unopened` and `opened`
/// columns count the two flower categories; other categories appear only in
/// the JSON report.
pub fn cluster_report_csv(reports: &[FrameClusterReport]) -> String {
    let mut out = String::from("frame_id,cluster_id,cx,cy,member_count,unopened,opened\n");
    for report in reports {
        for cluster in &report.clusters {
            let unopened = cluster
                .category_counts
                .get(&Taxonomy::UNOPENED)
                .copied()
                .unwrap_or(0);
            let opened = cluster
                .category_counts
                .get(&Taxonomy::OPENED)
                .copied()
                .unwrap_or(0);
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                csv_field(&report.frame_id),
                cluster.id,
                canonical_f64(cluster.centroid.x),
                canonical_f64(cluster.centroid.y),
                cluster.member_indices.len(),
                unopened,
                opened,
            ));
        }
    }
    out
}

/// Evaluation report as a canonical JSON document; categories are keyed by
/// taxonomy name.
pub fn eval_report_json(report: &EvalReport, taxonomy: &Taxonomy) -> String {
    let mut categories: Vec<(String, Json)> = report
        .per_category
        .iter()
        .map(|(&category, eval)| {
            let pr_curve = eval
                .pr_curve
                .points
                .iter()
                .map(|point| {
                    Json::Object(vec![
                        ("confidence", Json::Float(point.confidence)),
                        ("precision", Json::Float(point.precision)),
                        ("recall", Json::Float(point.recall)),
                    ])
                })
                .collect();
            let value = Json::Object(vec![
                ("ap", Json::Float(eval.ap)),
                (
                    "counts",
                    Json::Object(vec![
                        (
                            "false_negative",
                            Json::Int(eval.counts.false_negative as i64),
                        ),
                        (
                            "false_positive",
                            Json::Int(eval.counts.false_positive as i64),
                        ),
                        ("true_positive", Json::Int(eval.counts.true_positive as i64)),
                    ]),
                ),
                ("pr_curve", Json::Array(pr_curve)),
            ]);
            (taxonomy.name(category), value)
        })
        .collect();
    categories.sort_by(|a, b| a.0.cmp(&b.0));

    document(Json::Object(vec![
        (
            "confidence_threshold",
            Json::Float(report.confidence_threshold),
        ),
        ("iou_threshold", Json::Float(report.iou_threshold)),
        ("map_at_50", Json::Float(report.map_at_50)),
        ("per_category", Json::KeyedObject(categories)),
        ("precision", Json::Float(report.precision)),
        ("recall", Json::Float(report.recall)),
    ]))
}

/// Sidecar document for a synthetic scene: the generating cluster structure
/// in canonical JSON.
pub fn scene_truth_json(scene: &crate::synth::SyntheticScene) -> String {
    document(Json::Object(vec![
        (
            "true_centers",
            Json::Array(
                scene
                    .true_centers
                    .iter()
                    .map(|c| Json::Object(vec![("x", Json::Float(c.x)), ("y", Json::Float(c.y))]))
                    .collect(),
            ),
        ),
        (
            "true_labels",
            Json::Array(
                scene
                    .true_labels
                    .iter()
                    .map(|&l| Json::Int(l as i64))
                    .collect(),
            ),
        ),
    ]))
}

/// Evaluation summary as a one-row CSV in the column order of the familiar
/// detector comparison tables.
pub fn eval_report_csv(report: &EvalReport, model_tag: &str) -> String {
    format!(
        "model,mAP@0.5,precision,recall\n{},{},{},{}\n",
        csv_field(model_tag),
        canonical_f64(report.map_at_50),
        canonical_f64(report.precision),
        canonical_f64(report.recall),
    )
}

fn csv_field(value: &str) -> String {
    if value.contains(['"', ',', '\n', '\r']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}
