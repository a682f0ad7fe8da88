//! `blossom`: turn per-frame flower detections into robot-actionable
//! cluster reports, score detections against ground truth, and generate
//! synthetic scenes with known structure.
//!
//! Exit codes: 0 on success, 1 on input or validation errors, 2 on usage
//! errors (malformed flags).

use std::collections::BTreeSet;
use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use blossom_core::annotation::{
    parse_label_file, serialize_label_file, CategoryId, FrameAnnotations, LabelMode, Taxonomy,
};
use blossom_core::clustering::KmeansConfig;
use blossom_core::pipeline::{run_sequence, PipelineConfig};
use blossom_core::render::render_overlay;
use blossom_core::report::{
    cluster_report_csv, cluster_report_json, eval_report_csv, eval_report_json, scene_truth_json,
};
use blossom_core::synth::{generate_scene, perturb_detections, SceneSpec};

/// Decorrelates the perturbation PRNG from the scene PRNG that shares the
/// same base seed.
const PERTURB_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Parser)]
#[command(
    name = "blossom",
    version,
    about = "Flower-cluster reports and detection evaluation for orchard robotics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster per-frame detections and report cluster centroids
    Cluster(ClusterArgs),
    /// Score predicted detections against ground-truth labels
    Evaluate(EvaluateArgs),
    /// Generate synthetic frames with known cluster structure
    Synth(SynthArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    /// 5-field lines: category cx cy w h
    GroundTruth,
    /// 6-field lines with a trailing confidence
    Prediction,
}

impl From<ModeArg> for LabelMode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::GroundTruth => LabelMode::GroundTruth,
            ModeArg::Prediction => LabelMode::Prediction,
        }
    }
}

#[derive(Args)]
struct ClusterArgs {
    /// Directory of per-frame label files (*.txt; frame ID = file stem)
    labels_dir: PathBuf,
    /// Largest cluster count the silhouette sweep may consider
    #[arg(long, default_value_t = 20)]
    k_max: usize,
    /// Best sweep score must exceed this or the frame collapses to one cluster
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    k1_threshold: f64,
    /// Keep only this category (name or numeric ID; repeatable)
    #[arg(long = "category")]
    categories: Vec<String>,
    /// Warn on clusters with more members than this
    #[arg(long = "max-items")]
    max_items: Option<usize>,
    /// k-means seed (falls back to BLOSSOM_SEED, then 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a per-cluster CSV here
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write one SVG overlay per frame into this directory
    #[arg(long, requires = "canvas")]
    render: Option<PathBuf>,
    /// Overlay canvas in pixels, as WIDTHxHEIGHT
    #[arg(long, value_parser = parse_canvas, requires = "render")]
    canvas: Option<(u32, u32)>,
    /// How label lines are parsed
    #[arg(long, value_enum, default_value_t = ModeArg::GroundTruth)]
    mode: ModeArg,
    /// Category names file, one name per line (default: unopened, opened)
    #[arg(long)]
    names: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory of prediction label files (6-field lines)
    #[arg(long)]
    pred: PathBuf,
    /// Directory of ground-truth label files (5-field lines)
    #[arg(long)]
    gt: PathBuf,
    /// IoU threshold for a prediction to match a ground-truth box
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    /// Confidence threshold for the scalar precision/recall
    #[arg(long, default_value_t = 0.25)]
    conf: f64,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a one-row summary CSV here
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Model tag for the CSV row (default: prediction directory name)
    #[arg(long)]
    model_tag: Option<String>,
    /// Category names file, one name per line (default: unopened, opened)
    #[arg(long)]
    names: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Number of flower clusters per frame
    #[arg(long)]
    clusters: usize,
    /// Members per cluster, as an inclusive range A..B (or a single count)
    #[arg(long, value_parser = parse_members)]
    members: (usize, usize),
    /// Std-dev of member offsets from their cluster center
    #[arg(long)]
    spread: f64,
    /// Minimum pairwise distance between cluster centers
    #[arg(long)]
    separation: f64,
    /// Probability that a flower is opened
    #[arg(long = "opened-frac", default_value_t = 0.3)]
    opened_frac: f64,
    /// Base seed (falls back to BLOSSOM_SEED, then 0); frame i uses seed + i
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (labels/, truth/, and optionally predictions/)
    #[arg(long)]
    out: PathBuf,
    /// Number of frames to generate
    #[arg(long, default_value_t = 1)]
    frames: usize,
    /// Normalized box size, as WxH
    #[arg(long = "box-size", value_parser = parse_box_size, default_value = "0.05x0.05")]
    box_size: (f64, f64),
    /// Also write perturbed predictions: centroid jitter std-dev
    #[arg(long)]
    jitter: Option<f64>,
    /// Also write perturbed predictions: per-detection drop probability
    #[arg(long = "drop-rate")]
    drop_rate: Option<f64>,
    /// Also write perturbed predictions: spurious boxes per ground-truth box
    #[arg(long = "spurious-rate")]
    spurious_rate: Option<f64>,
}

fn parse_canvas(value: &str) -> Result<(u32, u32), String> {
    let (w, h) = value
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("`{value}` is not WIDTHxHEIGHT"))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<u32>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| format!("`{s}` is not a positive pixel count"))
    };
    Ok((parse(w)?, parse(h)?))
}

fn parse_members(value: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = match value.split_once("..") {
        Some((lo, hi)) => (lo, hi),
        None => (value, value),
    };
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| format!("`{s}` is not a member count"))
    };
    let (lo, hi) = (parse(lo)?, parse(hi)?);
    if lo < 1 || lo > hi {
        return Err(format!("`{value}` is not a nonempty range from 1"));
    }
    Ok((lo, hi))
}

fn parse_box_size(value: &str) -> Result<(f64, f64), String> {
    let (w, h) = value
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("`{value}` is not WxH"))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v > 0.0 && *v <= 1.0)
            .ok_or_else(|| format!("`{s}` is not a normalized size in (0, 1]"))
    };
    Ok((parse(w)?, parse(h)?))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Cluster(args) => run_cluster(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Synth(args) => run_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

/// `--seed` wins over the `BLOSSOM_SEED` environment variable; absent both,
/// the seed is 0.
fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match env::var("BLOSSOM_SEED") {
        Ok(value) => value
            .trim()
            .parse()
            .map_err(|_| anyhow!("BLOSSOM_SEED `{value}` is not an unsigned 64-bit integer")),
        Err(env::VarError::NotPresent) => Ok(0),
        Err(env::VarError::NotUnicode(_)) => bail!("BLOSSOM_SEED is not valid unicode"),
    }
}

fn load_taxonomy(names: Option<&Path>) -> Result<Taxonomy> {
    match names {
        None => Ok(Taxonomy::default_flowers()),
        Some(path) => {
            let content = fs::read_to_string(path)
                .with_context(|| format!("reading names file {}", path.display()))?;
            Taxonomy::from_names_file(&content)
                .with_context(|| format!("names file {}", path.display()))
        }
    }
}

/// Read every `*.txt` file of a directory as one frame, sorted by file name.
/// The frame ID is the file stem.
fn read_label_dir(
    dir: &Path,
    mode: LabelMode,
    skip: Option<&Path>,
) -> Result<Vec<FrameAnnotations>> {
    let entries =
        fs::read_dir(dir).with_context(|| format!("reading directory {}", dir.display()))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry
            .with_context(|| format!("reading directory {}", dir.display()))?
            .path();
        let is_label = path.is_file() && path.extension().is_some_and(|e| e == "txt");
        if is_label && skip != Some(path.as_path()) {
            paths.push(path);
        }
    }
    paths.sort();

    let mut frames = Vec::with_capacity(paths.len());
    for path in paths {
        let frame_id = path
            .file_stem()
            .ok_or_else(|| anyhow!("{} has no file stem", path.display()))?
            .to_string_lossy()
            .into_owned();
        let content =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let mut frame = parse_label_file(&content, &frame_id, mode)
            .map_err(|err| anyhow!("{}: {err}", path.display()))?;
        frame.source_path = Some(path);
        frames.push(frame);
    }
    Ok(frames)
}

fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating directory {}", parent.display()))?;
        }
    }
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn emit_report(json: String, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_text(path, &json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn resolve_category(taxonomy: &Taxonomy, raw: &str) -> Result<CategoryId> {
    if let Some(id) = taxonomy.id_of(raw) {
        return Ok(id);
    }
    raw.parse::<u32>().map(CategoryId).map_err(|_| {
        anyhow!(
            "--category `{raw}` is neither a known category name nor a numeric ID; known: {}",
            taxonomy
                .categories()
                .iter()
                .map(|c| c.name.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        )
    })
}

fn check_unit_range(flag: &str, value: f64) -> Result<()> {
    if !(value.is_finite() && (0.0..=1.0).contains(&value)) {
        bail!("{flag} = {value} must be in [0, 1]");
    }
    Ok(())
}

fn run_cluster(args: ClusterArgs) -> Result<()> {
    let taxonomy = load_taxonomy(args.names.as_deref())?;
    let category_filter = if args.categories.is_empty() {
        None
    } else {
        let mut filter = BTreeSet::new();
        for raw in &args.categories {
            filter.insert(resolve_category(&taxonomy, raw)?);
        }
        Some(filter)
    };
    if args.k_max < 1 {
        bail!("--k-max must be at least 1");
    }
    if !args.k1_threshold.is_finite() {
        bail!("--k1-threshold must be finite");
    }

    let config = PipelineConfig {
        k_max: args.k_max,
        k1_threshold: args.k1_threshold,
        category_filter,
        kmeans: KmeansConfig::with_seed(resolve_seed(args.seed)?),
        max_items_warning: args.max_items,
    };

    let frames = read_label_dir(&args.labels_dir, args.mode.into(), args.names.as_deref())?;
    let reports = run_sequence(&frames, &config)?;

    if let Some(csv_path) = &args.csv {
        write_text(csv_path, &cluster_report_csv(&reports))?;
    }
    if let Some(render_dir) = &args.render {
        let (width, height) = args.canvas.expect("clap ties --render to --canvas");
        fs::create_dir_all(render_dir)
            .with_context(|| format!("creating directory {}", render_dir.display()))?;
        for (frame, report) in frames.iter().zip(&reports) {
            let svg = render_overlay(frame, report, width, height);
            write_text(&render_dir.join(format!("{}.svg", report.frame_id)), &svg)?;
        }
    }
    emit_report(
        cluster_report_json(&reports, &taxonomy),
        args.out.as_deref(),
    )
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    check_unit_range("--iou", args.iou)?;
    check_unit_range("--conf", args.conf)?;
    let taxonomy = load_taxonomy(args.names.as_deref())?;

    let gt_frames = read_label_dir(&args.gt, LabelMode::GroundTruth, args.names.as_deref())?;
    let pred_frames = read_label_dir(&args.pred, LabelMode::Prediction, args.names.as_deref())?;
    let report =
        blossom_core::evaluation::evaluate_dataset(&pred_frames, &gt_frames, args.iou, args.conf)?;

    if let Some(csv_path) = &args.csv {
        let tag = args.model_tag.clone().unwrap_or_else(|| {
            args.pred
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "model".to_string())
        });
        write_text(csv_path, &eval_report_csv(&report, &tag))?;
    }
    emit_report(eval_report_json(&report, &taxonomy), args.out.as_deref())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    if args.frames < 1 {
        bail!("--frames must be at least 1");
    }
    if !(args.spread.is_finite() && args.spread >= 0.0) {
        bail!("--spread = {} must be finite and >= 0", args.spread);
    }
    if !(args.separation.is_finite() && args.separation > 0.0) {
        bail!("--separation = {} must be finite and > 0", args.separation);
    }
    check_unit_range("--opened-frac", args.opened_frac)?;
    let perturb = match (args.jitter, args.drop_rate, args.spurious_rate) {
        (None, None, None) => None,
        (jitter, drop, spurious) => {
            let jitter = jitter.unwrap_or(0.0);
            if !(jitter.is_finite() && jitter >= 0.0) {
                bail!("--jitter = {jitter} must be finite and >= 0");
            }
            for (flag, rate) in [("--drop-rate", drop), ("--spurious-rate", spurious)] {
                if let Some(rate) = rate {
                    if !(rate.is_finite() && (0.0..1.0).contains(&rate)) {
                        bail!("{flag} = {rate} must be in [0, 1)");
                    }
                }
            }
            Some((jitter, drop.unwrap_or(0.0), spurious.unwrap_or(0.0)))
        }
    };

    let base_seed = resolve_seed(args.seed)?;
    for index in 0..args.frames {
        let seed = base_seed.wrapping_add(index as u64);
        let spec = SceneSpec {
            cluster_count: args.clusters,
            members_per_cluster: args.members.0..=args.members.1,
            intra_spread: args.spread,
            min_separation: args.separation,
            box_size: args.box_size,
            opened_fraction: args.opened_frac,
            seed,
        };
        let mut scene = generate_scene(&spec).with_context(|| format!("frame {index}"))?;
        let frame_id = format!("frame_{index:04}");
        scene.frame.frame_id = frame_id.clone();

        write_text(
            &args.out.join("labels").join(format!("{frame_id}.txt")),
            &serialize_label_file(&scene.frame, LabelMode::GroundTruth),
        )?;
        write_text(
            &args.out.join("truth").join(format!("{frame_id}.json")),
            &scene_truth_json(&scene),
        )?;
        if let Some((jitter, drop_rate, spurious_rate)) = perturb {
            let predictions = perturb_detections(
                &scene,
                jitter,
                drop_rate,
                spurious_rate,
                seed ^ PERTURB_SEED_SALT,
            );
            write_text(
                &args.out.join("predictions").join(format!("{frame_id}.txt")),
                &serialize_label_file(&predictions, LabelMode::Prediction),
            )?;
        }
    }
    println!(
        "wrote {} frame(s) with seed {} to {}",
        args.frames,
        base_seed,
        args.out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canvas_parsing() {
        assert_eq!(parse_canvas("640x480").unwrap(), (640, 480));
        assert_eq!(parse_canvas("1920X1080").unwrap(), (1920, 1080));
        assert!(parse_canvas("640").is_err());
        assert!(parse_canvas("0x480").is_err());
        assert!(parse_canvas("640x-1").is_err());
    }

    #[test]
    fn members_parsing() {
        assert_eq!(parse_members("3..8").unwrap(), (3, 8));
        assert_eq!(parse_members("4").unwrap(), (4, 4));
        assert!(parse_members("0..3").is_err());
        assert!(parse_members("5..3").is_err());
        assert!(parse_members("a..b").is_err());
    }

    #[test]
    fn box_size_parsing() {
        assert_eq!(parse_box_size("0.05x0.07").unwrap(), (0.05, 0.07));
        assert!(parse_box_size("0x0.05").is_err());
        assert!(parse_box_size("1.5x0.05").is_err());
        assert!(parse_box_size("0.05").is_err());
    }

    #[test]
    fn cli_structure_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
