//! Associating flower centroids to clusters.
//!
//! Lloyd's k-means with k-means++ seeding runs a fixed number of restarts,
//! each on its own deterministic PRNG stream, and keeps the restart with the
//! lowest within-cluster SSE. The cluster count is picked by sweeping k and
//! scoring each candidate with the mean silhouette coefficient; k = 1 is a
//! fallback because the silhouette is undefined there.
//!
//! Determinism contract: identical `(points, k, config)` produce bit-for-bit
//! identical labels, centroids, and SSE, with or without the `parallel`
//! feature. Restarts and sweep candidates are independent units of work; the
//! reductions over them are order-fixed.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec;
use crate::geometry::{euclidean_distance, squared_distance, Point2};

/// Two mean-silhouette scores closer than this are a tie; the smaller k wins.
pub const SELECT_K_TIE_EPSILON: f64 = 1e-12;

/// Solver parameters. The defaults are sized for per-frame point sets (tens
/// of flowers); restarts trade run time against the odds of a bad local
/// optimum.
#[derive(Debug, Clone)]
pub struct KmeansConfig {
    /// Independent k-means++ restarts; the lowest-SSE restart wins.
    pub restarts: usize,
    /// Upper bound on Lloyd iterations within one restart.
    pub max_iterations: usize,
    /// Stop once no centroid moved farther than this between iterations.
    pub convergence_epsilon: f64,
    /// Base PRNG seed; restart `r` draws from stream `r` of this seed.
    pub seed: u64,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iterations: 100,
            convergence_epsilon: 1e-9,
            seed: 0,
        }
    }
}

impl KmeansConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// A completed clustering: labels per point, one centroid per cluster, and
/// the within-cluster sum of squared distances.
///
/// Every cluster index in `[0, k)` has at least one member, and centroid `j`
/// is exactly the arithmetic mean of the points labeled `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub k: usize,
    pub labels: Vec<usize>,
    pub centroids: Vec<Point2>,
    pub sse: f64,
}

/// [`kmeans`] plus per-restart diagnostics, for callers that want to inspect
/// convergence behavior.
#[derive(Debug, Clone)]
pub struct KmeansTrace {
    pub assignment: ClusterAssignment,
    pub winning_restart: usize,
    /// SSE after each Lloyd update, one history per restart.
    pub sse_histories: Vec<Vec<f64>>,
}

/// Outcome of a silhouette sweep over candidate cluster counts.
#[derive(Debug, Clone)]
pub struct KSelectionResult {
    pub chosen_k: usize,
    pub assignment: ClusterAssignment,
    /// Mean silhouette per candidate k actually swept (k = 1 never appears;
    /// it is the fallback, not a scored candidate).
    pub mean_silhouette_by_k: BTreeMap<usize, f64>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClusteringError {
    #[error("no points to cluster")]
    EmptyInput,
    #[error("invalid k = {k} for {point_count} point(s)")]
    InvalidK { k: usize, point_count: usize },
    #[error("silhouette is undefined for a single cluster")]
    SingleCluster,
}

/// Lloyd's algorithm with k-means++ seeding and deterministic restarts.
///
/// Ties are all broken deterministically: point-to-centroid ties toward the
/// lower cluster index, equal-SSE restarts toward the lower restart index.
/// An emptied cluster is reseeded with the in-use point farthest from its
/// assigned centroid, so the result never contains an empty cluster.
pub fn kmeans(
    points: &[Point2],
    k: usize,
    config: &KmeansConfig,
) -> Result<ClusterAssignment, ClusteringError> {
    kmeans_traced(points, k, config).map(|trace| trace.assignment)
}

/// [`kmeans`] with per-restart SSE histories retained.
pub fn kmeans_traced(
    points: &[Point2],
    k: usize,
    config: &KmeansConfig,
) -> Result<KmeansTrace, ClusteringError> {
    if points.is_empty() {
        return Err(ClusteringError::EmptyInput);
    }
    if k < 1 || k > points.len() {
        return Err(ClusteringError::InvalidK {
            k,
            point_count: points.len(),
        });
    }

    let restarts = config.restarts.max(1);
    let outcomes = exec::map_range(restarts, |restart| {
        lloyd_restart(points, k, config, restart)
    });

    let mut winner = 0;
    for idx in 1..outcomes.len() {
        if outcomes[idx].sse < outcomes[winner].sse {
            winner = idx;
        }
    }

    let sse_histories = outcomes.iter().map(|o| o.sse_history.clone()).collect();
    let best = &outcomes[winner];
    let assignment = ClusterAssignment {
        k,
        labels: best.labels.clone(),
        centroids: best.centroids.clone(),
        sse: best.sse,
    };
    debug_assert!(member_counts(&assignment.labels, k).iter().all(|&c| c > 0));

    Ok(KmeansTrace {
        assignment,
        winning_restart: winner,
        sse_histories,
    })
}

struct RestartOutcome {
    labels: Vec<usize>,
    centroids: Vec<Point2>,
    sse: f64,
    sse_history: Vec<f64>,
}

fn lloyd_restart(
    points: &[Point2],
    k: usize,
    config: &KmeansConfig,
    restart: usize,
) -> RestartOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(restart as u64);

    let mut centroids = kmeans_pp_init(points, k, &mut rng);
    let mut labels: Vec<usize> = Vec::new();
    let mut sse = 0.0;
    let mut prev_sse = f64::INFINITY;
    let mut sse_history = Vec::new();

    for _ in 0..config.max_iterations {
        let new_labels = nearest_centroid_labels(points, &centroids);
        let stable = new_labels == labels;
        labels = new_labels;

        let mut counts = member_counts(&labels, k);
        reseed_empty_clusters(points, &mut labels, &centroids, &mut counts);

        let new_centroids = member_means(points, &labels, k, &counts);
        sse = within_cluster_sse(points, &labels, &new_centroids);
        debug_assert!(
            sse <= prev_sse + 1e-12,
            "Lloyd SSE increased: {prev_sse} -> {sse}"
        );
        sse_history.push(sse);

        let movement = centroids
            .iter()
            .zip(&new_centroids)
            .map(|(old, new)| euclidean_distance(old, new))
            .fold(0.0, f64::max);
        centroids = new_centroids;
        prev_sse = sse;

        if stable || movement < config.convergence_epsilon {
            break;
        }
    }

    RestartOutcome {
        labels,
        centroids,
        sse,
        sse_history,
    }
}

/// k-means++ seeding: the first center uniform over the points, each later
/// center drawn with probability proportional to its squared distance to the
/// nearest already-chosen center.
fn kmeans_pp_init(points: &[Point2], k: usize, rng: &mut ChaCha8Rng) -> Vec<Point2> {
    let mut centers = Vec::with_capacity(k);
    let first = rng.random_range(0..points.len());
    centers.push(points[first]);

    let mut nearest_sq: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centers[0]))
        .collect();

    while centers.len() < k {
        let total: f64 = nearest_sq.iter().sum();
        let chosen = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = first;
            for (i, &weight) in nearest_sq.iter().enumerate() {
                if weight <= 0.0 {
                    continue;
                }
                pick = i;
                if target < weight {
                    break;
                }
                target -= weight;
            }
            pick
        } else {
            // All remaining points coincide with chosen centers; any pick
            // yields an identical centroid set.
            rng.random_range(0..points.len())
        };
        let center = points[chosen];
        centers.push(center);
        for (i, p) in points.iter().enumerate() {
            let d = squared_distance(p, &center);
            if d < nearest_sq[i] {
                nearest_sq[i] = d;
            }
        }
    }
    centers
}

fn nearest_centroid_labels(points: &[Point2], centroids: &[Point2]) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            let mut best = 0;
            let mut best_sq = squared_distance(p, &centroids[0]);
            for (j, c) in centroids.iter().enumerate().skip(1) {
                let d = squared_distance(p, c);
                // strict comparison keeps the lower cluster index on ties
                if d < best_sq {
                    best = j;
                    best_sq = d;
                }
            }
            best
        })
        .collect()
}

fn member_counts(labels: &[usize], k: usize) -> Vec<usize> {
    let mut counts = vec![0usize; k];
    for &label in labels {
        counts[label] += 1;
    }
    counts
}

/// Give each empty cluster the point farthest from its assigned centroid,
/// never draining a singleton (that would just move the hole).
fn reseed_empty_clusters(
    points: &[Point2],
    labels: &mut [usize],
    centroids: &[Point2],
    counts: &mut [usize],
) {
    for empty in 0..counts.len() {
        if counts[empty] > 0 {
            continue;
        }
        let mut pick: Option<(f64, usize)> = None;
        for (i, p) in points.iter().enumerate() {
            if counts[labels[i]] <= 1 {
                continue;
            }
            let d = squared_distance(p, &centroids[labels[i]]);
            if pick.is_none_or(|(best, _)| d > best) {
                pick = Some((d, i));
            }
        }
        // k <= point count guarantees some cluster has >= 2 members here
        let (_, stolen) = pick.expect("a reseedable point exists");
        counts[labels[stolen]] -= 1;
        labels[stolen] = empty;
        counts[empty] = 1;
    }
}

fn member_means(points: &[Point2], labels: &[usize], k: usize, counts: &[usize]) -> Vec<Point2> {
    let mut sums = vec![(0.0f64, 0.0f64); k];
    for (p, &label) in points.iter().zip(labels) {
        sums[label].0 += p.x;
        sums[label].1 += p.y;
    }
    sums.iter()
        .zip(counts)
        .map(|(&(sx, sy), &n)| {
            debug_assert!(n > 0);
            Point2::new(sx / n as f64, sy / n as f64)
        })
        .collect()
}

fn within_cluster_sse(points: &[Point2], labels: &[usize], centroids: &[Point2]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &label)| squared_distance(p, &centroids[label]))
        .sum()
}

/// Silhouette coefficient of point `i` for a labeling with at least two
/// clusters: `(b - a) / max(a, b)` with `a` the mean distance to the other
/// members of its own cluster and `b` the smallest mean distance to any
/// other cluster.
///
/// A point that is its own cluster's only member scores 0 by convention, as
/// does a point with `a == b` (including the all-coincident case).
pub fn silhouette_coefficient(
    points: &[Point2],
    labels: &[usize],
    i: usize,
) -> Result<f64, ClusteringError> {
    let k = assignment_cluster_count(points, labels)?;
    assert!(i < points.len(), "point index {i} out of range");
    let members = members_by_cluster(labels, k);
    Ok(point_silhouette(points, labels, &members, i))
}

/// Arithmetic mean of the silhouette coefficient over all points.
pub fn mean_silhouette(points: &[Point2], labels: &[usize]) -> Result<f64, ClusteringError> {
    let k = assignment_cluster_count(points, labels)?;
    let members = members_by_cluster(labels, k);
    let total: f64 = (0..points.len())
        .map(|i| point_silhouette(points, labels, &members, i))
        .sum();
    Ok(total / points.len() as f64)
}

fn assignment_cluster_count(points: &[Point2], labels: &[usize]) -> Result<usize, ClusteringError> {
    if points.is_empty() {
        return Err(ClusteringError::EmptyInput);
    }
    assert_eq!(
        points.len(),
        labels.len(),
        "labels must cover every point exactly once"
    );
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    if k < 2 {
        return Err(ClusteringError::SingleCluster);
    }
    Ok(k)
}

fn members_by_cluster(labels: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); k];
    for (i, &label) in labels.iter().enumerate() {
        members[label].push(i);
    }
    members
}

fn point_silhouette(points: &[Point2], labels: &[usize], members: &[Vec<usize>], i: usize) -> f64 {
    let own = labels[i];
    let own_size = members[own].len();
    if own_size == 1 {
        return 0.0;
    }

    let a = members[own]
        .iter()
        .filter(|&&j| j != i)
        .map(|&j| euclidean_distance(&points[i], &points[j]))
        .sum::<f64>()
        / (own_size - 1) as f64;

    let mut b = f64::INFINITY;
    for (cluster, member_indices) in members.iter().enumerate() {
        if cluster == own || member_indices.is_empty() {
            continue;
        }
        let mean = member_indices
            .iter()
            .map(|&j| euclidean_distance(&points[i], &points[j]))
            .sum::<f64>()
            / member_indices.len() as f64;
        if mean < b {
            b = mean;
        }
    }

    let denom = a.max(b);
    if denom == 0.0 {
        0.0
    } else {
        (b - a) / denom
    }
}

/// Sweep k over `[2, min(k_max, n - 1)]` and keep the k with the highest
/// mean silhouette (ties within [`SELECT_K_TIE_EPSILON`] go to the smaller
/// k). Falls back to a single cluster when the sweep range is empty (fewer
/// than 3 points) or the best score does not exceed `k1_threshold`.
pub fn select_k(
    points: &[Point2],
    k_max: usize,
    config: &KmeansConfig,
    k1_threshold: f64,
) -> Result<KSelectionResult, ClusteringError> {
    if points.is_empty() {
        return Err(ClusteringError::EmptyInput);
    }
    if k_max < 1 {
        return Err(ClusteringError::InvalidK {
            k: k_max,
            point_count: points.len(),
        });
    }

    let hi = k_max.min(points.len().saturating_sub(1));
    let candidates: Vec<usize> = (2..=hi).collect();

    let evaluated = exec::map_slice(&candidates, |&k| {
        let assignment = kmeans(points, k, config).expect("candidate k is within [2, n-1]");
        let score = mean_silhouette(points, &assignment.labels).expect("candidate k >= 2");
        (assignment, score)
    });

    let mean_silhouette_by_k: BTreeMap<usize, f64> = candidates
        .iter()
        .zip(&evaluated)
        .map(|(&k, &(_, score))| (k, score))
        .collect();

    let mut best: Option<usize> = None;
    for (idx, &(_, score)) in evaluated.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => score > evaluated[b].1 + SELECT_K_TIE_EPSILON,
        };
        if better {
            best = Some(idx);
        }
    }

    match best {
        Some(idx) if evaluated[idx].1 > k1_threshold => Ok(KSelectionResult {
            chosen_k: candidates[idx],
            assignment: evaluated[idx].0.clone(),
            mean_silhouette_by_k,
        }),
        _ => {
            let assignment = kmeans(points, 1, config)?;
            Ok(KSelectionResult {
                chosen_k: 1,
                assignment,
                mean_silhouette_by_k,
            })
        }
    }
}

/// Per-cluster arithmetic mean of member points, indexed by cluster label.
pub fn cluster_centroids(points: &[Point2], labels: &[usize]) -> Vec<Point2> {
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    let counts = member_counts(labels, k);
    member_means(points, labels, k, &counts)
}

/// Raster-order identities for cluster centroids: ascending x, ties by
/// ascending y, remaining ties by original index. `ids[c]` is the identity
/// assigned to input centroid `c`.
pub fn assign_cluster_ids(centroids: &[Point2]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..centroids.len()).collect();
    order.sort_by(|&a, &b| {
        centroids[a]
            .x
            .total_cmp(&centroids[b].x)
            .then(centroids[a].y.total_cmp(&centroids[b].y))
            .then(a.cmp(&b))
    });
    let mut ids = vec![0usize; centroids.len()];
    for (rank, &original) in order.iter().enumerate() {
        ids[original] = rank;
    }
    ids
}
