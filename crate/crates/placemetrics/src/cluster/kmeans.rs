//! Seeded k-means: k-means++ initialization, Lloyd iterations with
//! empty-cluster repair, and a best-of-restarts driver.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::seeding::sub_seed;

/// Number of k-means++ restarts per [`kmeans`] call.
pub const KMEANS_RESTARTS: usize = 20;
/// Lloyd iteration cap per restart.
pub const KMEANS_MAX_ITER: usize = 300;
/// Convergence threshold: maximum centroid displacement between iterations.
pub const KMEANS_TOL: f64 = 1e-4;

/// Result of one clustering call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSolution {
    pub k: usize,
    /// Cluster id (0-based) per point.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squared distances.
    pub wcss: f64,
    /// Mean silhouette width; `None` for k = 1.
    pub silhouette_mean: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// WCSS after each completed Lloyd iteration of the winning restart;
    /// non-increasing by construction.
    pub wcss_trajectory: Vec<f64>,
}

/// Squared Euclidean distance.
#[must_use]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum()
}

/// Euclidean distance.
#[must_use]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Number of distinct points (exact bit-level comparison).
fn distinct_points(points: &[Vec<f64>]) -> usize {
    let mut set: BTreeSet<Vec<u64>> = BTreeSet::new();
    for p in points {
        set.insert(p.iter().map(|v| v.to_bits()).collect());
    }
    set.len()
}

fn validate_points(points: &[Vec<f64>], k: usize) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InsufficientData("kmeans requires at least one point".into()));
    }
    if k == 0 {
        return Err(Error::Domain("k must be positive".into()));
    }
    let dim = points[0].len();
    if dim == 0 {
        return Err(Error::Domain("points must have at least one coordinate".into()));
    }
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::LengthMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        if let Some(bad) = p.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("point {i} has non-finite coordinate {bad}")));
        }
    }
    let distinct = distinct_points(points);
    if distinct < k {
        return Err(Error::Infeasible(format!(
            "k = {k} exceeds the {distinct} distinct points"
        )));
    }
    Ok(())
}

/// k-means++ seeding: first centroid uniform, then points weighted by their
/// squared distance to the nearest chosen centroid.
fn kmeans_pp_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].clone());
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| sq_dist(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        // total > 0 is guaranteed while fewer than `distinct` centroids are
        // chosen (validated upfront).
        let mut r = rng.random::<f64>() * total;
        let mut chosen = n - 1;
        for (i, &w) in d2.iter().enumerate() {
            r -= w;
            if r <= 0.0 {
                chosen = i;
                break;
            }
        }
        centroids.push(points[chosen].clone());
        let last = centroids.last().expect("just pushed");
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, last));
        }
    }
    centroids
}

struct LloydRun {
    assignments: Vec<usize>,
    centroids: Vec<Vec<f64>>,
    wcss: f64,
    iterations: usize,
    converged: bool,
    trajectory: Vec<f64>,
}

/// Assign every point to its nearest centroid (ties to the lowest cluster id)
/// and return the squared distances.
fn assign_nearest(points: &[Vec<f64>], centroids: &[Vec<f64>], assignments: &mut [usize], d2: &mut [f64]) {
    for (i, p) in points.iter().enumerate() {
        let mut best = 0usize;
        let mut best_d = sq_dist(p, &centroids[0]);
        for (c, centroid) in centroids.iter().enumerate().skip(1) {
            let d = sq_dist(p, centroid);
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        assignments[i] = best;
        d2[i] = best_d;
    }
}

/// Lloyd iterations from explicit starting centroids.
///
/// Empty-cluster repair: after each assignment step any empty cluster is
/// re-seeded with the point farthest from its current centroid (donors must
/// leave at least one member behind), which keeps the WCSS trajectory
/// non-increasing.
fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> LloydRun {
    let n = points.len();
    let k = centroids.len();
    let dim = points[0].len();
    let mut assignments = vec![0usize; n];
    let mut d2 = vec![0.0f64; n];
    let mut trajectory = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < KMEANS_MAX_ITER {
        iterations += 1;
        assign_nearest(points, &centroids, &mut assignments, &mut d2);

        // Empty-cluster repair.
        let mut sizes = vec![0usize; k];
        for &a in &assignments {
            sizes[a] += 1;
        }
        for c in 0..k {
            while sizes[c] == 0 {
                let farthest = (0..n)
                    .filter(|&i| sizes[assignments[i]] > 1)
                    .max_by(|&i, &j| d2[i].partial_cmp(&d2[j]).expect("finite"))
                    .expect("some cluster has more than one member");
                sizes[assignments[farthest]] -= 1;
                assignments[farthest] = c;
                sizes[c] += 1;
                centroids[c] = points[farthest].clone();
                d2[farthest] = 0.0;
            }
        }

        // Update step.
        let mut new_centroids = vec![vec![0.0f64; dim]; k];
        for (p, &a) in points.iter().zip(&assignments) {
            for (acc, &v) in new_centroids[a].iter_mut().zip(p) {
                *acc += v;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            for v in &mut new_centroids[c] {
                *v /= sizes[c] as f64;
            }
            shift = shift.max(dist(&new_centroids[c], &centroids[c]));
        }
        centroids = new_centroids;

        let wcss: f64 = points
            .iter()
            .zip(&assignments)
            .map(|(p, &a)| sq_dist(p, &centroids[a]))
            .sum();
        trajectory.push(wcss);

        if shift < KMEANS_TOL {
            converged = true;
            break;
        }
    }

    let wcss = *trajectory.last().expect("at least one iteration ran");
    LloydRun {
        assignments,
        centroids,
        wcss,
        iterations,
        converged,
        trajectory,
    }
}

/// Best-of-restarts k-means with optional extra starting configurations.
///
/// Runs [`KMEANS_RESTARTS`] k-means++ restarts (restart `r` uses
/// `sub_seed(seed, r)`) plus one Lloyd run per entry of `extra_inits`, and
/// keeps the lowest final WCSS (first winner on ties).
pub fn kmeans_with_inits(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    extra_inits: &[Vec<Vec<f64>>],
) -> Result<ClusterSolution> {
    validate_points(points, k)?;

    let mut best: Option<LloydRun> = None;
    let mut consider = |run: LloydRun| {
        if best.as_ref().map_or(true, |b| run.wcss < b.wcss) {
            best = Some(run);
        }
    };

    for r in 0..KMEANS_RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, r as u64));
        let init = kmeans_pp_init(points, k, &mut rng);
        consider(lloyd(points, init));
    }
    for init in extra_inits {
        if init.len() == k && init.iter().all(|c| c.len() == points[0].len()) {
            consider(lloyd(points, init.clone()));
        }
    }

    let run = best.expect("at least one restart ran");
    let silhouette_mean = if k >= 2 && points.len() >= 2 {
        Some(super::validation::silhouette(points, &run.assignments)?.mean)
    } else {
        None
    };
    Ok(ClusterSolution {
        k,
        assignments: run.assignments,
        centroids: run.centroids,
        wcss: run.wcss,
        silhouette_mean,
        iterations: run.iterations,
        converged: run.converged,
        wcss_trajectory: run.trajectory,
    })
}

/// Seeded best-of-restarts k-means.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterSolution> {
    kmeans_with_inits(points, k, seed, &[])
}

/// One point of the WCSS-vs-k curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KWcss {
    pub k: usize,
    pub wcss: f64,
}

/// WCSS curve over a k range with the elbow location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WcssCurve {
    pub points: Vec<KWcss>,
    /// k maximizing the discrete second difference
    /// `J(k-1) - 2 J(k) + J(k+1)`; `None` when the range has fewer than
    /// three values of k.
    pub elbow_k: Option<usize>,
}

/// Split candidate for warm-starting k+1 from the best k solution: the
/// previous centroids plus the point farthest from its assigned centroid.
pub(crate) fn split_init(points: &[Vec<f64>], solution: &ClusterSolution) -> Vec<Vec<f64>> {
    let farthest = points
        .iter()
        .zip(&solution.assignments)
        .map(|(p, &a)| sq_dist(p, &solution.centroids[a]))
        .enumerate()
        .max_by(|(_, a), (_, b)| a.partial_cmp(b).expect("finite"))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut init = solution.centroids.clone();
    init.push(points[farthest].clone());
    init
}

/// Cluster every k in `k_min..=k_max` and report the WCSS curve.
///
/// The restart pool for k+1 always includes a split of the best k solution,
/// which makes the best-of-restarts WCSS non-increasing in k.
pub fn wcss_curve(points: &[Vec<f64>], k_min: usize, k_max: usize, seed: u64) -> Result<WcssCurve> {
    let solutions = solutions_over_range(points, k_min, k_max, seed)?;
    let curve: Vec<KWcss> = solutions
        .iter()
        .map(|s| KWcss {
            k: s.k,
            wcss: s.wcss,
        })
        .collect();
    Ok(WcssCurve {
        elbow_k: elbow_of(&curve),
        points: curve,
    })
}

/// Best solution per k over `k_min..=k_max`, each warm-started from the
/// previous k's winner (see [`wcss_curve`]).
pub fn solutions_over_range(
    points: &[Vec<f64>],
    k_min: usize,
    k_max: usize,
    seed: u64,
) -> Result<Vec<ClusterSolution>> {
    if k_min == 0 || k_min > k_max {
        return Err(Error::Domain(format!(
            "invalid k range {k_min}..={k_max}"
        )));
    }
    let mut out: Vec<ClusterSolution> = Vec::with_capacity(k_max - k_min + 1);
    for k in k_min..=k_max {
        let extra: Vec<Vec<Vec<f64>>> = out
            .last()
            .map(|prev| vec![split_init(points, prev)])
            .unwrap_or_default();
        out.push(kmeans_with_inits(points, k, sub_seed(seed, k as u64), &extra)?);
    }
    Ok(out)
}

/// Elbow: k with the largest discrete second difference of the curve.
fn elbow_of(curve: &[KWcss]) -> Option<usize> {
    if curve.len() < 3 {
        return None;
    }
    let mut best_k = None;
    let mut best_v = f64::NEG_INFINITY;
    for w in curve.windows(3) {
        let second_diff = w[0].wcss - 2.0 * w[1].wcss + w[2].wcss;
        if second_diff > best_v {
            best_v = second_diff;
            best_k = Some(w[1].k);
        }
    }
    best_k
}
