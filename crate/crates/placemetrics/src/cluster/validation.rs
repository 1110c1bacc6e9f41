//! Cluster validation: silhouette widths, the gap statistic, the adjusted
//! Rand index, and bootstrap stability of a clustering.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::quantile_sorted;
use crate::seeding::{sub_seed, sub_seed2};

use super::kmeans::{dist, kmeans, sq_dist, ClusterSolution};

/// Per-point silhouette widths and their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteReport {
    pub per_point: Vec<f64>,
    pub mean: f64,
}

/// Mean silhouette width of a hard partition.
///
/// Uses Euclidean distances; a singleton cluster's point scores 0, as does a
/// point whose within- and between-cluster mean distances are both zero.
pub fn silhouette(points: &[Vec<f64>], assignments: &[usize]) -> Result<SilhouetteReport> {
    let n = points.len();
    if n != assignments.len() {
        return Err(Error::LengthMismatch {
            expected: n,
            got: assignments.len(),
        });
    }
    if n < 2 {
        return Err(Error::InsufficientData(
            "silhouette requires at least two points".into(),
        ));
    }
    let k = assignments.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    if k < 2 || sizes.iter().any(|&s| s == 0) {
        return Err(Error::Domain(
            "silhouette requires at least two non-empty clusters".into(),
        ));
    }

    let mut per_point = Vec::with_capacity(n);
    for i in 0..n {
        let own = assignments[i];
        if sizes[own] == 1 {
            per_point.push(0.0);
            continue;
        }
        // Mean distance from point i to every cluster.
        let mut sums = vec![0.0f64; k];
        for j in 0..n {
            if i != j {
                sums[assignments[j]] += dist(&points[i], &points[j]);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        per_point.push(if denom == 0.0 { 0.0 } else { (b - a) / denom });
    }
    let mean = per_point.iter().sum::<f64>() / n as f64;
    Ok(SilhouetteReport { per_point, mean })
}

/// Gap statistic for one value of k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub k: usize,
    /// `mean_b ln(W_b) - ln(W)`.
    pub gap: f64,
    /// Reference standard error `sd_b(ln W_b) * sqrt(1 + 1/B)`.
    pub se: f64,
    pub log_wcss_data: f64,
    pub mean_log_wcss_ref: f64,
    pub reference_count: usize,
}

/// Tibshirani gap statistic: compares the data's log-WCSS at k against
/// `b_refs` uniform samples drawn from the data's bounding box.
pub fn gap_statistic(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    b_refs: usize,
) -> Result<GapReport> {
    if b_refs == 0 {
        return Err(Error::Domain("gap statistic needs at least one reference".into()));
    }
    let data_sol = kmeans(points, k, sub_seed(seed, 0))?;
    if data_sol.wcss <= 0.0 {
        return Err(Error::Infeasible(
            "gap statistic undefined at zero within-cluster dispersion".into(),
        ));
    }
    let log_w = data_sol.wcss.ln();

    let dim = points[0].len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in points {
        for d in 0..dim {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }

    let mut log_refs = Vec::with_capacity(b_refs);
    for b in 0..b_refs {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed2(seed, 1, b as u64));
        let sample: Vec<Vec<f64>> = (0..points.len())
            .map(|_| {
                (0..dim)
                    .map(|d| {
                        if hi[d] > lo[d] {
                            rng.random_range(lo[d]..hi[d])
                        } else {
                            lo[d]
                        }
                    })
                    .collect()
            })
            .collect();
        let sol = kmeans(&sample, k, sub_seed2(seed, 2, b as u64))?;
        if sol.wcss <= 0.0 {
            return Err(Error::Infeasible(
                "reference sample collapsed to zero dispersion".into(),
            ));
        }
        log_refs.push(sol.wcss.ln());
    }

    let mean_ref = log_refs.iter().sum::<f64>() / b_refs as f64;
    let var_pop = log_refs
        .iter()
        .map(|v| (v - mean_ref) * (v - mean_ref))
        .sum::<f64>()
        / b_refs as f64;
    let se = var_pop.sqrt() * (1.0 + 1.0 / b_refs as f64).sqrt();

    Ok(GapReport {
        k,
        gap: mean_ref - log_w,
        se,
        log_wcss_data: log_w,
        mean_log_wcss_ref: mean_ref,
        reference_count: b_refs,
    })
}

/// Adjusted Rand index between two hard partitions of the same items.
///
/// Returns 1.0 when the expected-index correction degenerates (for example
/// both partitions put everything in one cluster).
pub fn adjusted_rand(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a.len();
    if n == 0 {
        return Err(Error::InsufficientData("ARI of empty partitions".into()));
    }
    let comb2 = |x: usize| -> f64 { (x as f64) * (x as f64 - 1.0) / 2.0 };

    let mut cells: HashMap<(usize, usize), usize> = HashMap::new();
    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut cols: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_insert(0) += 1;
        *rows.entry(x).or_insert(0) += 1;
        *cols.entry(y).or_insert(0) += 1;
    }
    let sum_cells: f64 = cells.values().map(|&c| comb2(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| comb2(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| comb2(c)).sum();
    let total = comb2(n);
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((sum_cells - expected) / denom)
}

/// Bootstrap stability of k-means at a fixed k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub k: usize,
    pub iterations: usize,
    /// ARI between the reference assignment and each bootstrap-induced
    /// assignment of the original points.
    pub per_iteration: Vec<f64>,
    pub mean_ari: f64,
    /// Percentile interval (2.5%, 97.5%) of the per-iteration ARIs.
    pub ci95: (f64, f64),
}

/// Assign each point to its nearest centroid.
fn nearest_assignments(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            let mut best = 0usize;
            let mut best_d = sq_dist(p, &centroids[0]);
            for (c, centroid) in centroids.iter().enumerate().skip(1) {
                let d = sq_dist(p, centroid);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// Cluster bootstrap resamples and compare each induced partition of the
/// original points against the reference clustering via ARI.
///
/// A resample with fewer than k distinct points is redrawn (bounded retries);
/// iteration `i` uses seeds derived from `(seed, i)` so runs are reproducible
/// at any iteration count.
pub fn bootstrap_stability(
    points: &[Vec<f64>],
    k: usize,
    iterations: usize,
    seed: u64,
) -> Result<StabilityReport> {
    if iterations == 0 {
        return Err(Error::Domain("stability needs at least one iteration".into()));
    }
    let reference = kmeans(points, k, sub_seed(seed, 0))?;
    let n = points.len();

    let mut per_iteration = Vec::with_capacity(iterations);
    for i in 0..iterations {
        let mut sol: Option<ClusterSolution> = None;
        // Retry with fresh draws if a resample has too few distinct points.
        for attempt in 0..100u64 {
            let mut rng =
                ChaCha8Rng::seed_from_u64(sub_seed2(seed, 1 + i as u64, attempt));
            let sample: Vec<Vec<f64>> = (0..n)
                .map(|_| points[rng.random_range(0..n)].clone())
                .collect();
            match kmeans(&sample, k, sub_seed2(seed, 2 + i as u64, attempt)) {
                Ok(s) => {
                    sol = Some(s);
                    break;
                }
                Err(Error::Infeasible(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        let sol = sol.ok_or_else(|| {
            Error::Infeasible(format!(
                "bootstrap iteration {i}: resamples keep collapsing below k = {k} distinct points"
            ))
        })?;
        let induced = nearest_assignments(points, &sol.centroids);
        per_iteration.push(adjusted_rand(&reference.assignments, &induced)?);
    }

    let mean_ari = per_iteration.iter().sum::<f64>() / iterations as f64;
    let mut sorted = per_iteration.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite ARI"));
    let ci95 = (quantile_sorted(&sorted, 0.025), quantile_sorted(&sorted, 0.975));

    Ok(StabilityReport {
        k,
        iterations,
        per_iteration,
        mean_ari,
        ci95,
    })
}
