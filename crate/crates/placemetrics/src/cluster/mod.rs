//! Competency clustering: augmented feature construction, seeded k-means,
//! model-selection diagnostics, and score-band profiles of the clusters.

pub mod kmeans;
pub mod validation;

pub use kmeans::{
    dist, kmeans as cluster_kmeans, kmeans_with_inits, solutions_over_range, sq_dist, wcss_curve,
    ClusterSolution, KWcss, WcssCurve, KMEANS_MAX_ITER, KMEANS_RESTARTS, KMEANS_TOL,
};
pub use validation::{
    adjusted_rand, bootstrap_stability, gap_statistic, silhouette, GapReport, SilhouetteReport,
    StabilityReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PlacementLabel, ResponseMatrix, CLASS_COUNT};
use crate::seeding::{sub_seed, sub_seed2};

/// Default number of reference samples for the gap statistic.
pub const GAP_REFERENCES: usize = 10;

/// Clustering features per student: overall percent score rescaled to
/// `[0, 1]` followed by the raw item responses.
#[must_use]
pub fn build_features(matrix: &ResponseMatrix) -> Vec<Vec<f64>> {
    matrix
        .students()
        .iter()
        .map(|s| {
            let mut row = Vec::with_capacity(1 + matrix.item_count());
            row.push(crate::model::total_score(&s.responses).percent / 100.0);
            row.extend(s.responses.iter().map(|&r| f64::from(r)));
            row
        })
        .collect()
}

/// Score-band summary of one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub cluster: usize,
    pub n: usize,
    pub mean_percent: f64,
    pub sd_percent: f64,
    pub min_percent: f64,
    pub max_percent: f64,
    /// Placement-label histogram; `None` for unlabelled cohorts.
    pub label_counts: Option<[usize; CLASS_COUNT]>,
    pub majority_label: Option<PlacementLabel>,
    /// Share of the majority label; `None` for unlabelled cohorts.
    pub purity: Option<f64>,
}

/// Cluster profiles plus the empirical boundary implied by the lowest band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    /// One profile per cluster id.
    pub clusters: Vec<ClusterProfile>,
    /// Highest percent score inside the cluster with the lowest mean percent:
    /// where the data itself draws the line under the weakest band.
    pub natural_boundary: f64,
}

/// Profile a clustering against the cohort's percent scores and labels.
pub fn cluster_profile(
    matrix: &ResponseMatrix,
    solution: &ClusterSolution,
) -> Result<ProfileReport> {
    if solution.assignments.len() != matrix.n() {
        return Err(Error::LengthMismatch {
            expected: matrix.n(),
            got: solution.assignments.len(),
        });
    }
    let percents = matrix.percents();
    let labelled = matrix.is_labelled();
    let k = solution.k;

    let mut clusters = Vec::with_capacity(k);
    for c in 0..k {
        let members: Vec<usize> = (0..matrix.n())
            .filter(|&i| solution.assignments[i] == c)
            .collect();
        if members.is_empty() {
            return Err(Error::Domain(format!("cluster {c} is empty")));
        }
        let pct: Vec<f64> = members.iter().map(|&i| percents[i]).collect();
        let n = pct.len();
        let mean = pct.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            pct.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let (mut label_counts, mut majority_label, mut purity) = (None, None, None);
        if labelled {
            let labels = matrix.labels()?;
            let mut counts = [0usize; CLASS_COUNT];
            for &i in &members {
                counts[labels[i].rank()] += 1;
            }
            let best = (0..CLASS_COUNT).max_by_key(|&r| counts[r]).unwrap_or(0);
            label_counts = Some(counts);
            majority_label = Some(PlacementLabel::from_rank(best)?);
            purity = Some(counts[best] as f64 / n as f64);
        }
        clusters.push(ClusterProfile {
            cluster: c,
            n,
            mean_percent: mean,
            sd_percent: var.sqrt(),
            min_percent: pct.iter().copied().fold(f64::INFINITY, f64::min),
            max_percent: pct.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            label_counts,
            majority_label,
            purity,
        });
    }

    let lowest = clusters
        .iter()
        .min_by(|a, b| {
            a.mean_percent
                .partial_cmp(&b.mean_percent)
                .expect("finite means")
        })
        .expect("at least one cluster");
    let natural_boundary = lowest.max_percent;

    Ok(ProfileReport {
        clusters,
        natural_boundary,
    })
}

/// Model-selection diagnostics for one candidate k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KDiagnostics {
    pub k: usize,
    pub wcss: f64,
    pub silhouette_mean: Option<f64>,
    pub gap: f64,
    pub gap_se: f64,
}

/// Full clustering analysis of a cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetencyReport {
    pub k_min: usize,
    pub k_max: usize,
    pub per_k: Vec<KDiagnostics>,
    /// Elbow of the WCSS curve (largest discrete second difference).
    pub elbow_k: Option<usize>,
    /// k with the highest mean silhouette (ties to the smaller k).
    pub selected_k: usize,
    pub solution: ClusterSolution,
    pub profile: ProfileReport,
    pub stability: StabilityReport,
}

/// Cluster the cohort over a k range, select k by mean silhouette, and
/// profile plus stability-check the winning solution.
///
/// Seed layout: the k sweep derives from `(seed, 0)`, the gap statistic for
/// each k from `(seed, 1, k)`, and the bootstrap stability run from
/// `(seed, 2)`.
pub fn competency_analysis(
    matrix: &ResponseMatrix,
    k_min: usize,
    k_max: usize,
    gap_refs: usize,
    stability_iterations: usize,
    seed: u64,
) -> Result<CompetencyReport> {
    if k_min < 2 {
        return Err(Error::Domain(
            "competency analysis needs k_min >= 2 (silhouette selection)".into(),
        ));
    }
    let points = build_features(matrix);
    let solutions = solutions_over_range(&points, k_min, k_max, sub_seed(seed, 0))?;

    let mut per_k = Vec::with_capacity(solutions.len());
    for sol in &solutions {
        let gap = gap_statistic(&points, sol.k, sub_seed2(seed, 1, sol.k as u64), gap_refs)?;
        per_k.push(KDiagnostics {
            k: sol.k,
            wcss: sol.wcss,
            silhouette_mean: sol.silhouette_mean,
            gap: gap.gap,
            gap_se: gap.se,
        });
    }

    let curve: Vec<KWcss> = per_k
        .iter()
        .map(|d| KWcss { k: d.k, wcss: d.wcss })
        .collect();
    let elbow_k = wcss_curve_elbow(&curve);

    let solution = select_by_silhouette(&solutions)
        .expect("non-empty k range")
        .clone();
    let selected_k = solution.k;

    let profile = cluster_profile(matrix, &solution)?;
    let stability =
        bootstrap_stability(&points, selected_k, stability_iterations, sub_seed(seed, 2))?;

    Ok(CompetencyReport {
        k_min,
        k_max,
        per_k,
        elbow_k,
        selected_k,
        solution,
        profile,
        stability,
    })
}

/// The solution with the highest mean silhouette; exact ties go to the
/// earliest (smallest-k) entry.
#[must_use]
pub fn select_by_silhouette(solutions: &[ClusterSolution]) -> Option<&ClusterSolution> {
    let mut best: Option<&ClusterSolution> = None;
    for sol in solutions {
        let score = sol.silhouette_mean.unwrap_or(f64::NEG_INFINITY);
        let incumbent = best.and_then(|b| b.silhouette_mean).unwrap_or(f64::NEG_INFINITY);
        if best.is_none() || score > incumbent {
            best = Some(sol);
        }
    }
    best
}

/// Elbow of an externally assembled WCSS curve.
fn wcss_curve_elbow(curve: &[KWcss]) -> Option<usize> {
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
