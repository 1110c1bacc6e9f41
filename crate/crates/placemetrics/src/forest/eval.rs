//! Model evaluation: confusion-matrix metrics, stratified k-fold
//! cross-validation, and the deterministic placement-rule baseline.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{rf_fit, ForestParams};
use crate::error::{Error, Result};
use crate::model::{placement, total_score, PlacementLabel, ResponseMatrix, CLASS_COUNT};
use crate::seeding::sub_seed;

/// Confusion-matrix derived metrics. Precision, recall, and F1 are
/// support-weighted one-vs-rest aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub precision_weighted: f64,
    pub recall_weighted: f64,
    pub f1_weighted: f64,
    /// `confusion[t][p]` counts rows with true class `t` predicted as `p`.
    pub confusion: [[usize; CLASS_COUNT]; CLASS_COUNT],
    /// Classes that were never predicted although their precision was
    /// needed; their precision is reported as 0.
    pub zero_prediction_classes: Vec<PlacementLabel>,
}

/// Compare predictions against ground truth.
pub fn evaluate(predictions: &[PlacementLabel], truth: &[PlacementLabel]) -> Result<EvalMetrics> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            got: predictions.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InsufficientData("evaluate requires at least one row".into()));
    }

    let mut confusion = [[0usize; CLASS_COUNT]; CLASS_COUNT];
    for (p, t) in predictions.iter().zip(truth) {
        confusion[t.rank()][p.rank()] += 1;
    }
    let n = truth.len() as f64;
    let diag: usize = (0..CLASS_COUNT).map(|k| confusion[k][k]).sum();
    let accuracy = diag as f64 / n;

    let mut precision_weighted = 0.0;
    let mut recall_weighted = 0.0;
    let mut f1_weighted = 0.0;
    let mut zero_prediction_classes = Vec::new();
    for k in 0..CLASS_COUNT {
        let support: usize = confusion[k].iter().sum();
        if support == 0 {
            continue;
        }
        let weight = support as f64 / n;
        let tp = confusion[k][k] as f64;
        let predicted: usize = (0..CLASS_COUNT).map(|t| confusion[t][k]).sum();
        let precision = if predicted == 0 {
            zero_prediction_classes.push(PlacementLabel::from_rank(k).expect("class rank"));
            0.0
        } else {
            tp / predicted as f64
        };
        let recall = tp / support as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        precision_weighted += weight * precision;
        recall_weighted += weight * recall;
        f1_weighted += weight * f1;
    }

    Ok(EvalMetrics {
        accuracy,
        precision_weighted,
        recall_weighted,
        f1_weighted,
        confusion,
        zero_prediction_classes,
    })
}

/// Placement-rule baseline: classify a row by its own percent score.
#[must_use]
pub fn rule_baseline(responses: &[u8]) -> PlacementLabel {
    let percent = total_score(responses).percent;
    placement(percent).expect("percent of a binary row is always within [0, 100]")
}

/// Stratified k-fold assignment.
///
/// Within each class the members are shuffled with a class-specific seeded
/// RNG and dealt round-robin. The dealing start rotates across classes by
/// each class's remainder, which keeps overall fold sizes within one of each
/// other while preserving per-class balance within one.
///
/// Returns `k` sorted index lists that partition `0..n`.
pub fn stratified_kfold(matrix: &ResponseMatrix, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Stratification(format!("k must be at least 2, got {k}")));
    }
    let labels = matrix
        .labels()
        .map_err(|_| Error::MissingLabels("stratified_kfold requires labels".into()))?;

    let mut per_class: [Vec<usize>; CLASS_COUNT] = Default::default();
    for (i, l) in labels.iter().enumerate() {
        per_class[l.rank()].push(i);
    }
    for (rank, members) in per_class.iter().enumerate() {
        if !members.is_empty() && members.len() < k {
            return Err(Error::Stratification(format!(
                "class {} has {} members, fewer than k = {k}",
                PlacementLabel::from_rank(rank).expect("rank"),
                members.len()
            )));
        }
    }

    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut start = 0usize;
    for (rank, members) in per_class.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(sub_seed(seed, rank as u64)));
        for (i, &row) in shuffled.iter().enumerate() {
            folds[(start + i) % k].push(row);
        }
        start = (start + shuffled.len()) % k;
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// What to train inside each cross-validation fold.
#[derive(Debug, Clone, PartialEq)]
pub enum CvLearner {
    Forest(ForestParams),
    /// The deterministic placement-rule baseline (no training).
    RuleBaseline,
}

/// Cross-validation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: usize,
    pub per_fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    /// Sample standard deviation over folds.
    pub sd_accuracy: f64,
    /// Normal-approximation 95% interval: `mean +/- 1.96 sd`.
    pub ci95: (f64, f64),
    /// Metrics over the pooled out-of-fold predictions.
    pub pooled: EvalMetrics,
}

/// Stratified k-fold cross-validation.
///
/// Fold assignment uses `sub_seed(seed, 0)`; the fold-i model trains with
/// `sub_seed(seed, 1 + i)`. Every row is predicted exactly once, by the model
/// that never saw it.
pub fn cross_validate(
    matrix: &ResponseMatrix,
    learner: &CvLearner,
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    let folds = stratified_kfold(matrix, k, sub_seed(seed, 0))?;
    let truth = matrix.labels()?;

    let mut per_fold_accuracy = Vec::with_capacity(k);
    let mut pooled_pred: Vec<Option<PlacementLabel>> = vec![None; matrix.n()];
    for (i, fold) in folds.iter().enumerate() {
        let predictions: Vec<PlacementLabel> = match learner {
            CvLearner::RuleBaseline => fold
                .iter()
                .map(|&row| rule_baseline(&matrix.students()[row].responses))
                .collect(),
            CvLearner::Forest(params) => {
                let train_rows: Vec<usize> =
                    (0..matrix.n()).filter(|r| !fold.contains(r)).collect();
                let train = matrix.select(&train_rows)?;
                let model = rf_fit(&train, params, sub_seed(seed, 1 + i as u64), 1)?;
                fold.iter()
                    .map(|&row| {
                        model
                            .predict(&matrix.students()[row].responses)
                            .map(|p| p.label)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let correct = fold
            .iter()
            .zip(&predictions)
            .filter(|(&row, &p)| truth[row] == p)
            .count();
        per_fold_accuracy.push(correct as f64 / fold.len() as f64);
        for (&row, &p) in fold.iter().zip(&predictions) {
            pooled_pred[row] = Some(p);
        }
    }

    let kf = k as f64;
    let mean_accuracy = per_fold_accuracy.iter().sum::<f64>() / kf;
    let sd_accuracy = if k > 1 {
        (per_fold_accuracy
            .iter()
            .map(|a| (a - mean_accuracy) * (a - mean_accuracy))
            .sum::<f64>()
            / (kf - 1.0))
            .sqrt()
    } else {
        0.0
    };
    let pooled_predictions: Vec<PlacementLabel> = pooled_pred
        .into_iter()
        .map(|p| p.expect("folds partition the rows"))
        .collect();
    let pooled = evaluate(&pooled_predictions, &truth)?;

    Ok(CvReport {
        folds: k,
        per_fold_accuracy,
        mean_accuracy,
        sd_accuracy,
        ci95: (
            mean_accuracy - 1.96 * sd_accuracy,
            mean_accuracy + 1.96 * sd_accuracy,
        ),
        pooled,
    })
}
