//! CART-style tree induction on binary features with Gini impurity.
//!
//! Splits are exhaustive over the candidate features at each node: for a
//! binary feature the only split sends `x = 0` left and `x = 1` right. The
//! winning feature maximizes the weighted impurity decrease; ties break to
//! the lowest feature index so induction is fully deterministic given the
//! candidate order.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PlacementLabel, CLASS_COUNT};

/// Gini impurity of a class count vector: `1 - sum_k (n_k / n)^2`.
pub fn gini(counts: &[usize]) -> Result<f64> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::Domain(
            "gini impurity of an empty count vector is undefined".into(),
        ));
    }
    let nf = n as f64;
    let sum_sq: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / nf;
            p * p
        })
        .sum();
    Ok(1.0 - sum_sq)
}

/// Node of a fitted decision tree.
///
/// `samples_fraction` and `impurity_decrease` on split nodes are the
/// quantities entering the mean-decrease-in-impurity importance:
/// the fraction of the tree's training sample reaching the node, and the
/// local Gini decrease achieved by the split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node")]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        class_counts: [usize; CLASS_COUNT],
        prediction: PlacementLabel,
    },
    Split {
        feature: usize,
        samples_fraction: f64,
        impurity_decrease: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    /// Label for one response row: `x[feature] = 0` goes left, `1` right.
    #[must_use]
    pub fn predict(&self, responses: &[u8]) -> PlacementLabel {
        match self {
            TreeNode::Leaf { prediction, .. } => *prediction,
            TreeNode::Split {
                feature,
                left,
                right,
                ..
            } => {
                if responses[*feature] == 0 {
                    left.predict(responses)
                } else {
                    right.predict(responses)
                }
            }
        }
    }

    /// Accumulate `samples_fraction * impurity_decrease` per split feature.
    pub fn accumulate_importance(&self, acc: &mut [f64]) {
        if let TreeNode::Split {
            feature,
            samples_fraction,
            impurity_decrease,
            left,
            right,
        } = self
        {
            acc[*feature] += samples_fraction * impurity_decrease;
            left.accumulate_importance(acc);
            right.accumulate_importance(acc);
        }
    }

    /// Depth of the tree (a lone leaf has depth 0).
    #[must_use]
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// Winning split of a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    /// Weighted impurity decrease
    /// `I(parent) - (n_L I_L + n_R I_R) / n`.
    pub gain: f64,
}

/// Class counts of `labels[rows]`.
fn count_classes(labels: &[u8], rows: &[usize]) -> [usize; CLASS_COUNT] {
    let mut counts = [0usize; CLASS_COUNT];
    for &i in rows {
        counts[labels[i] as usize] += 1;
    }
    counts
}

/// Exhaustive best split over the candidate features.
///
/// Returns `None` when no candidate yields strictly positive gain. Ties break
/// to the lowest feature index (candidates are scanned in ascending order and
/// replacement requires a strictly larger gain).
pub fn best_split(
    data: &[Vec<u8>],
    labels: &[u8],
    rows: &[usize],
    candidates: &[usize],
) -> Option<SplitChoice> {
    let n = rows.len();
    if n < 2 {
        return None;
    }
    let parent_counts = count_classes(labels, rows);
    let parent_gini = gini(&parent_counts).expect("rows is non-empty");
    let nf = n as f64;

    let mut sorted_candidates: Vec<usize> = candidates.to_vec();
    sorted_candidates.sort_unstable();

    let mut best: Option<SplitChoice> = None;
    for &feature in &sorted_candidates {
        let mut left = [0usize; CLASS_COUNT];
        let mut right = [0usize; CLASS_COUNT];
        for &i in rows {
            if data[i][feature] == 0 {
                left[labels[i] as usize] += 1;
            } else {
                right[labels[i] as usize] += 1;
            }
        }
        let n_left: usize = left.iter().sum();
        let n_right: usize = right.iter().sum();
        if n_left == 0 || n_right == 0 {
            continue;
        }
        let child_gini = (n_left as f64 * gini(&left).expect("non-empty")
            + n_right as f64 * gini(&right).expect("non-empty"))
            / nf;
        let gain = parent_gini - child_gini;
        if gain > 0.0 && best.map_or(true, |b| gain > b.gain) {
            best = Some(SplitChoice { feature, gain });
        }
    }
    best
}

/// Leaf prediction: majority class; ties go to the class with the larger
/// training prior, then to the lower ordinal.
#[must_use]
pub fn majority_label(counts: &[usize; CLASS_COUNT], priors: &[usize; CLASS_COUNT]) -> PlacementLabel {
    let mut best = 0usize;
    for k in 1..CLASS_COUNT {
        let better = (counts[k], priors[k]) > (counts[best], priors[best]);
        if better {
            best = k;
        }
    }
    PlacementLabel::from_rank(best).expect("rank < CLASS_COUNT")
}

/// Stopping and sampling parameters for a single tree.
pub(crate) struct TreeContext<'a> {
    pub data: &'a [Vec<u8>],
    pub labels: &'a [u8],
    pub priors: &'a [usize; CLASS_COUNT],
    pub n_features: usize,
    pub mtry: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Size of the tree's training sample (denominator of
    /// `samples_fraction`).
    pub n_train: usize,
}

/// Sample `mtry` distinct feature indices (partial Fisher-Yates).
fn sample_candidates(rng: &mut ChaCha8Rng, n_features: usize, mtry: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n_features).collect();
    for i in 0..mtry.min(n_features) {
        let j = rng.random_range(i..n_features);
        pool.swap(i, j);
    }
    pool.truncate(mtry.min(n_features));
    pool
}

/// Recursive tree growth. Candidate features are drawn before recursion and
/// children are built left before right, so the RNG consumption order — and
/// therefore the tree — is a pure function of the RNG seed.
pub(crate) fn grow_tree(ctx: &TreeContext<'_>, rows: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> TreeNode {
    let counts = count_classes(ctx.labels, rows);
    let n_classes_present = counts.iter().filter(|&&c| c > 0).count();
    let stop = depth >= ctx.max_depth
        || rows.len() < ctx.min_samples_split
        || n_classes_present <= 1;
    if stop {
        return TreeNode::Leaf {
            class_counts: counts,
            prediction: majority_label(&counts, ctx.priors),
        };
    }

    let candidates = sample_candidates(rng, ctx.n_features, ctx.mtry);
    let Some(choice) = best_split(ctx.data, ctx.labels, rows, &candidates) else {
        return TreeNode::Leaf {
            class_counts: counts,
            prediction: majority_label(&counts, ctx.priors),
        };
    };

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&i| ctx.data[i][choice.feature] == 0);

    TreeNode::Split {
        feature: choice.feature,
        samples_fraction: rows.len() as f64 / ctx.n_train as f64,
        impurity_decrease: choice.gain,
        left: Box::new(grow_tree(ctx, &left_rows, depth + 1, rng)),
        right: Box::new(grow_tree(ctx, &right_rows, depth + 1, rng)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gini_known_values() {
        assert_relative_eq!(gini(&[5, 0, 0]).unwrap(), 0.0);
        assert_relative_eq!(gini(&[5, 5]).unwrap(), 0.5);
        assert_relative_eq!(gini(&[1, 1, 1]).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
        // Cohort-scale example: 118/59/21.
        let g = gini(&[118, 59, 21]).unwrap();
        assert!((g - 0.5448).abs() < 1e-4, "gini(118,59,21) = {g}");
        assert!(gini(&[0, 0, 0]).is_err(), "empty node must be a domain error");
    }

    #[test]
    fn gini_is_maximal_for_uniform_counts() {
        for k in 2..=3 {
            let uniform = vec![10usize; k];
            let g_uniform = gini(&uniform).unwrap();
            let mut skewed = vec![10usize; k];
            skewed[0] = 25;
            assert!(g_uniform > gini(&skewed).unwrap());
        }
    }

    #[test]
    fn best_split_picks_perfect_separator() {
        // Feature 1 separates classes exactly; feature 0 is noise.
        let data = vec![
            vec![0, 0],
            vec![1, 0],
            vec![0, 0],
            vec![1, 1],
            vec![0, 1],
            vec![1, 1],
        ];
        let labels = vec![0u8, 0, 0, 2, 2, 2];
        let rows: Vec<usize> = (0..6).collect();
        let choice = best_split(&data, &labels, &rows, &[0, 1]).unwrap();
        assert_eq!(choice.feature, 1);
        assert_relative_eq!(choice.gain, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn best_split_absent_without_positive_gain() {
        // Constant feature and a feature independent of the label.
        let data = vec![vec![1, 0], vec![1, 1], vec![1, 0], vec![1, 1]];
        let labels = vec![0u8, 0, 1, 1];
        let rows: Vec<usize> = (0..4).collect();
        assert_eq!(best_split(&data, &labels, &rows, &[0, 1]), None);
    }

    #[test]
    fn best_split_tie_breaks_to_lowest_feature_index() {
        // Duplicate perfectly-separating features: index 0 must win even when
        // offered in descending order.
        let data = vec![vec![0, 0], vec![0, 0], vec![1, 1], vec![1, 1]];
        let labels = vec![0u8, 0, 1, 1];
        let rows: Vec<usize> = (0..4).collect();
        let choice = best_split(&data, &labels, &rows, &[1, 0]).unwrap();
        assert_eq!(choice.feature, 0);
    }

    #[test]
    fn majority_label_tie_breaks() {
        // Count tie between ranks 0 and 1, prior favors rank 1.
        let l = majority_label(&[3, 3, 0], &[10, 20, 5]);
        assert_eq!(l.rank(), 1);
        // Count and prior tie: lower ordinal wins.
        let l = majority_label(&[3, 3, 0], &[10, 10, 5]);
        assert_eq!(l.rank(), 0);
    }
}
