//! Random forest classifier built from scratch on bootstrap-aggregated CART
//! trees, with two feature importance readouts: normalized mean decrease in
//! impurity (MDI) and permutation importance.
//!
//! # Determinism
//!
//! Fitting is bit-identical for a given `(matrix, params, seed)` at any
//! parallelism level: each tree trains from its own [`sub_seed`]-derived RNG,
//! trees are stored in index order, and the importance accumulation is a
//! sequential pass over that order. Worker count only changes the wall-clock
//! schedule, never a single float.

mod eval;
mod tree;

pub use eval::{
    cross_validate, evaluate, rule_baseline, stratified_kfold, CvLearner, CvReport, EvalMetrics,
};
pub use tree::{best_split, gini, majority_label, SplitChoice, TreeNode};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PlacementLabel, ResponseMatrix, CLASS_COUNT};
use crate::seeding::{sub_seed, sub_seed2};

/// Version tag written into persisted models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Forest hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    /// Number of trees.
    pub n_estimators: usize,
    /// Maximum tree depth (root at depth 0).
    pub max_depth: usize,
    /// Minimum node size eligible for splitting.
    pub min_samples_split: usize,
    /// Features sampled per node; `None` selects `ceil(sqrt(m))`.
    pub mtry: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 200,
            max_depth: 10,
            min_samples_split: 5,
            mtry: None,
        }
    }
}

impl ForestParams {
    /// Effective per-node feature sample size for `m` features.
    #[must_use]
    pub fn effective_mtry(&self, n_features: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
            .clamp(1, n_features)
    }
}

/// A fitted forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format_version: u32,
    pub params: ForestParams,
    pub seed: u64,
    pub n_features: usize,
    /// Class counts of the training set (vote and leaf tie-breaks).
    pub class_priors: [usize; CLASS_COUNT],
    pub trees: Vec<TreeNode>,
    /// Normalized mean decrease in impurity per feature (sums to 1 whenever
    /// any split exists).
    pub mdi: Vec<f64>,
}

/// Vote tally and final label for one row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: PlacementLabel,
    pub votes: [usize; CLASS_COUNT],
}

/// Per-feature permutation importance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationImportance {
    pub feature: usize,
    /// Mean accuracy drop over the repeats.
    pub mean_drop: f64,
    /// Sample standard deviation of the drop (0 for a single repeat).
    pub sd_drop: f64,
}

/// Fit a random forest on a labelled matrix.
///
/// `threads` is an execution knob only: any value produces the same model.
/// Values of 0 and 1 run sequentially; larger values use a local thread pool.
pub fn rf_fit(
    matrix: &ResponseMatrix,
    params: &ForestParams,
    seed: u64,
    threads: usize,
) -> Result<ForestModel> {
    let labels_vec = matrix
        .labels()
        .map_err(|_| Error::MissingLabels("rf_fit requires a labelled matrix".into()))?;
    if params.n_estimators == 0 {
        return Err(Error::Domain("n_estimators must be positive".into()));
    }
    if matrix.n() < params.min_samples_split {
        return Err(Error::InsufficientData(format!(
            "rf_fit needs at least min_samples_split = {} students, got {}",
            params.min_samples_split,
            matrix.n()
        )));
    }

    let n = matrix.n();
    let m = matrix.item_count();
    let data: Vec<Vec<u8>> = matrix
        .students()
        .iter()
        .map(|s| s.responses.clone())
        .collect();
    let labels: Vec<u8> = labels_vec.iter().map(|l| l.rank() as u8).collect();
    let priors = matrix.class_counts();
    let mtry = params.effective_mtry(m);

    let fit_one = |t: usize| -> TreeNode {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, t as u64));
        let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let ctx = tree::TreeContext {
            data: &data,
            labels: &labels,
            priors: &priors,
            n_features: m,
            mtry,
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
            n_train: bootstrap.len(),
        };
        tree::grow_tree(&ctx, &bootstrap, 0, &mut rng)
    };

    let trees: Vec<TreeNode> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            (0..params.n_estimators).into_par_iter().map(fit_one).collect()
        })
    } else {
        (0..params.n_estimators).map(fit_one).collect()
    };

    // Sequential accumulation in tree order keeps the sums bit-identical
    // regardless of how the trees were scheduled above.
    let mut mdi = vec![0.0f64; m];
    for t in &trees {
        t.accumulate_importance(&mut mdi);
    }
    for v in &mut mdi {
        *v /= trees.len() as f64;
    }
    let total: f64 = mdi.iter().sum();
    if total > 0.0 {
        for v in &mut mdi {
            *v /= total;
        }
    }

    Ok(ForestModel {
        format_version: MODEL_FORMAT_VERSION,
        params: params.clone(),
        seed,
        n_features: m,
        class_priors: priors,
        trees,
        mdi,
    })
}

impl ForestModel {
    /// Majority-vote prediction for one response row.
    ///
    /// Vote ties break to the class with the larger training prior, then to
    /// the lower ordinal — independent of tree order.
    pub fn predict(&self, responses: &[u8]) -> Result<Prediction> {
        if responses.len() != self.n_features {
            return Err(Error::LengthMismatch {
                expected: self.n_features,
                got: responses.len(),
            });
        }
        let mut votes = [0usize; CLASS_COUNT];
        for t in &self.trees {
            votes[t.predict(responses).rank()] += 1;
        }
        Ok(Prediction {
            label: majority_label(&votes, &self.class_priors),
            votes,
        })
    }

    /// Predictions for every row of a matrix.
    pub fn predict_matrix(&self, matrix: &ResponseMatrix) -> Result<Vec<PlacementLabel>> {
        matrix
            .students()
            .iter()
            .map(|s| self.predict(&s.responses).map(|p| p.label))
            .collect()
    }

    /// Accuracy against the matrix's own labels.
    pub fn accuracy(&self, matrix: &ResponseMatrix) -> Result<f64> {
        let truth = matrix.labels()?;
        let preds = self.predict_matrix(matrix)?;
        let correct = preds.iter().zip(&truth).filter(|(p, t)| p == t).count();
        Ok(correct as f64 / truth.len() as f64)
    }

    /// Normalized mean decrease in impurity per feature.
    #[must_use]
    pub fn mdi_importance(&self) -> &[f64] {
        &self.mdi
    }

    /// Serialize to the versioned JSON model format (key-sorted, stable).
    pub fn to_json(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        Ok(format!("{:#}", value))
    }

    /// Decode a model previously written by [`ForestModel::to_json`].
    pub fn from_json(text: &str) -> Result<ForestModel> {
        let model: ForestModel = serde_json::from_str(text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                model.format_version
            )));
        }
        if model.mdi.len() != model.n_features {
            return Err(Error::Format(
                "model importance vector does not match feature count".into(),
            ));
        }
        Ok(model)
    }
}

/// Permutation importance of every feature.
///
/// For each feature, `repeats` independent permutations of that column are
/// evaluated on `matrix` and the drop from baseline accuracy is averaged.
/// Permutation RNGs derive from `(seed, feature, repeat)`, so results do not
/// depend on evaluation order. A constant column yields a drop of exactly 0.
pub fn permutation_importance(
    model: &ForestModel,
    matrix: &ResponseMatrix,
    seed: u64,
    repeats: usize,
) -> Result<Vec<PermutationImportance>> {
    if repeats == 0 {
        return Err(Error::Domain("permutation repeats must be positive".into()));
    }
    let truth = matrix
        .labels()
        .map_err(|_| Error::MissingLabels("permutation importance requires labels".into()))?;
    if matrix.item_count() != model.n_features {
        return Err(Error::LengthMismatch {
            expected: model.n_features,
            got: matrix.item_count(),
        });
    }

    let baseline = model.accuracy(matrix)?;
    let n = matrix.n();
    let rows: Vec<Vec<u8>> = matrix
        .students()
        .iter()
        .map(|s| s.responses.clone())
        .collect();

    let mut out = Vec::with_capacity(model.n_features);
    for feature in 0..model.n_features {
        let column: Vec<u8> = rows.iter().map(|r| r[feature]).collect();
        let mut drops = Vec::with_capacity(repeats);
        for repeat in 0..repeats {
            let mut rng =
                ChaCha8Rng::seed_from_u64(sub_seed2(seed, feature as u64, repeat as u64));
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let mut correct = 0usize;
            let mut scratch = vec![0u8; model.n_features];
            for (i, row) in rows.iter().enumerate() {
                scratch.copy_from_slice(row);
                scratch[feature] = column[perm[i]];
                if model.predict(&scratch)?.label == truth[i] {
                    correct += 1;
                }
            }
            drops.push(baseline - correct as f64 / n as f64);
        }
        let mean = drops.iter().sum::<f64>() / repeats as f64;
        let sd = if repeats > 1 {
            (drops.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (repeats as f64 - 1.0))
                .sqrt()
        } else {
            0.0
        };
        out.push(PermutationImportance {
            feature,
            mean_drop: mean,
            sd_drop: sd,
        });
    }
    Ok(out)
}
