//! Run configuration, the full analysis report, and plot-data emission.
//!
//! All JSON artifacts are built as `serde_json::Value` trees (key-sorted maps)
//! and printed with a trailing newline, so identical inputs and configuration
//! produce byte-identical files. Non-finite numbers are encoded as the strings
//! `"inf"`, `"-inf"`, and `"nan"`.

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::cluster::{self, CompetencyReport, GAP_REFERENCES};
use crate::ctt::{self, ItemCtt};
use crate::error::{Error, Result};
use crate::featstats::{self, AnovaResult, ItemMetrics, MethodAgreement, AGREEMENT_METRICS, NATS_TO_BITS};
use crate::forest::{
    cross_validate, permutation_importance, rf_fit, CvLearner, CvReport, EvalMetrics, ForestModel,
    ForestParams, PermutationImportance,
};
use crate::model::{describe, PlacementLabel, ResponseMatrix, ScoreSummary};
use crate::seeding::sub_seed;

/// Seed sub-stream for the full-data forest fit.
pub const STREAM_FOREST: u64 = 1;
/// Seed sub-stream for cross-validation (folds and per-fold models).
pub const STREAM_CV: u64 = 2;
/// Seed sub-stream for permutation importance.
pub const STREAM_PERMUTATION: u64 = 3;
/// Seed sub-stream for clustering, gap references, and bootstrap stability.
pub const STREAM_CLUSTER: u64 = 4;
/// Seed sub-stream for cohort simulation.
pub const STREAM_SIMULATE: u64 = 5;

/// Permutation repeats used by `importance` and `report`.
pub const DEFAULT_PERMUTATION_REPEATS: usize = 10;

/// Resolved configuration for one CLI run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub folds: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub bootstrap_iters: usize,
    pub trees: usize,
    pub max_depth: usize,
    pub min_split: usize,
    pub mtry: Option<usize>,
    pub threads: usize,
    pub emit_plots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            output_dir: PathBuf::from("placemetrics-out"),
            seed: 42,
            folds: 5,
            k_min: 2,
            k_max: 6,
            bootstrap_iters: 100,
            trees: 200,
            max_depth: 10,
            min_split: 5,
            mtry: None,
            threads: 1,
            emit_plots: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Domain("--folds must be at least 2".into()));
        }
        if self.k_min < 2 || self.k_min > self.k_max {
            return Err(Error::Domain(format!(
                "invalid cluster range --k-min {} --k-max {}",
                self.k_min, self.k_max
            )));
        }
        if self.bootstrap_iters == 0 {
            return Err(Error::Domain("--bootstrap-iters must be at least 1".into()));
        }
        if self.trees == 0 {
            return Err(Error::Domain("--trees must be at least 1".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::Domain("--max-depth must be at least 1".into()));
        }
        if self.min_split < 2 {
            return Err(Error::Domain("--min-split must be at least 2".into()));
        }
        if self.mtry == Some(0) {
            return Err(Error::Domain("--mtry must be at least 1".into()));
        }
        Ok(())
    }

    /// Forest hyperparameters from the config.
    #[must_use]
    pub fn forest_params(&self) -> ForestParams {
        ForestParams {
            n_estimators: self.trees,
            max_depth: self.max_depth,
            min_samples_split: self.min_split,
            mtry: self.mtry,
        }
    }
}

/// JSON encoding of a float: plain number when finite, else a string.
#[must_use]
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v.is_sign_positive() {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn opt_num(v: Option<f64>) -> Value {
    v.map_or(Value::Null, num)
}

/// SHA-256 digest of a byte buffer, hex-encoded.
#[must_use]
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Pretty-printed JSON document with a trailing newline.
#[must_use]
pub fn json_to_string(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("Value serialization is infallible");
    text.push('\n');
    text
}

/// Write a JSON artifact.
pub fn write_json_file(path: &Path, value: &Value) -> Result<()> {
    std::fs::write(path, json_to_string(value))?;
    Ok(())
}

fn summary_value(s: &ScoreSummary) -> Value {
    json!({
        "n": s.n,
        "mean": num(s.mean),
        "median": num(s.median),
        "sd": num(s.sd),
        "variance": num(s.variance),
        "min": num(s.min),
        "max": num(s.max),
        "range": num(s.range),
        "q1": num(s.q1),
        "q3": num(s.q3),
        "iqr": num(s.iqr),
        "skewness": opt_num(s.skewness),
        "excess_kurtosis": opt_num(s.excess_kurtosis),
    })
}

/// Descriptive section: cohort shape plus percent- and raw-score summaries.
pub fn describe_section(matrix: &ResponseMatrix) -> Result<Value> {
    let percents = describe(&matrix.percents())?;
    let raw: Vec<f64> = matrix.totals().iter().map(|&t| f64::from(t)).collect();
    let raw = describe(&raw)?;
    let mut section = Map::new();
    section.insert("n".into(), json!(matrix.n()));
    section.insert("item_count".into(), json!(matrix.item_count()));
    section.insert("labelled".into(), json!(matrix.is_labelled()));
    if matrix.is_labelled() {
        let counts = matrix.class_counts();
        let mut by_label = Map::new();
        for label in PlacementLabel::ALL {
            by_label.insert(label.as_str().into(), json!(counts[label.rank()]));
        }
        section.insert("class_counts".into(), Value::Object(by_label));
    }
    section.insert("percent_score".into(), summary_value(&percents));
    section.insert("raw_score".into(), summary_value(&raw));
    Ok(Value::Object(section))
}

/// Item analysis section: one row per item plus the quality distribution.
pub fn ctt_section(items: &[ItemCtt]) -> Value {
    let rows: Vec<Value> = items
        .iter()
        .map(|it| {
            json!({
                "item": it.item + 1,
                "difficulty": num(it.difficulty),
                "discrimination": num(it.discrimination),
                "upper_prop": num(it.upper_prop),
                "lower_prop": num(it.lower_prop),
                "point_biserial": opt_num(it.point_biserial),
                "quality": it.quality.as_str(),
            })
        })
        .collect();
    let dist = ctt::quality_distribution(items);
    json!({
        "items": rows,
        "quality_distribution": {
            "excellent": dist.excellent,
            "good": dist.good,
            "marginal": dist.marginal,
            "poor": dist.poor,
        },
    })
}

/// Per-item feature-statistics rows (ANOVA and mutual information).
pub fn features_section(
    ctt_items: &[ItemCtt],
    anova: &[AnovaResult],
    mi: &[f64],
    include_bits: bool,
) -> Value {
    let rows: Vec<Value> = ctt_items
        .iter()
        .zip(anova)
        .zip(mi)
        .map(|((it, an), &info)| {
            let mut row = Map::new();
            row.insert("item".into(), json!(it.item + 1));
            row.insert("discrimination".into(), num(it.discrimination));
            row.insert("point_biserial".into(), opt_num(it.point_biserial));
            row.insert("f_stat".into(), num(an.f_stat));
            row.insert("log10_p".into(), num(an.log10_p));
            row.insert("mutual_info_nats".into(), num(info));
            if include_bits {
                row.insert("mutual_info_bits".into(), num(info * NATS_TO_BITS));
            }
            Value::Object(row)
        })
        .collect();
    json!({ "items": rows })
}

fn eval_value(m: &EvalMetrics) -> Value {
    json!({
        "accuracy": num(m.accuracy),
        "precision_weighted": num(m.precision_weighted),
        "recall_weighted": num(m.recall_weighted),
        "f1_weighted": num(m.f1_weighted),
        "confusion": m.confusion,
        "zero_prediction_classes": m.zero_prediction_classes
            .iter()
            .map(|l| l.as_str())
            .collect::<Vec<_>>(),
    })
}

fn cv_value(cv: &CvReport) -> Value {
    json!({
        "folds": cv.folds,
        "per_fold_accuracy": cv.per_fold_accuracy.iter().map(|&a| num(a)).collect::<Vec<_>>(),
        "mean_accuracy": num(cv.mean_accuracy),
        "sd_accuracy": num(cv.sd_accuracy),
        "ci95": [num(cv.ci95.0), num(cv.ci95.1)],
        "pooled": eval_value(&cv.pooled),
    })
}

fn agreement_value(agreement: &MethodAgreement) -> Value {
    json!({
        "metrics": AGREEMENT_METRICS,
        "matrix": agreement.matrix
            .iter()
            .map(|row| row.iter().map(|&c| opt_num(c)).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "complete_items": agreement.complete_items,
    })
}

/// Machine-learning section: forest config, CV results, and importances.
#[allow(clippy::too_many_arguments)]
pub fn ml_section(
    params: &ForestParams,
    n_features: usize,
    model: &ForestModel,
    train_accuracy: f64,
    cv: &CvReport,
    baseline_cv: &CvReport,
    permutation: &[PermutationImportance],
    agreement: &MethodAgreement,
) -> Value {
    json!({
        "params": {
            "n_estimators": params.n_estimators,
            "max_depth": params.max_depth,
            "min_samples_split": params.min_samples_split,
            "mtry": params.effective_mtry(n_features),
        },
        "train_accuracy": num(train_accuracy),
        "cv": cv_value(cv),
        "baseline_cv": cv_value(baseline_cv),
        "mdi": model.mdi_importance().iter().map(|&v| num(v)).collect::<Vec<_>>(),
        "permutation": permutation
            .iter()
            .map(|p| json!({
                "feature": p.feature,
                "item": p.feature + 1,
                "mean_drop": num(p.mean_drop),
                "sd_drop": num(p.sd_drop),
            }))
            .collect::<Vec<_>>(),
        "method_agreement": agreement_value(agreement),
    })
}

/// Clustering section: per-k diagnostics plus the selected solution.
pub fn clustering_section(report: &CompetencyReport) -> Value {
    let mut sizes = vec![0usize; report.solution.k];
    for &a in &report.solution.assignments {
        sizes[a] += 1;
    }
    json!({
        "k_min": report.k_min,
        "k_max": report.k_max,
        "per_k": report.per_k
            .iter()
            .map(|d| json!({
                "k": d.k,
                "wcss": num(d.wcss),
                "silhouette_mean": opt_num(d.silhouette_mean),
                "gap": num(d.gap),
                "gap_se": num(d.gap_se),
            }))
            .collect::<Vec<_>>(),
        "elbow_k": report.elbow_k,
        "selected_k": report.selected_k,
        "solution": {
            "k": report.solution.k,
            "wcss": num(report.solution.wcss),
            "silhouette_mean": opt_num(report.solution.silhouette_mean),
            "iterations": report.solution.iterations,
            "converged": report.solution.converged,
            "cluster_sizes": sizes,
        },
        "profile": {
            "clusters": report.profile.clusters
                .iter()
                .map(|c| json!({
                    "cluster": c.cluster,
                    "n": c.n,
                    "mean_percent": num(c.mean_percent),
                    "sd_percent": num(c.sd_percent),
                    "min_percent": num(c.min_percent),
                    "max_percent": num(c.max_percent),
                    "label_counts": c.label_counts.map(|counts| counts.to_vec()),
                    "majority_label": c.majority_label.map(|l| l.as_str()),
                    "purity": opt_num(c.purity),
                }))
                .collect::<Vec<_>>(),
            "natural_boundary": num(report.profile.natural_boundary),
        },
        "stability": {
            "k": report.stability.k,
            "iterations": report.stability.iterations,
            "mean_ari": num(report.stability.mean_ari),
            "ci95": [num(report.stability.ci95.0), num(report.stability.ci95.1)],
        },
    })
}

/// Provenance section: toolkit identity, seed, config echo, input digest.
pub fn provenance_section(
    config: &RunConfig,
    digest: Option<&str>,
    warnings: &[String],
) -> Value {
    json!({
        "toolkit": {
            "name": "placemetrics",
            "version": env!("CARGO_PKG_VERSION"),
        },
        "seed": config.seed,
        "input": config.input.as_ref().map(|p| p.display().to_string()),
        "input_sha256": digest,
        "config": {
            "folds": config.folds,
            "k_min": config.k_min,
            "k_max": config.k_max,
            "bootstrap_iters": config.bootstrap_iters,
            "trees": config.trees,
            "max_depth": config.max_depth,
            "min_split": config.min_split,
            "mtry": config.mtry,
            "permutation_repeats": DEFAULT_PERMUTATION_REPEATS,
            "gap_references": GAP_REFERENCES,
        },
        "label_warnings": warnings,
    })
}

/// Everything the `report` subcommand computes, kept for reuse by plots.
pub struct FullAnalysis {
    pub ctt_items: Vec<ItemCtt>,
    pub anova: Vec<AnovaResult>,
    pub mutual_info: Vec<f64>,
    pub model: ForestModel,
    pub cv: CvReport,
    pub baseline_cv: CvReport,
    pub permutation: Vec<PermutationImportance>,
    pub agreement: MethodAgreement,
    pub clustering: CompetencyReport,
    pub report: Value,
}

/// Run the complete pipeline on a labelled matrix.
///
/// Seed usage: the forest fit, cross-validation, permutation importance, and
/// clustering draw from the sub-streams [`STREAM_FOREST`], [`STREAM_CV`],
/// [`STREAM_PERMUTATION`], and [`STREAM_CLUSTER`] of `config.seed`.
pub fn full_analysis(
    matrix: &ResponseMatrix,
    config: &RunConfig,
    digest: Option<&str>,
    warnings: &[String],
) -> Result<FullAnalysis> {
    config.validate()?;
    if !matrix.is_labelled() {
        return Err(Error::MissingLabels(
            "the full report needs placement labels (add the category column)".into(),
        ));
    }

    let ctt_items = ctt::analyze_items(matrix)?;
    let mut anova = Vec::with_capacity(matrix.item_count());
    let mut mutual_info = Vec::with_capacity(matrix.item_count());
    for j in 0..matrix.item_count() {
        anova.push(featstats::anova_f(matrix, j)?);
        mutual_info.push(featstats::mutual_info(matrix, j)?);
    }

    let params = config.forest_params();
    let model = rf_fit(matrix, &params, sub_seed(config.seed, STREAM_FOREST), config.threads)?;
    let train_accuracy = model.accuracy(matrix)?;
    let cv = cross_validate(
        matrix,
        &CvLearner::Forest(params.clone()),
        config.folds,
        sub_seed(config.seed, STREAM_CV),
    )?;
    let baseline_cv = cross_validate(
        matrix,
        &CvLearner::RuleBaseline,
        config.folds,
        sub_seed(config.seed, STREAM_CV),
    )?;
    let permutation = permutation_importance(
        &model,
        matrix,
        sub_seed(config.seed, STREAM_PERMUTATION),
        DEFAULT_PERMUTATION_REPEATS,
    )?;

    let metrics: Vec<ItemMetrics> = ctt_items
        .iter()
        .zip(&anova)
        .zip(&mutual_info)
        .map(|((it, an), &info)| ItemMetrics {
            item: it.item,
            discrimination: it.discrimination,
            point_biserial: it.point_biserial,
            f_stat: an.f_stat,
            mutual_info: info,
            rf_importance: model.mdi_importance()[it.item],
        })
        .collect();
    let agreement = featstats::method_agreement(&metrics)?;

    let clustering = cluster::competency_analysis(
        matrix,
        config.k_min,
        config.k_max,
        GAP_REFERENCES,
        config.bootstrap_iters,
        sub_seed(config.seed, STREAM_CLUSTER),
    )?;

    let mut items_rows = Vec::with_capacity(matrix.item_count());
    for (((it, an), &info), perm) in ctt_items
        .iter()
        .zip(&anova)
        .zip(&mutual_info)
        .zip(&permutation)
    {
        items_rows.push(json!({
            "item": it.item + 1,
            "difficulty": num(it.difficulty),
            "discrimination": num(it.discrimination),
            "upper_prop": num(it.upper_prop),
            "lower_prop": num(it.lower_prop),
            "point_biserial": opt_num(it.point_biserial),
            "quality": it.quality.as_str(),
            "f_stat": num(an.f_stat),
            "log10_p": num(an.log10_p),
            "mutual_info_nats": num(info),
            "mutual_info_bits": num(info * NATS_TO_BITS),
            "mdi": num(model.mdi_importance()[it.item]),
            "permutation_drop_mean": num(perm.mean_drop),
            "permutation_drop_sd": num(perm.sd_drop),
        }));
    }
    let dist = ctt::quality_distribution(&ctt_items);

    let report = json!({
        "descriptive": describe_section(matrix)?,
        "items": items_rows,
        "quality_distribution": {
            "excellent": dist.excellent,
            "good": dist.good,
            "marginal": dist.marginal,
            "poor": dist.poor,
        },
        "ml": ml_section(
            &params,
            matrix.item_count(),
            &model,
            train_accuracy,
            &cv,
            &baseline_cv,
            &permutation,
            &agreement,
        ),
        "clustering": clustering_section(&clustering),
        "provenance": provenance_section(config, digest, warnings),
    });

    Ok(FullAnalysis {
        ctt_items,
        anova,
        mutual_info,
        model,
        cv,
        baseline_cv,
        permutation,
        agreement,
        clustering,
        report,
    })
}

/// Format a float for TSV output (shortest round-trip form).
fn tsv_num(v: f64) -> String {
    format!("{v}")
}

/// Write the four plot-data TSV files.
///
/// - `score_histogram.tsv`: percent-score histogram in 5-point bins.
/// - `difficulty_discrimination.tsv`: per-item difficulty vs discrimination.
/// - `importance.tsv`: per-item importance metrics.
/// - `cluster_scores.tsv`: per-student percent score and cluster id.
pub fn emit_plots(
    matrix: &ResponseMatrix,
    analysis: &FullAnalysis,
    output_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();

    let mut hist = vec![0usize; 20];
    for &p in &matrix.percents() {
        let bin = ((p / 5.0).floor() as usize).min(19);
        hist[bin] += 1;
    }
    let mut text = String::from("bin_low\tbin_high\tcount\n");
    for (i, &count) in hist.iter().enumerate() {
        text.push_str(&format!("{}\t{}\t{}\n", i * 5, (i + 1) * 5, count));
    }
    let path = output_dir.join("score_histogram.tsv");
    std::fs::write(&path, text)?;
    written.push(path);

    let mut text = String::from("item\tp\tD\tquality\n");
    for it in &analysis.ctt_items {
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            it.item + 1,
            tsv_num(it.difficulty),
            tsv_num(it.discrimination),
            it.quality.as_str()
        ));
    }
    let path = output_dir.join("difficulty_discrimination.tsv");
    std::fs::write(&path, text)?;
    written.push(path);

    let mut text = String::from("item\tmdi\tpermutation_drop\tf_stat\tmutual_info\n");
    for (j, perm) in analysis.permutation.iter().enumerate() {
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            j + 1,
            tsv_num(analysis.model.mdi_importance()[j]),
            tsv_num(perm.mean_drop),
            tsv_num(analysis.anova[j].f_stat),
            tsv_num(analysis.mutual_info[j]),
        ));
    }
    let path = output_dir.join("importance.tsv");
    std::fs::write(&path, text)?;
    written.push(path);

    let mut text = String::from("student_id\tpercent\tcluster\n");
    let percents = matrix.percents();
    for (i, s) in matrix.students().iter().enumerate() {
        text.push_str(&format!(
            "{}\t{}\t{}\n",
            s.id,
            tsv_num(percents[i]),
            analysis.clustering.solution.assignments[i]
        ));
    }
    let path = output_dir.join("cluster_scores.tsv");
    std::fs::write(&path, text)?;
    written.push(path);

    Ok(written)
}
