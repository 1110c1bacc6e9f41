//! `placemetrics` — placement-exam analysis from the command line.
//!
//! Every subcommand writes JSON artifacts into `--output-dir`. Failures write
//! `error.json` there and exit nonzero; a run that exits 0 never leaves an
//! error artifact behind.

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use placemetrics::cluster::{
    self, bootstrap_stability, select_by_silhouette, solutions_over_range,
};
use placemetrics::error::{Error, Result};
use placemetrics::forest::{cross_validate, permutation_importance, rf_fit, CvLearner};
use placemetrics::io;
use placemetrics::model::ResponseMatrix;
use placemetrics::report::{
    self, clustering_section, ctt_section, describe_section, features_section, full_analysis,
    num, write_json_file, RunConfig, DEFAULT_PERMUTATION_REPEATS, STREAM_CLUSTER, STREAM_CV,
    STREAM_FOREST, STREAM_PERMUTATION, STREAM_SIMULATE,
};
use placemetrics::seeding::sub_seed;
use placemetrics::{ctt, featstats, synth};

#[derive(Parser)]
#[command(
    name = "placemetrics",
    version,
    about = "Item analysis, random-forest importance, and competency clustering for placement exams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Input response-matrix CSV (header: student_id,q1,...,qM[,category]).
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Directory for JSON/TSV artifacts (created if missing).
    #[arg(long, global = true, default_value = "placemetrics-out")]
    output_dir: PathBuf,

    /// Master random seed; all stochastic steps derive sub-streams from it.
    #[arg(long, global = true, env = "PLACEMETRICS_SEED", default_value_t = 42)]
    seed: u64,

    /// Cross-validation folds.
    #[arg(long, global = true, default_value_t = 5)]
    folds: usize,

    /// Smallest cluster count to evaluate.
    #[arg(long, global = true, default_value_t = 2)]
    k_min: usize,

    /// Largest cluster count to evaluate.
    #[arg(long, global = true, default_value_t = 6)]
    k_max: usize,

    /// Bootstrap iterations for cluster stability.
    #[arg(long, global = true, default_value_t = 100)]
    bootstrap_iters: usize,

    /// Trees in the random forest.
    #[arg(long, global = true, default_value_t = 200)]
    trees: usize,

    /// Maximum tree depth.
    #[arg(long, global = true, default_value_t = 10)]
    max_depth: usize,

    /// Minimum node size eligible for splitting.
    #[arg(long, global = true, default_value_t = 5)]
    min_split: usize,

    /// Features sampled per split (default: ceil(sqrt(item count))).
    #[arg(long, global = true)]
    mtry: Option<usize>,

    /// Worker threads for forest fitting (results are identical at any value).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Additionally write plot-data TSV files (report subcommand).
    #[arg(long, global = true)]
    emit_plots: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Score distribution summary (works without labels).
    Describe,
    /// Classical item analysis: difficulty, discrimination, quality bands.
    Ctt,
    /// Per-item ANOVA F tests and mutual information (needs labels).
    Features {
        /// Also report mutual information converted to bits.
        #[arg(long)]
        bits: bool,
    },
    /// Fit a random forest and persist it as model.json.
    Train,
    /// Stratified k-fold cross-validation of the forest and the rule baseline.
    Cv,
    /// MDI and permutation importances plus the method-agreement matrix.
    Importance,
    /// Cluster the cohort over a k range with the validation stack.
    Cluster,
    /// Bootstrap stability of the silhouette-selected clustering.
    Stability,
    /// Generate a synthetic cohort from the built-in calibration profile.
    Simulate {
        /// Cohort size; omit to produce the quota-balanced reference cohort.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run the full pipeline and write report.json (plus plots with --emit-plots).
    Report,
}

impl Cli {
    fn config(&self) -> RunConfig {
        RunConfig {
            input: self.input.clone(),
            output_dir: self.output_dir.clone(),
            seed: self.seed,
            folds: self.folds,
            k_min: self.k_min,
            k_max: self.k_max,
            bootstrap_iters: self.bootstrap_iters,
            trees: self.trees,
            max_depth: self.max_depth,
            min_split: self.min_split,
            mtry: self.mtry,
            threads: self.threads,
            emit_plots: self.emit_plots,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let config = cli.config();
    match execute(&cli.command, &config) {
        Ok(()) => std::process::exit(0),
        Err(e) => {
            eprintln!("error: {e}");
            let artifact = json!({
                "error": {
                    "kind": e.kind(),
                    "message": e.to_string(),
                },
            });
            if fs::create_dir_all(&config.output_dir).is_ok() {
                let _ = write_json_file(&config.output_dir.join("error.json"), &artifact);
            }
            std::process::exit(1);
        }
    }
}

/// Load the input CSV, echoing label warnings to stderr.
fn load_input(config: &RunConfig) -> Result<(ResponseMatrix, String, Vec<String>)> {
    let path = config
        .input
        .as_ref()
        .ok_or_else(|| Error::Domain("this subcommand needs --input <cohort.csv>".into()))?;
    let bytes = fs::read(path)?;
    let digest = report::sha256_hex(&bytes);
    let load = io::load_csv_reader(bytes.as_slice())?;
    for w in &load.warnings {
        eprintln!("warning: {w}");
    }
    Ok((load.matrix, digest, load.warnings))
}

fn wrote(path: &std::path::Path) {
    println!("wrote {}", path.display());
}

fn execute(command: &Command, config: &RunConfig) -> Result<()> {
    config.validate()?;
    fs::create_dir_all(&config.output_dir)?;
    // A fresh run must not inherit a stale failure marker.
    let stale = config.output_dir.join("error.json");
    if stale.exists() {
        fs::remove_file(&stale)?;
    }

    match command {
        Command::Describe => {
            let (matrix, _, _) = load_input(config)?;
            let path = config.output_dir.join("describe.json");
            write_json_file(&path, &describe_section(&matrix)?)?;
            wrote(&path);
        }
        Command::Ctt => {
            let (matrix, _, _) = load_input(config)?;
            let items = ctt::analyze_items(&matrix)?;
            let path = config.output_dir.join("ctt.json");
            write_json_file(&path, &ctt_section(&items))?;
            wrote(&path);
        }
        Command::Features { bits } => {
            let (matrix, _, _) = load_input(config)?;
            let items = ctt::analyze_items(&matrix)?;
            let mut anova = Vec::with_capacity(matrix.item_count());
            let mut mi = Vec::with_capacity(matrix.item_count());
            for j in 0..matrix.item_count() {
                anova.push(featstats::anova_f(&matrix, j)?);
                mi.push(featstats::mutual_info(&matrix, j)?);
            }
            let path = config.output_dir.join("features.json");
            write_json_file(&path, &features_section(&items, &anova, &mi, *bits))?;
            wrote(&path);
        }
        Command::Train => {
            let (matrix, _, _) = load_input(config)?;
            let params = config.forest_params();
            let model = rf_fit(
                &matrix,
                &params,
                sub_seed(config.seed, STREAM_FOREST),
                config.threads,
            )?;
            let accuracy = model.accuracy(&matrix)?;
            let path = config.output_dir.join("model.json");
            fs::write(&path, model.to_json()? + "\n")?;
            wrote(&path);
            println!("training accuracy {accuracy:.4}");
        }
        Command::Cv => {
            let (matrix, _, _) = load_input(config)?;
            let params = config.forest_params();
            let seed = sub_seed(config.seed, STREAM_CV);
            let forest_cv =
                cross_validate(&matrix, &CvLearner::Forest(params), config.folds, seed)?;
            let baseline_cv =
                cross_validate(&matrix, &CvLearner::RuleBaseline, config.folds, seed)?;
            let value = json!({
                "forest": cv_json(&forest_cv),
                "rule_baseline": cv_json(&baseline_cv),
            });
            let path = config.output_dir.join("cv.json");
            write_json_file(&path, &value)?;
            wrote(&path);
        }
        Command::Importance => {
            let (matrix, _, _) = load_input(config)?;
            let params = config.forest_params();
            let model = rf_fit(
                &matrix,
                &params,
                sub_seed(config.seed, STREAM_FOREST),
                config.threads,
            )?;
            let permutation = permutation_importance(
                &model,
                &matrix,
                sub_seed(config.seed, STREAM_PERMUTATION),
                DEFAULT_PERMUTATION_REPEATS,
            )?;
            let ctt_items = ctt::analyze_items(&matrix)?;
            let mut metrics = Vec::with_capacity(matrix.item_count());
            for j in 0..matrix.item_count() {
                metrics.push(featstats::ItemMetrics {
                    item: j,
                    discrimination: ctt_items[j].discrimination,
                    point_biserial: ctt_items[j].point_biserial,
                    f_stat: featstats::anova_f(&matrix, j)?.f_stat,
                    mutual_info: featstats::mutual_info(&matrix, j)?,
                    rf_importance: model.mdi_importance()[j],
                });
            }
            let agreement = featstats::method_agreement(&metrics)?;
            let value = json!({
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
                "method_agreement": {
                    "metrics": featstats::AGREEMENT_METRICS,
                    "matrix": agreement.matrix
                        .iter()
                        .map(|row| row.iter().map(|&c| c.map_or(Value::Null, num)).collect::<Vec<_>>())
                        .collect::<Vec<_>>(),
                    "complete_items": agreement.complete_items,
                },
            });
            let path = config.output_dir.join("importance.json");
            write_json_file(&path, &value)?;
            wrote(&path);
        }
        Command::Cluster => {
            let (matrix, _, _) = load_input(config)?;
            let analysis = cluster::competency_analysis(
                &matrix,
                config.k_min,
                config.k_max,
                cluster::GAP_REFERENCES,
                config.bootstrap_iters,
                sub_seed(config.seed, STREAM_CLUSTER),
            )?;
            let mut value = clustering_section(&analysis);
            value["assignments"] = json!(analysis.solution.assignments);
            let path = config.output_dir.join("cluster.json");
            write_json_file(&path, &value)?;
            wrote(&path);
        }
        Command::Stability => {
            let (matrix, _, _) = load_input(config)?;
            let points = cluster::build_features(&matrix);
            let cluster_seed = sub_seed(config.seed, STREAM_CLUSTER);
            let solutions =
                solutions_over_range(&points, config.k_min, config.k_max, sub_seed(cluster_seed, 0))?;
            let best = select_by_silhouette(&solutions)
                .ok_or_else(|| Error::Domain("empty k range".into()))?;
            let stability = bootstrap_stability(
                &points,
                best.k,
                config.bootstrap_iters,
                sub_seed(cluster_seed, 2),
            )?;
            let value = json!({
                "k": stability.k,
                "iterations": stability.iterations,
                "mean_ari": num(stability.mean_ari),
                "ci95": [num(stability.ci95.0), num(stability.ci95.1)],
                "per_iteration": stability.per_iteration.iter().map(|&v| num(v)).collect::<Vec<_>>(),
            });
            let path = config.output_dir.join("stability.json");
            write_json_file(&path, &value)?;
            wrote(&path);
        }
        Command::Simulate { n } => {
            let profile = synth::builtin_profile();
            let sim_seed = sub_seed(config.seed, STREAM_SIMULATE);
            let cohort = match n {
                Some(n) => {
                    let items = synth::calibrate(&profile.item_targets, sub_seed(sim_seed, 0))?;
                    synth::simulate_2pl(&items, *n, sub_seed(sim_seed, 1))?
                }
                None => synth::reference_cohort_from(&profile, sim_seed)?,
            };
            let csv_path = config.output_dir.join("cohort.csv");
            io::write_csv(&cohort, &csv_path)?;
            wrote(&csv_path);

            let per_item: Vec<Value> = profile
                .item_targets
                .iter()
                .enumerate()
                .map(|(j, t)| {
                    let achieved = ctt::difficulty(&cohort, j).expect("item in range");
                    json!({
                        "item": j + 1,
                        "target_difficulty": num(t.difficulty),
                        "target_discrimination": num(t.discrimination),
                        "achieved_difficulty": num(achieved),
                    })
                })
                .collect();
            let counts = cohort.class_counts();
            let value = json!({
                "n": cohort.n(),
                "item_count": cohort.item_count(),
                "class_counts": counts,
                "quota_balanced": n.is_none(),
                "items": per_item,
            });
            let path = config.output_dir.join("simulate.json");
            write_json_file(&path, &value)?;
            wrote(&path);
        }
        Command::Report => {
            let (matrix, digest, warnings) = load_input(config)?;
            let analysis = full_analysis(&matrix, config, Some(&digest), &warnings)?;
            let path = config.output_dir.join("report.json");
            write_json_file(&path, &analysis.report)?;
            wrote(&path);
            if config.emit_plots {
                for plot in report::emit_plots(&matrix, &analysis, &config.output_dir)? {
                    wrote(&plot);
                }
            }
        }
    }
    Ok(())
}

fn cv_json(cv: &placemetrics::forest::CvReport) -> Value {
    json!({
        "folds": cv.folds,
        "per_fold_accuracy": cv.per_fold_accuracy.iter().map(|&a| num(a)).collect::<Vec<_>>(),
        "mean_accuracy": num(cv.mean_accuracy),
        "sd_accuracy": num(cv.sd_accuracy),
        "ci95": [num(cv.ci95.0), num(cv.ci95.1)],
        "pooled_accuracy": num(cv.pooled.accuracy),
        "pooled_f1_weighted": num(cv.pooled.f1_weighted),
        "confusion": cv.pooled.confusion,
    })
}
