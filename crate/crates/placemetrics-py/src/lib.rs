//! Python bindings for the `placemetrics` library.
//!
//! The compiled module is named `placemetrics`. It exposes the response
//! matrix and fitted forest as classes, the statistical routines as
//! functions, and returns the richer reports as plain dicts/lists so they
//! compose with the usual Python data stack.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;

use placemetrics::forest::{
    cross_validate as rust_cross_validate, permutation_importance as rust_permutation_importance,
    rf_fit, CvLearner, ForestModel, ForestParams,
};
use placemetrics::model::{total_score, PlacementLabel, ResponseMatrix, StudentRecord};
use placemetrics::seeding;
use placemetrics::{cluster, ctt, featstats, io, synth};

fn py_err(e: placemetrics::Error) -> PyErr {
    match e.kind() {
        "io" => PyIOError::new_err(e.to_string()),
        kind => PyValueError::new_err(format!("{kind}: {e}")),
    }
}

/// Convert a `serde_json::Value` tree into native Python objects.
fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    match value {
        serde_json::Value::Null => Ok(py.None()),
        serde_json::Value::Bool(b) => b.into_py_any(py),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py_any(py)
            } else if let Some(u) = n.as_u64() {
                u.into_py_any(py)
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_py_any(py)
            }
        }
        serde_json::Value::String(s) => s.into_py_any(py),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_py_any(py)
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_py_any(py)
        }
    }
}

/// Serialize any library report into Python dicts/lists.
fn report_to_py<T: serde::Serialize>(py: Python<'_>, report: &T) -> PyResult<Py<PyAny>> {
    let value = serde_json::to_value(report)
        .map_err(|e| PyValueError::new_err(format!("json: {e}")))?;
    json_to_py(py, &value)
}

fn forest_params(
    trees: usize,
    max_depth: usize,
    min_split: usize,
    mtry: Option<usize>,
) -> ForestParams {
    ForestParams {
        n_estimators: trees,
        max_depth,
        min_samples_split: min_split,
        mtry,
    }
}

/// A students × items binary response matrix, optionally labelled with
/// placement outcomes.
#[pyclass(module = "placemetrics", frozen)]
struct Matrix {
    inner: ResponseMatrix,
    warnings: Vec<String>,
}

#[pymethods]
impl Matrix {
    /// Load a matrix from a CSV file (`student_id,q1..qM[,category]`).
    #[staticmethod]
    fn load_csv(path: &str) -> PyResult<Matrix> {
        let load = io::load_csv(std::path::Path::new(path)).map_err(py_err)?;
        Ok(Matrix {
            inner: load.matrix,
            warnings: load.warnings,
        })
    }

    /// Parse a matrix from CSV text (same schema as `load_csv`).
    #[staticmethod]
    fn from_csv_text(text: &str) -> PyResult<Matrix> {
        let load = io::load_csv_reader(text.as_bytes()).map_err(py_err)?;
        Ok(Matrix {
            inner: load.matrix,
            warnings: load.warnings,
        })
    }

    /// Build a matrix from ids, 0/1 rows, and optional label strings.
    #[staticmethod]
    #[pyo3(signature = (ids, rows, labels=None))]
    fn from_rows(
        ids: Vec<String>,
        rows: Vec<Vec<u8>>,
        labels: Option<Vec<String>>,
    ) -> PyResult<Matrix> {
        if ids.len() != rows.len() {
            return Err(PyValueError::new_err(format!(
                "length_mismatch: {} ids but {} rows",
                ids.len(),
                rows.len()
            )));
        }
        let parsed: Option<Vec<PlacementLabel>> = match labels {
            None => None,
            Some(ls) => {
                if ls.len() != rows.len() {
                    return Err(PyValueError::new_err(format!(
                        "length_mismatch: {} labels but {} rows",
                        ls.len(),
                        rows.len()
                    )));
                }
                Some(
                    ls.iter()
                        .map(|s| s.parse::<PlacementLabel>().map_err(py_err))
                        .collect::<PyResult<_>>()?,
                )
            }
        };
        let item_count = rows.first().map_or(0, Vec::len);
        let students = ids
            .into_iter()
            .zip(rows)
            .enumerate()
            .map(|(i, (id, row))| {
                StudentRecord::new(id, row, parsed.as_ref().map(|ls| ls[i]))
            })
            .collect();
        Ok(Matrix {
            inner: ResponseMatrix::new(students, item_count).map_err(py_err)?,
            warnings: Vec::new(),
        })
    }

    /// The built-in quota-balanced 198-student reference cohort.
    #[staticmethod]
    fn reference(seed: u64) -> PyResult<Matrix> {
        Ok(Matrix {
            inner: synth::reference_cohort(seed).map_err(py_err)?,
            warnings: Vec::new(),
        })
    }

    /// Simulate `n` students from the built-in calibrated 2PL item bank
    /// (plain ability sampling, no group quotas).
    #[staticmethod]
    fn simulate(n: usize, seed: u64) -> PyResult<Matrix> {
        let profile = synth::builtin_profile();
        let items =
            synth::calibrate(&profile.item_targets, seeding::sub_seed(seed, 0)).map_err(py_err)?;
        let matrix =
            synth::simulate_2pl(&items, n, seeding::sub_seed(seed, 1)).map_err(py_err)?;
        Ok(Matrix {
            inner: matrix.with_labels_from_placement(),
            warnings: Vec::new(),
        })
    }

    /// Number of students.
    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// Number of exam items.
    #[getter]
    fn item_count(&self) -> usize {
        self.inner.item_count()
    }

    /// Whether every student carries a placement label.
    #[getter]
    fn is_labelled(&self) -> bool {
        self.inner.is_labelled()
    }

    /// Per-student warnings recorded while loading (label/score mismatches).
    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.warnings.clone()
    }

    /// Student ids in row order.
    fn ids(&self) -> Vec<String> {
        self.inner.students().iter().map(|s| s.id.clone()).collect()
    }

    /// One student's 0/1 responses.
    fn row(&self, i: usize) -> PyResult<Vec<u8>> {
        self.inner
            .students()
            .get(i)
            .map(|s| s.responses.clone())
            .ok_or_else(|| {
                PyValueError::new_err(format!("domain: row {i} out of range for n = {}", self.n()))
            })
    }

    /// Placement labels in row order; raises if the matrix is unlabelled.
    fn labels(&self) -> PyResult<Vec<String>> {
        Ok(self
            .inner
            .labels()
            .map_err(py_err)?
            .iter()
            .map(|l| l.as_str().to_owned())
            .collect())
    }

    /// Student counts per placement label (zeros when unlabelled).
    fn class_counts<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let dict = PyDict::new(py);
        for (rank, &count) in self.inner.class_counts().iter().enumerate() {
            let label = PlacementLabel::from_rank(rank).map_err(py_err)?;
            dict.set_item(label.as_str(), count)?;
        }
        Ok(dict)
    }

    /// Raw total score per student.
    fn totals(&self) -> Vec<u32> {
        self.inner.totals()
    }

    /// Percent score per student.
    fn percent_scores(&self) -> Vec<f64> {
        self.inner
            .students()
            .iter()
            .map(|s| total_score(&s.responses).percent)
            .collect()
    }

    /// Copy of the matrix with labels recomputed from each student's own
    /// percent score via the placement rule.
    fn with_labels_from_placement(&self) -> Matrix {
        Matrix {
            inner: self.inner.with_labels_from_placement(),
            warnings: Vec::new(),
        }
    }

    /// Write the matrix to a CSV file.
    fn to_csv(&self, path: &str) -> PyResult<()> {
        io::write_csv(&self.inner, std::path::Path::new(path)).map_err(py_err)
    }

    /// Serialize the matrix to CSV text.
    fn to_csv_text(&self) -> String {
        io::write_csv_string(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!(
            "Matrix(n={}, item_count={}, labelled={})",
            self.inner.n(),
            self.inner.item_count(),
            if self.inner.is_labelled() { "True" } else { "False" }
        )
    }
}

/// A fitted random-forest placement classifier.
#[pyclass(module = "placemetrics", frozen)]
struct Forest {
    inner: ForestModel,
}

#[pymethods]
impl Forest {
    /// Fit a forest on a labelled matrix. Deterministic in `seed` at any
    /// `threads` value.
    #[staticmethod]
    #[pyo3(signature = (matrix, seed, trees=200, max_depth=10, min_split=5, mtry=None, threads=1))]
    fn train(
        matrix: &Matrix,
        seed: u64,
        trees: usize,
        max_depth: usize,
        min_split: usize,
        mtry: Option<usize>,
        threads: usize,
    ) -> PyResult<Forest> {
        let params = forest_params(trees, max_depth, min_split, mtry);
        Ok(Forest {
            inner: rf_fit(&matrix.inner, &params, seed, threads).map_err(py_err)?,
        })
    }

    /// Decode a model previously produced by `to_json`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Forest> {
        Ok(Forest {
            inner: ForestModel::from_json(text).map_err(py_err)?,
        })
    }

    /// Number of features the model was trained on.
    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features
    }

    /// The training seed.
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    /// Training hyper-parameters as a dict.
    fn params<'py>(&self, py: Python<'py>) -> PyResult<Py<PyAny>> {
        report_to_py(py, &self.inner.params)
    }

    /// Predicted label per student.
    fn predict(&self, matrix: &Matrix) -> PyResult<Vec<String>> {
        Ok(self
            .inner
            .predict_matrix(&matrix.inner)
            .map_err(py_err)?
            .iter()
            .map(|l| l.as_str().to_owned())
            .collect())
    }

    /// Predicted label for one 0/1 response row.
    fn predict_row(&self, row: Vec<u8>) -> PyResult<String> {
        Ok(self
            .inner
            .predict(&row)
            .map_err(py_err)?
            .label
            .as_str()
            .to_owned())
    }

    /// Accuracy against the matrix's own labels.
    fn accuracy(&self, matrix: &Matrix) -> PyResult<f64> {
        self.inner.accuracy(&matrix.inner).map_err(py_err)
    }

    /// Normalized mean-decrease-in-impurity importance per feature.
    fn mdi_importance(&self) -> Vec<f64> {
        self.inner.mdi_importance().to_vec()
    }

    /// Permutation importance per feature: list of dicts with `feature`,
    /// `mean_drop`, and `sd_drop`.
    #[pyo3(signature = (matrix, seed, repeats=10))]
    fn permutation_importance(
        &self,
        py: Python<'_>,
        matrix: &Matrix,
        seed: u64,
        repeats: usize,
    ) -> PyResult<Py<PyAny>> {
        let imp = rust_permutation_importance(&self.inner, &matrix.inner, seed, repeats)
            .map_err(py_err)?;
        report_to_py(py, &imp)
    }

    /// Serialize the model to its versioned JSON format.
    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Forest(trees={}, n_features={}, seed={})",
            self.inner.params.n_estimators, self.inner.n_features, self.inner.seed
        )
    }
}

/// Placement label for a percent score (`college_algebra`, `precalculus`,
/// or `calculus_1`).
#[pyfunction]
fn placement(percent: f64) -> PyResult<String> {
    Ok(placemetrics::placement(percent)
        .map_err(py_err)?
        .as_str()
        .to_owned())
}

/// Summary statistics of a score vector as a dict.
#[pyfunction]
fn describe(py: Python<'_>, scores: Vec<f64>) -> PyResult<Py<PyAny>> {
    let summary = placemetrics::describe(&scores).map_err(py_err)?;
    report_to_py(py, &summary)
}

/// Classical test theory metrics per item: difficulty, upper-lower
/// discrimination, point-biserial, and quality band.
#[pyfunction]
fn item_analysis(py: Python<'_>, matrix: &Matrix) -> PyResult<Py<PyAny>> {
    let items = ctt::analyze_items(&matrix.inner).map_err(py_err)?;
    report_to_py(py, &items)
}

/// One-way ANOVA of an item against the placement labels.
///
/// Returned as a dict; `f_stat` may be `inf` (and `log10_p` `-inf`) when the
/// within-group variance is exactly zero.
#[pyfunction]
fn anova_f<'py>(py: Python<'py>, matrix: &Matrix, item: usize) -> PyResult<Bound<'py, PyDict>> {
    let a = featstats::anova_f(&matrix.inner, item).map_err(py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("item", a.item)?;
    dict.set_item("f_stat", a.f_stat)?;
    dict.set_item("df_between", a.df_between)?;
    dict.set_item("df_within", a.df_within)?;
    dict.set_item("ss_between", a.ss_between)?;
    dict.set_item("ss_within", a.ss_within)?;
    dict.set_item("ms_between", a.ms_between)?;
    dict.set_item("ms_within", a.ms_within)?;
    dict.set_item("log10_p", a.log10_p)?;
    dict.set_item("groups", a.groups)?;
    Ok(dict)
}

/// Plug-in mutual information (nats) between an item and the labels.
#[pyfunction]
fn mutual_info(matrix: &Matrix, item: usize) -> PyResult<f64> {
    featstats::mutual_info(&matrix.inner, item).map_err(py_err)
}

/// Stratified k-fold cross-validation of the random forest.
#[pyfunction]
#[pyo3(signature = (matrix, k, seed, trees=200, max_depth=10, min_split=5, mtry=None))]
#[allow(clippy::too_many_arguments)]
fn cross_validate(
    py: Python<'_>,
    matrix: &Matrix,
    k: usize,
    seed: u64,
    trees: usize,
    max_depth: usize,
    min_split: usize,
    mtry: Option<usize>,
) -> PyResult<Py<PyAny>> {
    let learner = CvLearner::Forest(forest_params(trees, max_depth, min_split, mtry));
    let report = rust_cross_validate(&matrix.inner, &learner, k, seed).map_err(py_err)?;
    report_to_py(py, &report)
}

/// Stratified k-fold cross-validation of the deterministic placement-rule
/// baseline.
#[pyfunction]
fn rule_baseline_cv(py: Python<'_>, matrix: &Matrix, k: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let report =
        rust_cross_validate(&matrix.inner, &CvLearner::RuleBaseline, k, seed).map_err(py_err)?;
    report_to_py(py, &report)
}

/// Full k-means competency analysis: k sweep with silhouette / elbow / gap
/// diagnostics, score-band profile, and bootstrap ARI stability.
#[pyfunction]
#[pyo3(signature = (matrix, k_min, k_max, seed, gap_refs=10, bootstrap_iters=100))]
fn competency_analysis(
    py: Python<'_>,
    matrix: &Matrix,
    k_min: usize,
    k_max: usize,
    seed: u64,
    gap_refs: usize,
    bootstrap_iters: usize,
) -> PyResult<Py<PyAny>> {
    let report =
        cluster::competency_analysis(&matrix.inner, k_min, k_max, gap_refs, bootstrap_iters, seed)
            .map_err(py_err)?;
    report_to_py(py, &report)
}

/// Derive the sub-seed the library uses for work unit `counter` of a master
/// seed (the CLI's per-stage seed layout is built from this).
#[pyfunction]
fn sub_seed(master: u64, counter: u64) -> u64 {
    seeding::sub_seed(master, counter)
}

#[pymodule]
#[pyo3(name = "placemetrics")]
fn placemetrics_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Matrix>()?;
    m.add_class::<Forest>()?;
    m.add_function(wrap_pyfunction!(placement, m)?)?;
    m.add_function(wrap_pyfunction!(describe, m)?)?;
    m.add_function(wrap_pyfunction!(item_analysis, m)?)?;
    m.add_function(wrap_pyfunction!(anova_f, m)?)?;
    m.add_function(wrap_pyfunction!(mutual_info, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(rule_baseline_cv, m)?)?;
    m.add_function(wrap_pyfunction!(competency_analysis, m)?)?;
    m.add_function(wrap_pyfunction!(sub_seed, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("STREAM_FOREST", placemetrics::report::STREAM_FOREST)?;
    m.add("STREAM_CV", placemetrics::report::STREAM_CV)?;
    m.add("STREAM_PERMUTATION", placemetrics::report::STREAM_PERMUTATION)?;
    m.add("STREAM_CLUSTER", placemetrics::report::STREAM_CLUSTER)?;
    m.add("STREAM_SIMULATE", placemetrics::report::STREAM_SIMULATE)?;
    Ok(())
}
