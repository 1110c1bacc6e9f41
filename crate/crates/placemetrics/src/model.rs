//! Core data model: dichotomous response matrices, placement labels, and
//! descriptive score statistics.
//!
//! A cohort is an `n x m` binary matrix: `n` students, `m` exam items, cell
//! `x[i][j] = 1` when student `i` answered item `j` correctly. Each student
//! optionally carries a placement label; labelling is all-or-none for the
//! whole matrix.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Percent threshold separating College Algebra from Precalculus.
pub const COLLEGE_ALGEBRA_MAX_PERCENT: f64 = 55.0;
/// Percent threshold separating Precalculus from Calculus I.
pub const PRECALCULUS_MAX_PERCENT: f64 = 70.0;

/// Placement recommendation, ordered from lowest to highest course level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementLabel {
    CollegeAlgebra,
    Precalculus,
    // snake_case alone would give "calculus1"; keep the serialized form
    // identical to the canonical CSV string.
    #[serde(rename = "calculus_1")]
    Calculus1,
}

/// Number of placement classes.
pub const CLASS_COUNT: usize = 3;

impl PlacementLabel {
    /// All labels in ordinal order.
    pub const ALL: [PlacementLabel; CLASS_COUNT] = [
        PlacementLabel::CollegeAlgebra,
        PlacementLabel::Precalculus,
        PlacementLabel::Calculus1,
    ];

    /// Ordinal rank: 0 (College Algebra), 1 (Precalculus), 2 (Calculus I).
    #[must_use]
    pub fn rank(self) -> usize {
        match self {
            PlacementLabel::CollegeAlgebra => 0,
            PlacementLabel::Precalculus => 1,
            PlacementLabel::Calculus1 => 2,
        }
    }

    /// Label for a given ordinal rank.
    pub fn from_rank(rank: usize) -> Result<Self> {
        Self::ALL
            .get(rank)
            .copied()
            .ok_or_else(|| Error::Domain(format!("placement rank {rank} out of range 0..3")))
    }

    /// Canonical lowercase identifier used in CSV files and reports.
    #[must_use]
    pub fn as_str(self) -> &'static str {
        match self {
            PlacementLabel::CollegeAlgebra => "college_algebra",
            PlacementLabel::Precalculus => "precalculus",
            PlacementLabel::Calculus1 => "calculus_1",
        }
    }
}

impl fmt::Display for PlacementLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlacementLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "college_algebra" => Ok(PlacementLabel::CollegeAlgebra),
            "precalculus" => Ok(PlacementLabel::Precalculus),
            "calculus_1" => Ok(PlacementLabel::Calculus1),
            other => Err(Error::Domain(format!(
                "unknown placement category {other:?} \
                 (expected college_algebra, precalculus, or calculus_1)"
            ))),
        }
    }
}

/// Map a percent score to its placement recommendation.
///
/// `percent <= 55` places into College Algebra, `55 < percent <= 70` into
/// Precalculus, and `percent > 70` into Calculus I. The mapping is total on
/// `[0, 100]`; anything outside (or NaN) is a domain error.
pub fn placement(percent: f64) -> Result<PlacementLabel> {
    if !percent.is_finite() || !(0.0..=100.0).contains(&percent) {
        return Err(Error::Domain(format!(
            "percent score {percent} outside [0, 100]"
        )));
    }
    Ok(if percent <= COLLEGE_ALGEBRA_MAX_PERCENT {
        PlacementLabel::CollegeAlgebra
    } else if percent <= PRECALCULUS_MAX_PERCENT {
        PlacementLabel::Precalculus
    } else {
        PlacementLabel::Calculus1
    })
}

/// One student's row: opaque id, binary responses, optional label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentRecord {
    pub id: String,
    pub responses: Vec<u8>,
    pub label: Option<PlacementLabel>,
}

impl StudentRecord {
    pub fn new(id: impl Into<String>, responses: Vec<u8>, label: Option<PlacementLabel>) -> Self {
        StudentRecord {
            id: id.into(),
            responses,
            label,
        }
    }
}

/// Raw and percent total score for one student.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TotalScore {
    /// Number of correct responses.
    pub raw: u32,
    /// `100 * raw / item_count`.
    pub percent: f64,
}

/// Total score of a single response row.
#[must_use]
pub fn total_score(responses: &[u8]) -> TotalScore {
    let raw = responses.iter().map(|&x| u32::from(x)).sum();
    let percent = if responses.is_empty() {
        0.0
    } else {
        100.0 * f64::from(raw) / responses.len() as f64
    };
    TotalScore { raw, percent }
}

/// Validated `n x m` dichotomous response matrix.
///
/// Invariants enforced at construction:
/// * every row has exactly `item_count` entries, each 0 or 1;
/// * student ids are unique;
/// * either every student is labelled or none is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseMatrix {
    students: Vec<StudentRecord>,
    item_count: usize,
}

impl ResponseMatrix {
    /// Build a matrix after checking all invariants.
    pub fn new(students: Vec<StudentRecord>, item_count: usize) -> Result<Self> {
        if item_count == 0 {
            return Err(Error::InvalidMatrix("item count must be positive".into()));
        }
        if students.is_empty() {
            return Err(Error::InvalidMatrix("matrix has no students".into()));
        }
        let mut ids = HashSet::with_capacity(students.len());
        let labelled = students[0].label.is_some();
        for (i, s) in students.iter().enumerate() {
            if s.responses.len() != item_count {
                return Err(Error::InvalidMatrix(format!(
                    "student {:?} (row {}) has {} responses, expected {item_count}",
                    s.id,
                    i + 1,
                    s.responses.len()
                )));
            }
            if let Some(&bad) = s.responses.iter().find(|&&x| x > 1) {
                return Err(Error::InvalidMatrix(format!(
                    "student {:?} has non-binary response {bad}",
                    s.id
                )));
            }
            if !ids.insert(s.id.as_str()) {
                return Err(Error::InvalidMatrix(format!(
                    "duplicate student id {:?}",
                    s.id
                )));
            }
            if s.label.is_some() != labelled {
                return Err(Error::InvalidMatrix(
                    "labels must be present for every student or for none".into(),
                ));
            }
        }
        drop(ids);
        Ok(ResponseMatrix {
            students,
            item_count,
        })
    }

    /// Number of students.
    #[must_use]
    pub fn n(&self) -> usize {
        self.students.len()
    }

    /// Number of exam items.
    #[must_use]
    pub fn item_count(&self) -> usize {
        self.item_count
    }

    /// Whether the matrix carries placement labels.
    #[must_use]
    pub fn is_labelled(&self) -> bool {
        self.students[0].label.is_some()
    }

    #[must_use]
    pub fn students(&self) -> &[StudentRecord] {
        &self.students
    }

    /// The response of student `i` to item `j`.
    #[must_use]
    pub fn response(&self, student: usize, item: usize) -> u8 {
        self.students[student].responses[item]
    }

    /// Validate an item index.
    pub fn check_item(&self, item: usize) -> Result<()> {
        if item < self.item_count {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "item index {item} out of range for {} items",
                self.item_count
            )))
        }
    }

    /// Column `item` as a vector.
    #[must_use]
    pub fn column(&self, item: usize) -> Vec<u8> {
        self.students.iter().map(|s| s.responses[item]).collect()
    }

    /// Raw total scores for every student.
    #[must_use]
    pub fn totals(&self) -> Vec<u32> {
        self.students
            .iter()
            .map(|s| total_score(&s.responses).raw)
            .collect()
    }

    /// Percent total scores for every student.
    #[must_use]
    pub fn percents(&self) -> Vec<f64> {
        self.students
            .iter()
            .map(|s| total_score(&s.responses).percent)
            .collect()
    }

    /// Labels in student order; error if the matrix is unlabelled.
    pub fn labels(&self) -> Result<Vec<PlacementLabel>> {
        self.students
            .iter()
            .map(|s| {
                s.label
                    .ok_or_else(|| Error::MissingLabels("matrix is unlabelled".into()))
            })
            .collect()
    }

    /// Per-class student counts (ordinal order); zeros if unlabelled.
    #[must_use]
    pub fn class_counts(&self) -> [usize; CLASS_COUNT] {
        let mut counts = [0usize; CLASS_COUNT];
        for s in &self.students {
            if let Some(label) = s.label {
                counts[label.rank()] += 1;
            }
        }
        counts
    }

    /// Copy of the matrix with every label replaced by the placement rule
    /// applied to the student's own percent score.
    #[must_use]
    pub fn with_labels_from_placement(&self) -> ResponseMatrix {
        let students = self
            .students
            .iter()
            .map(|s| {
                let percent = total_score(&s.responses).percent;
                // percent is always within [0, 100] here by construction.
                StudentRecord {
                    id: s.id.clone(),
                    responses: s.responses.clone(),
                    label: Some(placement(percent).expect("percent in range")),
                }
            })
            .collect();
        ResponseMatrix {
            students,
            item_count: self.item_count,
        }
    }

    /// New matrix containing the given rows (in the given order).
    pub fn select(&self, rows: &[usize]) -> Result<ResponseMatrix> {
        let students = rows
            .iter()
            .map(|&i| {
                self.students
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::Domain(format!("row index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        ResponseMatrix::new(students, self.item_count)
    }
}

/// Descriptive summary of a score sample.
///
/// `skewness` and `excess_kurtosis` are `None` when the sample has fewer than
/// four values or zero variance; no field is ever NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for n = 1.
    pub sd: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
    pub range: f64,
    /// First quartile (linear interpolation).
    pub q1: f64,
    /// Third quartile (linear interpolation).
    pub q3: f64,
    pub iqr: f64,
    /// Bias-adjusted sample skewness (G1).
    pub skewness: Option<f64>,
    /// Bias-adjusted excess kurtosis (G2).
    pub excess_kurtosis: Option<f64>,
}

/// Quantile of an ascending-sorted slice by linear interpolation between
/// order statistics (the convention used by mainstream statistics packages).
#[must_use]
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&q));
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 || lo + 1 == sorted.len() {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Compute the descriptive summary of a score sample.
///
/// Requires at least one finite value. For n < 4 the shape statistics are
/// omitted; for n = 1 the dispersion statistics are 0.
pub fn describe(scores: &[f64]) -> Result<ScoreSummary> {
    if scores.is_empty() {
        return Err(Error::InsufficientData(
            "describe requires at least one score".into(),
        ));
    }
    if let Some(bad) = scores.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite score {bad}")));
    }

    let n = scores.len();
    let nf = n as f64;
    let mean = scores.iter().sum::<f64>() / nf;

    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let median = quantile_sorted(&sorted, 0.5);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let min = sorted[0];
    let max = sorted[n - 1];

    // Central moments (population denominators); shape statistics are then
    // bias-adjusted from these.
    let m2 = scores.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    let m3 = scores.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / nf;
    let m4 = scores.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;

    let variance = if n > 1 { m2 * nf / (nf - 1.0) } else { 0.0 };
    let sd = variance.sqrt();

    let (skewness, excess_kurtosis) = if n >= 4 && m2 > 0.0 {
        let g1 = m3 / m2.powf(1.5);
        let skew = g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0);
        let g2 = m4 / (m2 * m2) - 3.0;
        let kurt = ((nf + 1.0) * g2 + 6.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0));
        (Some(skew), Some(kurt))
    } else {
        (None, None)
    };

    Ok(ScoreSummary {
        n,
        mean,
        median,
        sd,
        variance,
        min,
        max,
        range: max - min,
        q1,
        q3,
        iqr: q3 - q1,
        skewness,
        excess_kurtosis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn placement_boundaries() {
        assert_eq!(placement(0.0).unwrap(), PlacementLabel::CollegeAlgebra);
        assert_eq!(placement(55.0).unwrap(), PlacementLabel::CollegeAlgebra);
        assert_eq!(
            placement(55.0 + 1e-9).unwrap(),
            PlacementLabel::Precalculus
        );
        assert_eq!(placement(70.0).unwrap(), PlacementLabel::Precalculus);
        assert_eq!(placement(70.0 + 1e-9).unwrap(), PlacementLabel::Calculus1);
        assert_eq!(placement(100.0).unwrap(), PlacementLabel::Calculus1);
        assert!(placement(-0.1).is_err());
        assert!(placement(100.1).is_err());
        assert!(placement(f64::NAN).is_err());
    }

    #[test]
    fn total_score_basics() {
        let t = total_score(&[1, 0, 1, 1]);
        assert_eq!(t.raw, 3);
        assert_relative_eq!(t.percent, 75.0);
        // 22/40 correct -> 55% (boundary case used by the placement rule).
        let row: Vec<u8> = (0..40).map(|j| u8::from(j < 22)).collect();
        assert_relative_eq!(total_score(&row).percent, 55.0);
    }

    #[test]
    fn matrix_rejects_invariant_violations() {
        let ok = ResponseMatrix::new(
            vec![
                StudentRecord::new("a", vec![1, 0], None),
                StudentRecord::new("b", vec![0, 0], None),
            ],
            2,
        );
        assert!(ok.is_ok());

        let ragged = ResponseMatrix::new(
            vec![
                StudentRecord::new("a", vec![1, 0], None),
                StudentRecord::new("b", vec![0], None),
            ],
            2,
        );
        assert!(matches!(ragged, Err(Error::InvalidMatrix(_))));

        let nonbinary = ResponseMatrix::new(vec![StudentRecord::new("a", vec![2, 0], None)], 2);
        assert!(matches!(nonbinary, Err(Error::InvalidMatrix(_))));

        let dup = ResponseMatrix::new(
            vec![
                StudentRecord::new("a", vec![1, 0], None),
                StudentRecord::new("a", vec![0, 0], None),
            ],
            2,
        );
        assert!(matches!(dup, Err(Error::InvalidMatrix(_))));

        let partial = ResponseMatrix::new(
            vec![
                StudentRecord::new("a", vec![1, 0], Some(PlacementLabel::Precalculus)),
                StudentRecord::new("b", vec![0, 0], None),
            ],
            2,
        );
        assert!(matches!(partial, Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn describe_rejects_empty_and_handles_tiny_samples() {
        assert!(describe(&[]).is_err());

        let one = describe(&[50.0]).unwrap();
        assert_eq!(one.n, 1);
        assert_relative_eq!(one.mean, 50.0);
        assert_relative_eq!(one.sd, 0.0);
        assert!(one.skewness.is_none());

        let three = describe(&[1.0, 2.0, 3.0]).unwrap();
        assert!(three.skewness.is_none(), "shape stats need n >= 4");
        assert!(three.excess_kurtosis.is_none());
    }

    #[test]
    fn describe_constant_sample_has_no_shape_stats() {
        let s = describe(&[7.0; 10]).unwrap();
        assert_relative_eq!(s.sd, 0.0);
        assert_relative_eq!(s.iqr, 0.0);
        assert!(s.skewness.is_none(), "zero variance leaves skew undefined");
        assert!(s.excess_kurtosis.is_none());
    }

    /// Independent direct-formula oracle for every summary field.
    fn describe_oracle(xs: &[f64]) -> ScoreSummary {
        let n = xs.len();
        let nf = n as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let mut s = xs.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let quant = |q: f64| -> f64 {
            let h = (nf - 1.0) * q;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            s[lo] + (h - lo as f64) * (s[hi] - s[lo])
        };
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
        let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
        let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / nf;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
        let g1 = m3 / m2.powf(1.5);
        let skew = (nf * (nf - 1.0)).sqrt() / (nf - 2.0) * g1;
        let kurt =
            ((nf + 1.0) * (m4 / (m2 * m2) - 3.0) + 6.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0));
        ScoreSummary {
            n,
            mean,
            median: quant(0.5),
            sd: var.sqrt(),
            variance: var,
            min: s[0],
            max: s[n - 1],
            range: s[n - 1] - s[0],
            q1: quant(0.25),
            q3: quant(0.75),
            iqr: quant(0.75) - quant(0.25),
            skewness: Some(skew),
            excess_kurtosis: Some(kurt),
        }
    }

    #[test]
    fn describe_matches_direct_formula_oracle_on_uniform_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
        let xs: Vec<f64> = (0..1000).map(|_| rng.random::<f64>() * 100.0).collect();
        let got = describe(&xs).unwrap();
        let want = describe_oracle(&xs);
        assert_relative_eq!(got.mean, want.mean, epsilon = 1e-9);
        assert_relative_eq!(got.median, want.median, epsilon = 1e-9);
        assert_relative_eq!(got.sd, want.sd, epsilon = 1e-9);
        assert_relative_eq!(got.variance, want.variance, epsilon = 1e-9);
        assert_relative_eq!(got.min, want.min, epsilon = 1e-9);
        assert_relative_eq!(got.max, want.max, epsilon = 1e-9);
        assert_relative_eq!(got.q1, want.q1, epsilon = 1e-9);
        assert_relative_eq!(got.q3, want.q3, epsilon = 1e-9);
        assert_relative_eq!(got.iqr, want.iqr, epsilon = 1e-9);
        assert_relative_eq!(
            got.skewness.unwrap(),
            want.skewness.unwrap(),
            epsilon = 1e-9
        );
        assert_relative_eq!(
            got.excess_kurtosis.unwrap(),
            want.excess_kurtosis.unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn quartiles_interpolate_linearly() {
        // Worked example: 0,10,20,30 -> q1 at position 0.75 between 0 and 10.
        let s = describe(&[0.0, 10.0, 20.0, 30.0]).unwrap();
        assert_relative_eq!(s.q1, 7.5);
        assert_relative_eq!(s.median, 15.0);
        assert_relative_eq!(s.q3, 22.5);
    }
}
