//! Univariate feature scores: one-way ANOVA F across placement groups,
//! log-domain survival p-values, discrete mutual information, and
//! cross-method agreement correlations.
//!
//! P-values from large F statistics underflow `f64` long before they stop
//! being informative, so the module reports `log10(p)` computed entirely in
//! log space through the regularized incomplete beta function (continued
//! fraction, Lentz's algorithm). This stays accurate for tails far below
//! `1e-300`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ResponseMatrix, CLASS_COUNT};

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

/// Convergence tolerance for the incomplete beta continued fraction.
const BETA_CF_TOL: f64 = 1e-12;
/// Iteration cap for the continued fraction.
const BETA_CF_MAX_ITER: usize = 500;

/// Natural log of the gamma function (Lanczos approximation, g = 7).
///
/// Accurate to ~1e-13 relative error for positive arguments, which is far
/// below the tolerance of the p-values built on top of it.
#[must_use]
pub fn ln_gamma(x: f64) -> f64 {
    // Lanczos coefficients for g = 7, n = 9.
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = COEFFS[0];
        for (i, &c) in COEFFS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + 7.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

/// `ln B(a, b)`.
#[must_use]
fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for the regularized incomplete beta, evaluated with
/// Lentz's algorithm. Valid (and rapidly convergent) for
/// `x < (a + 1) / (a + b + 2)`.
fn beta_cf(x: f64, a: f64, b: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=BETA_CF_MAX_ITER {
        let m_f = m as f64;
        let m2 = 2.0 * m_f;
        // Even step.
        let aa = m_f * (b - m_f) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // Odd step.
        let aa = -(a + m_f) * (qab + m_f) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < BETA_CF_TOL {
            return Ok(h);
        }
    }
    Err(Error::Domain(format!(
        "incomplete beta continued fraction did not converge within \
         {BETA_CF_MAX_ITER} iterations (x = {x}, a = {a}, b = {b})"
    )))
}

/// `ln(1 - e^l)` for `l <= 0`, computed without catastrophic cancellation.
fn ln_one_minus_exp(l: f64) -> f64 {
    debug_assert!(l <= 0.0);
    if l > -std::f64::consts::LN_2 {
        (-l.exp_m1()).ln()
    } else {
        (-l.exp()).ln_1p()
    }
}

/// Natural log of the regularized incomplete beta `I_x(a, b)`.
///
/// Works in log space throughout: the prefactor
/// `exp(a ln x + b ln(1-x) - ln B(a, b))` never materializes, so tails far
/// below the smallest positive `f64` are still represented exactly as logs.
pub fn ln_reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if a <= 0.0 || b <= 0.0 {
        return Err(Error::Domain(format!(
            "incomplete beta parameters must be positive (a = {a}, b = {b})"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("incomplete beta x = {x} outside [0, 1]")));
    }
    if x == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if x == 1.0 {
        return Ok(0.0);
    }
    // Inclusive threshold so the symmetric call below always lands strictly
    // inside this branch (x > t implies 1 - x < (b + 1)/(a + b + 2)).
    if x <= (a + 1.0) / (a + b + 2.0) {
        let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
        let cf = beta_cf(x, a, b)?;
        Ok(ln_front + (cf / a).ln())
    } else {
        // Symmetry: I_x(a, b) = 1 - I_{1-x}(b, a); the complement is in the
        // fast-converging regime.
        let ln_comp = ln_reg_inc_beta(1.0 - x, b, a)?;
        Ok(ln_one_minus_exp(ln_comp.min(0.0)))
    }
}

/// `log10` of the upper-tail probability `P(F > f)` for an F distribution
/// with `df1` and `df2` degrees of freedom.
///
/// `f = 0` gives `log10(1) = 0`; the result decreases monotonically in `f`.
pub fn f_survival(f: f64, df1: usize, df2: usize) -> Result<f64> {
    if df1 == 0 || df2 == 0 {
        return Err(Error::Domain(format!(
            "degrees of freedom must be positive (df1 = {df1}, df2 = {df2})"
        )));
    }
    if !f.is_finite() || f < 0.0 {
        if f.is_infinite() && f > 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        return Err(Error::Domain(format!("F statistic {f} must be non-negative")));
    }
    let d1 = df1 as f64;
    let d2 = df2 as f64;
    // P(F > f) = I_{d2 / (d2 + d1 f)}(d2/2, d1/2).
    let x = d2 / (d2 + d1 * f);
    let ln_p = ln_reg_inc_beta(x, d2 / 2.0, d1 / 2.0)?;
    Ok(ln_p / std::f64::consts::LN_10)
}

// ---------------------------------------------------------------------------
// ANOVA
// ---------------------------------------------------------------------------

/// One-way ANOVA decomposition of a single item across placement groups.
///
/// `f_stat` is `+inf` (and `log10_p` is `-inf`) when the within-group mean
/// square vanishes while the between-group mean square does not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub item: usize,
    pub f_stat: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub ss_between: f64,
    pub ss_within: f64,
    pub ms_between: f64,
    pub ms_within: f64,
    /// `log10` of the survival probability of `f_stat`.
    pub log10_p: f64,
    /// Per-group `(size, proportion correct)` in ordinal label order,
    /// with empty groups omitted.
    pub groups: Vec<(usize, f64)>,
}

/// One-way ANOVA of item `item` against the placement labels.
///
/// For a binary item the within-group sum of squares reduces exactly to
/// `sum_k n_k p_k (1 - p_k)`, which is how it is computed here.
pub fn anova_f(matrix: &ResponseMatrix, item: usize) -> Result<AnovaResult> {
    matrix.check_item(item)?;
    let labels = matrix.labels().map_err(|_| {
        Error::MissingLabels("anova_f requires a labelled matrix".into())
    })?;

    let mut count = [0usize; CLASS_COUNT];
    let mut correct = [0usize; CLASS_COUNT];
    for (s, label) in matrix.students().iter().zip(&labels) {
        let k = label.rank();
        count[k] += 1;
        correct[k] += usize::from(s.responses[item]);
    }

    let groups: Vec<(usize, f64)> = count
        .iter()
        .zip(&correct)
        .filter(|(&n_k, _)| n_k > 0)
        .map(|(&n_k, &c_k)| (n_k, c_k as f64 / n_k as f64))
        .collect();
    let k = groups.len();
    let n = matrix.n();
    if k < 2 {
        return Err(Error::InsufficientData(format!(
            "anova_f needs at least 2 non-empty groups, got {k}"
        )));
    }
    if n <= k {
        return Err(Error::InsufficientData(format!(
            "anova_f needs more observations ({n}) than groups ({k})"
        )));
    }

    let grand = groups.iter().map(|&(n_k, p_k)| n_k as f64 * p_k).sum::<f64>() / n as f64;
    let ss_between = groups
        .iter()
        .map(|&(n_k, p_k)| n_k as f64 * (p_k - grand) * (p_k - grand))
        .sum::<f64>();
    let ss_within = groups
        .iter()
        .map(|&(n_k, p_k)| n_k as f64 * p_k * (1.0 - p_k))
        .sum::<f64>();

    let df_between = k - 1;
    let df_within = n - k;
    let ms_between = ss_between / df_between as f64;
    let ms_within = ss_within / df_within as f64;

    let (f_stat, log10_p) = if ms_within > 0.0 {
        let f = ms_between / ms_within;
        (f, f_survival(f, df_between, df_within)?)
    } else if ms_between > 0.0 {
        (f64::INFINITY, f64::NEG_INFINITY)
    } else {
        (0.0, 0.0)
    };

    Ok(AnovaResult {
        item,
        f_stat,
        df_between,
        df_within,
        ss_between,
        ss_within,
        ms_between,
        ms_within,
        log10_p,
        groups,
    })
}

// ---------------------------------------------------------------------------
// Mutual information
// ---------------------------------------------------------------------------

/// Plug-in mutual information (in nats) between a binary item and the
/// placement label: `MI = sum_{x,y} p(x,y) ln( p(x,y) / (p(x) p(y)) )`,
/// with `0 ln 0 = 0`.
pub fn mutual_info(matrix: &ResponseMatrix, item: usize) -> Result<f64> {
    matrix.check_item(item)?;
    let labels = matrix.labels().map_err(|_| {
        Error::MissingLabels("mutual_info requires a labelled matrix".into())
    })?;

    let n = matrix.n() as f64;
    let mut joint = [[0usize; CLASS_COUNT]; 2];
    for (s, label) in matrix.students().iter().zip(&labels) {
        joint[usize::from(s.responses[item])][label.rank()] += 1;
    }
    let marg_x: [usize; 2] = [joint[0].iter().sum(), joint[1].iter().sum()];
    let mut marg_y = [0usize; CLASS_COUNT];
    for x in 0..2 {
        for y in 0..CLASS_COUNT {
            marg_y[y] += joint[x][y];
        }
    }

    let mut mi = 0.0;
    for x in 0..2 {
        for y in 0..CLASS_COUNT {
            let nxy = joint[x][y];
            if nxy == 0 {
                continue;
            }
            let pxy = nxy as f64 / n;
            let px = marg_x[x] as f64 / n;
            let py = marg_y[y] as f64 / n;
            mi += pxy * (pxy / (px * py)).ln();
        }
    }
    // Exact MI is non-negative; rounding can leave a tiny negative residue.
    Ok(mi.max(0.0))
}

/// Shannon entropy (nats) of a discrete count vector.
#[must_use]
pub fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / nf;
            -p * p.ln()
        })
        .sum()
}

/// Conversion factor from nats to bits (`1 / ln 2`).
pub const NATS_TO_BITS: f64 = std::f64::consts::LOG2_E;

// ---------------------------------------------------------------------------
// Method agreement
// ---------------------------------------------------------------------------

/// Per-item metric bundle used for the agreement matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemMetrics {
    pub item: usize,
    pub discrimination: f64,
    pub point_biserial: Option<f64>,
    pub f_stat: f64,
    pub mutual_info: f64,
    pub rf_importance: f64,
}

/// Metric names in the fixed order used by [`MethodAgreement::matrix`].
pub const AGREEMENT_METRICS: [&str; 5] = [
    "discrimination",
    "point_biserial",
    "f_stat",
    "mutual_info",
    "rf_importance",
];

/// Pairwise Pearson correlations between importance metrics across items.
///
/// Cells are `None` when fewer than two items have both metrics defined and
/// finite, or when a metric is constant over the common items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAgreement {
    /// Symmetric 5x5 matrix ordered like [`AGREEMENT_METRICS`].
    pub matrix: Vec<Vec<Option<f64>>>,
    /// Number of items with all five metrics defined and finite.
    pub complete_items: usize,
}

impl MethodAgreement {
    /// Correlation between two metrics by name.
    pub fn between(&self, a: &str, b: &str) -> Result<Option<f64>> {
        let ia = AGREEMENT_METRICS
            .iter()
            .position(|&m| m == a)
            .ok_or_else(|| Error::Domain(format!("unknown metric {a:?}")))?;
        let ib = AGREEMENT_METRICS
            .iter()
            .position(|&m| m == b)
            .ok_or_else(|| Error::Domain(format!("unknown metric {b:?}")))?;
        Ok(self.matrix[ia][ib])
    }
}

/// Pearson correlation of two equal-length samples; `None` on zero variance.
#[must_use]
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        None
    } else {
        Some(cov / (vx.sqrt() * vy.sqrt()))
    }
}

/// Metric value by column index, `None` when undefined or non-finite.
fn metric_value(m: &ItemMetrics, idx: usize) -> Option<f64> {
    let v = match idx {
        0 => Some(m.discrimination),
        1 => m.point_biserial,
        2 => Some(m.f_stat),
        3 => Some(m.mutual_info),
        4 => Some(m.rf_importance),
        _ => unreachable!("metric index"),
    };
    v.filter(|x| x.is_finite())
}

/// Agreement matrix over a metric table.
///
/// Undefined metrics are excluded pairwise: each cell correlates only the
/// items where both metrics are defined and finite. Requires at least three
/// items with all metrics defined.
pub fn method_agreement(items: &[ItemMetrics]) -> Result<MethodAgreement> {
    let complete_items = items
        .iter()
        .filter(|m| (0..5).all(|i| metric_value(m, i).is_some()))
        .count();
    if complete_items < 3 {
        return Err(Error::InsufficientData(format!(
            "method_agreement needs >= 3 items with all metrics defined, got {complete_items}"
        )));
    }

    let mut matrix = vec![vec![None; 5]; 5];
    for a in 0..5 {
        for b in a..5 {
            let cell = if a == b {
                Some(1.0)
            } else {
                let pairs: (Vec<f64>, Vec<f64>) = items
                    .iter()
                    .filter_map(|m| Some((metric_value(m, a)?, metric_value(m, b)?)))
                    .unzip();
                pearson(&pairs.0, &pairs.1)
            };
            matrix[a][b] = cell;
            matrix[b][a] = cell;
        }
    }
    Ok(MethodAgreement {
        matrix,
        complete_items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PlacementLabel, ResponseMatrix, StudentRecord};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn labelled_matrix(rows: Vec<(Vec<u8>, PlacementLabel)>) -> ResponseMatrix {
        let m = rows[0].0.len();
        let students = rows
            .into_iter()
            .enumerate()
            .map(|(i, (r, l))| StudentRecord::new(format!("s{i:03}"), r, Some(l)))
            .collect();
        ResponseMatrix::new(students, m).unwrap()
    }

    /// Signature separation cohort: 118 College Algebra students of which 1
    /// answers correctly, then 59 + 21 students who all answer correctly.
    fn separation_cohort() -> ResponseMatrix {
        let mut rows = Vec::new();
        for i in 0..118 {
            rows.push((vec![u8::from(i == 0)], PlacementLabel::CollegeAlgebra));
        }
        for _ in 0..59 {
            rows.push((vec![1], PlacementLabel::Precalculus));
        }
        for _ in 0..21 {
            rows.push((vec![1], PlacementLabel::Calculus1));
        }
        labelled_matrix(rows)
    }

    #[test]
    fn ln_gamma_matches_known_values() {
        // Gamma(n) = (n-1)! for small integers.
        assert_relative_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-12);
        assert_relative_eq!(ln_gamma(2.0), 0.0, epsilon = 1e-12);
        assert_relative_eq!(ln_gamma(5.0), 24f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(ln_gamma(11.0), 3_628_800f64.ln(), epsilon = 1e-12);
        // Gamma(1/2) = sqrt(pi).
        assert_relative_eq!(
            ln_gamma(0.5),
            std::f64::consts::PI.sqrt().ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn inc_beta_closed_forms() {
        // I_x(a, 1) = x^a.
        for &(x, a) in &[(0.3, 2.5), (0.02, 97.5), (0.9, 1.0)] {
            let got = ln_reg_inc_beta(x, a, 1.0).unwrap();
            assert_relative_eq!(got, a * x.ln(), epsilon = 1e-10);
        }
        // I_x(1, b) = 1 - (1-x)^b.
        for &(x, b) in &[(0.3, 2.0), (0.7, 5.5)] {
            let got = ln_reg_inc_beta(x, 1.0, b).unwrap();
            let want = (1.0 - (1.0 - x).powf(b)).ln();
            assert_relative_eq!(got, want, epsilon = 1e-10);
        }
        // Symmetry at the median of a symmetric beta: I_{1/2}(a, a) = 1/2.
        let got = ln_reg_inc_beta(0.5, 4.0, 4.0).unwrap();
        assert_relative_eq!(got, 0.5f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn f_survival_edge_cases() {
        assert_relative_eq!(f_survival(0.0, 2, 195).unwrap(), 0.0);
        assert_eq!(f_survival(f64::INFINITY, 2, 195).unwrap(), f64::NEG_INFINITY);
        assert!(f_survival(-1.0, 2, 195).is_err());
        assert!(f_survival(1.0, 0, 5).is_err());
    }

    #[test]
    fn f_survival_is_monotone_decreasing_in_f() {
        let mut prev = f_survival(0.0, 3, 40).unwrap();
        for i in 1..200 {
            let f = i as f64 * 0.5;
            let cur = f_survival(f, 3, 40).unwrap();
            assert!(
                cur < prev,
                "survival log-p must decrease: f = {f}, {cur} !< {prev}"
            );
            prev = cur;
        }
    }

    /// Two-sided t-test p-value by adaptive numeric integration of the t
    /// density — an oracle independent of the incomplete beta machinery.
    fn t_two_sided_by_quadrature(t: f64, df: usize) -> f64 {
        let nu = df as f64;
        let ln_norm = ln_gamma((nu + 1.0) / 2.0)
            - ln_gamma(nu / 2.0)
            - 0.5 * (nu * std::f64::consts::PI).ln();
        let density = |x: f64| (ln_norm - (nu + 1.0) / 2.0 * (1.0 + x * x / nu).ln()).exp();
        // Map [t, inf) onto v in [0, 1) via x = t + v / (1 - v).
        let g = |v: f64| {
            let one_minus = 1.0 - v;
            density(t + v / one_minus) / (one_minus * one_minus)
        };
        // Composite 64-panel Gauss-Legendre (5-point) on [0, 1).
        const NODES: [f64; 5] = [
            -0.906_179_845_938_664,
            -0.538_469_310_105_683,
            0.0,
            0.538_469_310_105_683,
            0.906_179_845_938_664,
        ];
        const WEIGHTS: [f64; 5] = [
            0.236_926_885_056_189,
            0.478_628_670_499_366,
            0.568_888_888_888_889,
            0.478_628_670_499_366,
            0.236_926_885_056_189,
        ];
        let panels = 64;
        let mut acc = 0.0;
        for p in 0..panels {
            let lo = p as f64 / panels as f64;
            let hi = (p + 1) as f64 / panels as f64;
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            for (&x, &w) in NODES.iter().zip(&WEIGHTS) {
                acc += w * g(mid + half * x) * half;
            }
        }
        2.0 * acc
    }

    #[test]
    fn f_survival_agrees_with_t_test_oracle() {
        // F(1, nu) of t^2 equals the two-sided t-test on nu dof.
        for &(t, df) in &[(1.5f64, 10usize), (2.0, 30), (3.5, 8), (5.0, 60), (0.7, 5)] {
            let log_p = f_survival(t * t, 1, df).unwrap();
            let p = 10f64.powf(log_p);
            let oracle = t_two_sided_by_quadrature(t, df);
            assert_relative_eq!(p, oracle, max_relative = 1e-10);
        }
    }

    #[test]
    fn anova_matches_worked_separation_example() {
        let m = separation_cohort();
        let a = anova_f(&m, 0).unwrap();
        assert_eq!(a.df_between, 2);
        assert_eq!(a.df_within, 195);
        assert_eq!(a.groups.len(), 3);
        assert_relative_eq!(a.groups[0].1, 1.0 / 118.0, epsilon = 1e-12);
        assert_relative_eq!(a.groups[1].1, 1.0);
        assert_relative_eq!(a.groups[2].1, 1.0);
        assert!(
            (a.f_stat - 4609.1).abs() < 0.5,
            "F = {} should be within 0.5 of 4609.1",
            a.f_stat
        );
        assert!(
            (a.log10_p - (-164.2)).abs() < 0.5,
            "log10 p = {} should be within 0.5 of -164.2",
            a.log10_p
        );
    }

    /// Generic raw-deviation one-way ANOVA oracle (no binary shortcut).
    fn anova_oracle(values: &[f64], groups: &[usize]) -> (f64, usize, usize) {
        let n = values.len() as f64;
        let k = groups.iter().max().unwrap() + 1;
        let grand = values.iter().sum::<f64>() / n;
        let mut ssb = 0.0;
        let mut ssw = 0.0;
        for g in 0..k {
            let members: Vec<f64> = values
                .iter()
                .zip(groups)
                .filter(|(_, &gg)| gg == g)
                .map(|(&v, _)| v)
                .collect();
            let ng = members.len() as f64;
            let mean = members.iter().sum::<f64>() / ng;
            ssb += ng * (mean - grand) * (mean - grand);
            ssw += members.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        }
        let dfb = k - 1;
        let dfw = values.len() - k;
        (
            (ssb / dfb as f64) / (ssw / dfw as f64),
            dfb,
            dfw,
        )
    }

    #[test]
    fn anova_binary_shortcut_equals_raw_deviation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(314);
        for _ in 0..100 {
            let n = rng.random_range(12..60);
            let rows: Vec<(Vec<u8>, PlacementLabel)> = (0..n)
                .map(|_| {
                    (
                        vec![u8::from(rng.random::<f64>() < 0.5)],
                        PlacementLabel::ALL[rng.random_range(0..3)],
                    )
                })
                .collect();
            // Ensure at least two non-empty groups and some variance.
            let distinct_labels = rows
                .iter()
                .map(|(_, l)| l.rank())
                .collect::<std::collections::HashSet<_>>()
                .len();
            if distinct_labels < 2 {
                continue;
            }
            let m = labelled_matrix(rows.clone());
            let got = match anova_f(&m, 0) {
                Ok(a) => a,
                Err(_) => continue,
            };
            if !got.f_stat.is_finite() {
                continue;
            }
            let values: Vec<f64> = rows.iter().map(|(r, _)| f64::from(r[0])).collect();
            let groups: Vec<usize> = rows.iter().map(|(_, l)| l.rank()).collect();
            // Remap group ids to the non-empty set the implementation used.
            let (f_want, _, _) = anova_oracle(&values, &remap(&groups));
            assert_relative_eq!(got.f_stat, f_want, epsilon = 1e-9, max_relative = 1e-9);
        }

        fn remap(groups: &[usize]) -> Vec<usize> {
            let mut seen: Vec<usize> = groups.to_vec();
            seen.sort_unstable();
            seen.dedup();
            groups
                .iter()
                .map(|g| seen.iter().position(|s| s == g).unwrap())
                .collect()
        }
    }

    #[test]
    fn anova_degenerate_cases() {
        // Perfectly separated non-constant item: within-group variance zero.
        let m = labelled_matrix(vec![
            (vec![0], PlacementLabel::CollegeAlgebra),
            (vec![0], PlacementLabel::CollegeAlgebra),
            (vec![1], PlacementLabel::Precalculus),
            (vec![1], PlacementLabel::Precalculus),
            (vec![1], PlacementLabel::Calculus1),
        ]);
        let a = anova_f(&m, 0).unwrap();
        assert!(a.f_stat.is_infinite() && a.f_stat > 0.0);
        assert_eq!(a.log10_p, f64::NEG_INFINITY);

        // Constant item: F = 0, p = 1.
        let c = labelled_matrix(vec![
            (vec![1], PlacementLabel::CollegeAlgebra),
            (vec![1], PlacementLabel::CollegeAlgebra),
            (vec![1], PlacementLabel::Precalculus),
            (vec![1], PlacementLabel::Calculus1),
        ]);
        let a = anova_f(&c, 0).unwrap();
        assert_eq!(a.f_stat, 0.0);
        assert_eq!(a.log10_p, 0.0);

        // Single group: error.
        let single = labelled_matrix(vec![
            (vec![1], PlacementLabel::Precalculus),
            (vec![0], PlacementLabel::Precalculus),
            (vec![1], PlacementLabel::Precalculus),
        ]);
        assert!(anova_f(&single, 0).is_err());
    }

    #[test]
    fn mutual_info_matches_entropy_decomposition_on_separation_cohort() {
        let m = separation_cohort();
        let mi = mutual_info(&m, 0).unwrap();
        // H(Y) - H(Y|X) computed from the known cell counts.
        let h_y = entropy(&[118, 59, 21]);
        let h_y_given_1 = entropy(&[1, 59, 21]);
        let h_y_given_0 = entropy(&[117, 0, 0]);
        let want = h_y - (81.0 / 198.0 * h_y_given_1 + 117.0 / 198.0 * h_y_given_0);
        assert_relative_eq!(mi, want, epsilon = 1e-12);
        assert!((mi - 0.647).abs() < 0.005, "MI = {mi} should be near 0.647");
    }

    #[test]
    fn mutual_info_bounds_and_independence() {
        // Independent item: x alternates within each label.
        let rows: Vec<(Vec<u8>, PlacementLabel)> = (0..60)
            .map(|i| (vec![u8::from(i % 2 == 0)], PlacementLabel::ALL[i % 3]))
            .collect();
        let m = labelled_matrix(rows);
        let mi = mutual_info(&m, 0).unwrap();
        assert!(mi.abs() < 1e-12, "independent item must carry zero MI");

        // MI <= min(H(X), H(Y)).
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let rows: Vec<(Vec<u8>, PlacementLabel)> = (0..30)
                .map(|_| {
                    (
                        vec![u8::from(rng.random::<f64>() < 0.4)],
                        PlacementLabel::ALL[rng.random_range(0..3)],
                    )
                })
                .collect();
            let m = labelled_matrix(rows);
            let mi = mutual_info(&m, 0).unwrap();
            let x_counts = [
                m.column(0).iter().filter(|&&x| x == 0).count(),
                m.column(0).iter().filter(|&&x| x == 1).count(),
            ];
            let y_counts = m.class_counts();
            assert!(mi >= 0.0);
            assert!(mi <= entropy(&x_counts) + 1e-12);
            assert!(mi <= entropy(&y_counts) + 1e-12);
        }
    }

    #[test]
    fn mutual_info_equals_label_entropy_when_item_determines_label() {
        // Two labels, item == indicator of the label.
        let rows: Vec<(Vec<u8>, PlacementLabel)> = (0..40)
            .map(|i| {
                if i < 25 {
                    (vec![0], PlacementLabel::CollegeAlgebra)
                } else {
                    (vec![1], PlacementLabel::Calculus1)
                }
            })
            .collect();
        let m = labelled_matrix(rows);
        let mi = mutual_info(&m, 0).unwrap();
        assert_relative_eq!(mi, entropy(&[25, 0, 15]), epsilon = 1e-12);
    }

    #[test]
    fn method_agreement_self_and_affine() {
        let items: Vec<ItemMetrics> = (0..10)
            .map(|i| {
                let d = 0.1 * i as f64;
                ItemMetrics {
                    item: i,
                    discrimination: d,
                    // Affine transform of discrimination: correlation 1.
                    point_biserial: Some(2.0 * d + 0.3),
                    f_stat: (i as f64).exp(),
                    mutual_info: 0.05 * i as f64,
                    rf_importance: 1.0 / (1.0 + i as f64),
                }
            })
            .collect();
        let ma = method_agreement(&items).unwrap();
        for i in 0..5 {
            assert_eq!(ma.matrix[i][i], Some(1.0));
        }
        let r = ma
            .between("discrimination", "point_biserial")
            .unwrap()
            .unwrap();
        assert_relative_eq!(r, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn method_agreement_excludes_undefined_pairwise() {
        let mut items: Vec<ItemMetrics> = (0..8)
            .map(|i| ItemMetrics {
                item: i,
                discrimination: i as f64,
                point_biserial: Some(i as f64 * 0.9),
                f_stat: i as f64 * 3.0,
                mutual_info: i as f64 * 0.1,
                rf_importance: i as f64 * 0.01,
            })
            .collect();
        // Knock out point_biserial on two items and make one F infinite.
        items[1].point_biserial = None;
        items[4].point_biserial = None;
        items[6].f_stat = f64::INFINITY;
        let ma = method_agreement(&items).unwrap();
        assert_eq!(ma.complete_items, 5);
        // All remaining common items are affinely related: r = 1.
        let r = ma.between("discrimination", "f_stat").unwrap().unwrap();
        assert_relative_eq!(r, 1.0, epsilon = 1e-12);

        // Fewer than 3 complete items: error.
        let few: Vec<ItemMetrics> = items
            .iter()
            .cloned()
            .map(|mut m| {
                m.point_biserial = None;
                m
            })
            .collect();
        assert!(method_agreement(&few).is_err());
    }
}
