//! Classical test theory item analysis.
//!
//! For each item the module computes the difficulty index `p` (proportion
//! correct), the upper-lower discrimination index `D` based on extreme 27%
//! groups, and the point-biserial item-total correlation, then grades the
//! item on the Ebel discrimination bands.

use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::ResponseMatrix;

/// Ebel quality band for the discrimination index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quality {
    Excellent,
    Good,
    Marginal,
    Poor,
}

impl Quality {
    pub const ALL: [Quality; 4] = [
        Quality::Excellent,
        Quality::Good,
        Quality::Marginal,
        Quality::Poor,
    ];

    #[must_use]
    pub fn as_str(self) -> &'static str {
        match self {
            Quality::Excellent => "excellent",
            Quality::Good => "good",
            Quality::Marginal => "marginal",
            Quality::Poor => "poor",
        }
    }
}

impl fmt::Display for Quality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Quality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "excellent" => Ok(Quality::Excellent),
            "good" => Ok(Quality::Good),
            "marginal" => Ok(Quality::Marginal),
            "poor" => Ok(Quality::Poor),
            other => Err(Error::Domain(format!("unknown quality band {other:?}"))),
        }
    }
}

/// Grade a discrimination index on the Ebel bands:
/// `D >= 0.40` excellent, `0.30 <= D < 0.40` good, `0.20 <= D < 0.30`
/// marginal, `D < 0.20` poor.
pub fn classify_quality(discrimination: f64) -> Result<Quality> {
    if !discrimination.is_finite() {
        return Err(Error::Domain(format!(
            "discrimination index {discrimination} is not finite"
        )));
    }
    Ok(if discrimination >= 0.40 {
        Quality::Excellent
    } else if discrimination >= 0.30 {
        Quality::Good
    } else if discrimination >= 0.20 {
        Quality::Marginal
    } else {
        Quality::Poor
    })
}

/// Full classical statistics for one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemCtt {
    /// Zero-based item index.
    pub item: usize,
    /// Difficulty index `p` (proportion answering correctly).
    pub difficulty: f64,
    /// Upper-lower discrimination index `D = p_upper - p_lower`.
    pub discrimination: f64,
    /// Proportion correct in the upper 27% group.
    pub upper_prop: f64,
    /// Proportion correct in the lower 27% group.
    pub lower_prop: f64,
    /// Point-biserial item-total correlation; `None` when the item or the
    /// totals are constant.
    pub point_biserial: Option<f64>,
    pub quality: Quality,
}

/// Index sets of the upper and lower extreme 27% score groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtremeGroups {
    pub upper: Vec<usize>,
    pub lower: Vec<usize>,
}

impl ExtremeGroups {
    /// Size of each group.
    #[must_use]
    pub fn group_size(&self) -> usize {
        self.upper.len()
    }
}

/// Difficulty index of one item: proportion of students answering correctly.
pub fn difficulty(matrix: &ResponseMatrix, item: usize) -> Result<f64> {
    matrix.check_item(item)?;
    let correct: usize = matrix
        .students()
        .iter()
        .filter(|s| s.responses[item] == 1)
        .count();
    Ok(correct as f64 / matrix.n() as f64)
}

/// Extreme 27% score groups.
///
/// Both groups have exactly `floor(0.27 * n)` members. Ties in total score
/// are broken deterministically by original student position: the upper group
/// takes students sorted by (total descending, position ascending), the lower
/// group by (total ascending, position ascending).
pub fn extreme_groups(matrix: &ResponseMatrix) -> Result<ExtremeGroups> {
    let n = matrix.n();
    if n < 8 {
        return Err(Error::InsufficientData(format!(
            "extreme groups require at least 8 students, got {n}"
        )));
    }
    let g = (0.27 * n as f64).floor() as usize;
    let totals = matrix.totals();

    let mut by_desc: Vec<usize> = (0..n).collect();
    by_desc.sort_by_key(|&i| (Reverse(totals[i]), i));
    let upper = by_desc[..g].to_vec();

    let mut by_asc: Vec<usize> = (0..n).collect();
    by_asc.sort_by_key(|&i| (totals[i], i));
    let lower = by_asc[..g].to_vec();

    Ok(ExtremeGroups { upper, lower })
}

/// Proportion of `rows` answering `item` correctly.
fn group_proportion(matrix: &ResponseMatrix, item: usize, rows: &[usize]) -> f64 {
    let correct = rows
        .iter()
        .filter(|&&i| matrix.response(i, item) == 1)
        .count();
    correct as f64 / rows.len() as f64
}

/// Discrimination index with the extreme groups supplied by the caller.
///
/// Exposed separately so that fixtures can hold the groups fixed while a
/// column is transformed.
pub fn discrimination_with_groups(
    matrix: &ResponseMatrix,
    item: usize,
    groups: &ExtremeGroups,
) -> Result<f64> {
    matrix.check_item(item)?;
    Ok(group_proportion(matrix, item, &groups.upper)
        - group_proportion(matrix, item, &groups.lower))
}

/// Upper-lower discrimination index `D = p_upper - p_lower`.
pub fn discrimination(matrix: &ResponseMatrix, item: usize) -> Result<f64> {
    let groups = extreme_groups(matrix)?;
    discrimination_with_groups(matrix, item, &groups)
}

/// Pearson correlation between a binary column and a totals vector.
///
/// Returns `None` when either side has zero variance.
#[must_use]
pub(crate) fn point_biserial_with_totals(column: &[u8], totals: &[f64]) -> Option<f64> {
    debug_assert_eq!(column.len(), totals.len());
    let n = column.len() as f64;
    let mean_x = column.iter().map(|&x| f64::from(x)).sum::<f64>() / n;
    let mean_s = totals.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_s = 0.0;
    for (&x, &s) in column.iter().zip(totals) {
        let dx = f64::from(x) - mean_x;
        let ds = s - mean_s;
        cov += dx * ds;
        var_x += dx * dx;
        var_s += ds * ds;
    }
    if var_x == 0.0 || var_s == 0.0 {
        None
    } else {
        Some(cov / (var_x.sqrt() * var_s.sqrt()))
    }
}

/// Point-biserial correlation between an item and the total score
/// (total includes the item itself).
pub fn point_biserial(matrix: &ResponseMatrix, item: usize) -> Result<Option<f64>> {
    matrix.check_item(item)?;
    let column = matrix.column(item);
    let totals: Vec<f64> = matrix.totals().iter().map(|&t| f64::from(t)).collect();
    Ok(point_biserial_with_totals(&column, &totals))
}

/// Corrected point-biserial: the item is removed from the total before
/// correlating. Not part of the default reports.
pub fn point_biserial_corrected(matrix: &ResponseMatrix, item: usize) -> Result<Option<f64>> {
    matrix.check_item(item)?;
    let column = matrix.column(item);
    let totals: Vec<f64> = matrix
        .students()
        .iter()
        .map(|s| {
            let t: u32 = s.responses.iter().map(|&x| u32::from(x)).sum();
            f64::from(t - u32::from(s.responses[item]))
        })
        .collect();
    Ok(point_biserial_with_totals(&column, &totals))
}

/// Classical statistics for every item of the matrix.
pub fn analyze_items(matrix: &ResponseMatrix) -> Result<Vec<ItemCtt>> {
    let groups = extreme_groups(matrix)?;
    let totals: Vec<f64> = matrix.totals().iter().map(|&t| f64::from(t)).collect();
    (0..matrix.item_count())
        .map(|item| {
            let upper_prop = group_proportion(matrix, item, &groups.upper);
            let lower_prop = group_proportion(matrix, item, &groups.lower);
            let d = upper_prop - lower_prop;
            Ok(ItemCtt {
                item,
                difficulty: difficulty(matrix, item)?,
                discrimination: d,
                upper_prop,
                lower_prop,
                point_biserial: point_biserial_with_totals(&matrix.column(item), &totals),
                quality: classify_quality(d)?,
            })
        })
        .collect()
}

/// Item counts per Ebel quality band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityDistribution {
    pub excellent: usize,
    pub good: usize,
    pub marginal: usize,
    pub poor: usize,
}

impl QualityDistribution {
    #[must_use]
    pub fn total(&self) -> usize {
        self.excellent + self.good + self.marginal + self.poor
    }

    #[must_use]
    pub fn count(&self, q: Quality) -> usize {
        match q {
            Quality::Excellent => self.excellent,
            Quality::Good => self.good,
            Quality::Marginal => self.marginal,
            Quality::Poor => self.poor,
        }
    }

    /// Percentage of items in a band, rounded to one decimal place.
    #[must_use]
    pub fn percent(&self, q: Quality) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        let raw = 100.0 * self.count(q) as f64 / self.total() as f64;
        (raw * 10.0).round() / 10.0
    }
}

/// Band counts over a set of analyzed items.
pub fn quality_distribution(items: &[ItemCtt]) -> QualityDistribution {
    let mut dist = QualityDistribution {
        excellent: 0,
        good: 0,
        marginal: 0,
        poor: 0,
    };
    for it in items {
        match it.quality {
            Quality::Excellent => dist.excellent += 1,
            Quality::Good => dist.good += 1,
            Quality::Marginal => dist.marginal += 1,
            Quality::Poor => dist.poor += 1,
        }
    }
    dist
}

/// Band counts straight from a discrimination column.
pub fn quality_distribution_of(discriminations: &[f64]) -> Result<QualityDistribution> {
    let mut dist = QualityDistribution {
        excellent: 0,
        good: 0,
        marginal: 0,
        poor: 0,
    };
    for &d in discriminations {
        match classify_quality(d)? {
            Quality::Excellent => dist.excellent += 1,
            Quality::Good => dist.good += 1,
            Quality::Marginal => dist.marginal += 1,
            Quality::Poor => dist.poor += 1,
        }
    }
    Ok(dist)
}
