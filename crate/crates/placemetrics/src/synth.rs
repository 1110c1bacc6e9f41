//! Synthetic cohort generation: an exact marginal reconstructor (a cohort
//! whose per-item correct counts are pinned exactly) and a two-parameter
//! logistic (2PL) latent-ability simulator calibrated to per-item difficulty
//! and discrimination targets.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ctt;
use crate::error::{Error, Result};
use crate::model::{
    placement, total_score, PlacementLabel, ResponseMatrix, StudentRecord, CLASS_COUNT,
};
use crate::seeding::{sub_seed, sub_seed2};

/// Quadrature order for the logistic–normal integral (accurate to well under
/// 1e-6 over the calibrated parameter range).
pub const QUAD_POINTS: usize = 61;

/// Slope assigned to a target discrimination of 0.
pub const SLOPE_FLOOR: f64 = 0.5;
/// Additional slope per unit of target discrimination.
pub const SLOPE_SPAN: f64 = 4.5;
/// Pilot cohort size for the single slope refinement pass.
pub const PILOT_N: usize = 2000;
/// Marginal difficulties are clamped into this closed range before the
/// location parameter is solved.
pub const DIFFICULTY_CLAMP: (f64, f64) = (0.01, 0.99);
/// Bisection bracket for the location parameter.
const B_BRACKET: (f64, f64) = (-30.0, 30.0);
/// Draw cap for quota-constrained cohort sampling.
const QUOTA_DRAW_CAP: u64 = 500_000;

/// Per-item calibration target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemTarget {
    /// Target proportion-correct in `[0, 1]`.
    pub difficulty: f64,
    /// Target upper-minus-lower discrimination index in `[0, 1]`.
    pub discrimination: f64,
}

/// A full cohort recipe: item targets plus the placement-group structure and
/// one anchor item whose per-group correct counts are pinned exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortProfile {
    pub item_targets: Vec<ItemTarget>,
    /// Students per placement label, in label-rank order.
    pub group_sizes: [usize; CLASS_COUNT],
    /// Zero-based index of the anchor item.
    pub anchor_item: usize,
    /// Exact per-group correct counts imposed on the anchor item.
    pub anchor_group_correct: [usize; CLASS_COUNT],
}

impl CohortProfile {
    pub fn validate(&self) -> Result<()> {
        if self.item_targets.is_empty() {
            return Err(Error::Domain("profile has no items".into()));
        }
        if self.anchor_item >= self.item_targets.len() {
            return Err(Error::Domain(format!(
                "anchor item {} out of range for {} items",
                self.anchor_item,
                self.item_targets.len()
            )));
        }
        if self.group_sizes.iter().sum::<usize>() == 0 {
            return Err(Error::Domain("profile has no students".into()));
        }
        for (g, (&c, &s)) in self
            .anchor_group_correct
            .iter()
            .zip(&self.group_sizes)
            .enumerate()
        {
            if c > s {
                return Err(Error::Infeasible(format!(
                    "anchor correct count {c} exceeds group {g} size {s}"
                )));
            }
        }
        for (j, t) in self.item_targets.iter().enumerate() {
            if !t.difficulty.is_finite() || !(0.0..=1.0).contains(&t.difficulty) {
                return Err(Error::Domain(format!(
                    "item {j}: difficulty target {} outside [0, 1]",
                    t.difficulty
                )));
            }
            if !t.discrimination.is_finite() {
                return Err(Error::Domain(format!("item {j}: non-finite discrimination")));
            }
        }
        Ok(())
    }

    /// Total cohort size.
    #[must_use]
    pub fn n(&self) -> usize {
        self.group_sizes.iter().sum()
    }
}

/// Difficulty and discrimination targets for the built-in 40-item reference
/// exam, in item order.
const BUILTIN_TARGETS: [(f64, f64); 40] = [
    (0.111, 0.358),
    (0.419, 0.943),
    (0.702, 0.906),
    (0.934, 0.019),
    (0.101, 0.283),
    (0.409, 1.000),
    (0.606, 0.962),
    (0.040, 0.113),
    (0.869, 0.208),
    (0.338, 0.925),
    (0.571, 1.000),
    (0.258, 0.849),
    (0.273, 0.887),
    (0.848, 0.472),
    (0.056, 0.151),
    (0.066, 0.132),
    (0.197, 0.509),
    (0.045, 0.094),
    (0.056, 0.189),
    (0.894, 0.302),
    (0.157, 0.453),
    (0.035, 0.094),
    (0.934, 0.057),
    (0.652, 0.925),
    (0.763, 0.679),
    (0.505, 0.962),
    (0.480, 0.925),
    (0.929, 0.132),
    (0.879, 0.396),
    (0.384, 0.943),
    (0.611, 0.906),
    (0.934, 0.075),
    (0.081, 0.226),
    (0.652, 0.962),
    (0.687, 0.906),
    (0.798, 0.585),
    (0.061, 0.189),
    (0.040, 0.057),
    (0.217, 0.679),
    (0.929, 0.189),
];

/// The built-in reference profile: a 40-item exam taken by a 198-student
/// cohort split 118/59/21 across the three placement groups, with item 6
/// (index 5) as the anchor — 1 correct answer in the lowest group and all
/// correct in the two upper groups.
#[must_use]
pub fn builtin_profile() -> CohortProfile {
    CohortProfile {
        item_targets: BUILTIN_TARGETS
            .iter()
            .map(|&(difficulty, discrimination)| ItemTarget {
                difficulty,
                discrimination,
            })
            .collect(),
        group_sizes: [118, 59, 21],
        anchor_item: 5,
        anchor_group_correct: [1, 59, 21],
    }
}

/// Marginal specification of a cohort: per-item correct counts, either
/// per placement group or cohort-wide via a target difficulty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSpec {
    /// Students per placement label, in label-rank order.
    pub group_sizes: [usize; CLASS_COUNT],
    /// Exact correct counts per item and group; takes precedence over
    /// `per_item_difficulty` when both are present.
    pub per_item_group_correct: Option<Vec<[usize; CLASS_COUNT]>>,
    /// Target proportion-correct per item; realized as the nearest integer
    /// count over the whole cohort.
    pub per_item_difficulty: Option<Vec<f64>>,
}

impl MarginalSpec {
    /// Total cohort size.
    #[must_use]
    pub fn n(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    /// Number of items described by the spec.
    #[must_use]
    pub fn item_count(&self) -> usize {
        self.per_item_group_correct
            .as_ref()
            .map(Vec::len)
            .or_else(|| self.per_item_difficulty.as_ref().map(Vec::len))
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n() == 0 {
            return Err(Error::Domain("spec describes an empty cohort".into()));
        }
        let m = self.item_count();
        if m == 0 {
            return Err(Error::Domain(
                "spec needs per-item group counts or difficulties".into(),
            ));
        }
        if let Some(counts) = &self.per_item_group_correct {
            for (j, c) in counts.iter().enumerate() {
                for (g, (&cnt, &size)) in c.iter().zip(&self.group_sizes).enumerate() {
                    if cnt > size {
                        return Err(Error::Infeasible(format!(
                            "item {j}: correct count {cnt} exceeds group {g} size {size}"
                        )));
                    }
                }
            }
        }
        if let Some(ps) = &self.per_item_difficulty {
            for (j, &p) in ps.iter().enumerate() {
                if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                    return Err(Error::Domain(format!(
                        "item {j}: difficulty {p} outside [0, 1]"
                    )));
                }
            }
        }
        if let (Some(counts), Some(ps)) = (&self.per_item_group_correct, &self.per_item_difficulty)
        {
            if counts.len() != ps.len() {
                return Err(Error::LengthMismatch {
                    expected: counts.len(),
                    got: ps.len(),
                });
            }
            // When both are given they must describe the same marginals.
            let n = self.n() as f64;
            for (j, (c, &p)) in counts.iter().zip(ps).enumerate() {
                let total: usize = c.iter().sum();
                if ((total as f64) - p * n).abs() > 0.5 + 1e-9 {
                    return Err(Error::Domain(format!(
                        "item {j}: difficulty {p} disagrees with group counts summing to {total}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Single-item spec pinning a profile's anchor item.
#[must_use]
pub fn anchor_marginal_spec(profile: &CohortProfile) -> MarginalSpec {
    MarginalSpec {
        group_sizes: profile.group_sizes,
        per_item_group_correct: Some(vec![profile.anchor_group_correct]),
        per_item_difficulty: None,
    }
}

/// Draw `k` distinct values from `pool` by a seeded partial Fisher–Yates
/// shuffle. Deterministic in `(pool order, k, seed)`.
fn choose_k(pool: &[usize], k: usize, seed: u64) -> Vec<usize> {
    debug_assert!(k <= pool.len());
    let mut scratch: Vec<usize> = pool.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..k {
        let j = rng.random_range(i..scratch.len());
        scratch.swap(i, j);
    }
    scratch.truncate(k);
    scratch
}

fn id_for(index: usize, n: usize) -> String {
    let width = n.to_string().len();
    format!("s{:0width$}", index + 1)
}

/// Build a labeled cohort whose per-item correct counts equal the spec
/// exactly; only the within-group placement of correct answers depends on the
/// seed.
///
/// Students are laid out in group blocks (all first-group students, then the
/// second, then the third) and labeled by group membership. Item `j` in group
/// `g` draws its correct responders from the stream `(seed, j, g)`; a
/// difficulty-only item draws cohort-wide from `(seed, j, 3)`.
pub fn reconstruct_exact(spec: &MarginalSpec, seed: u64) -> Result<ResponseMatrix> {
    spec.validate()?;
    let n = spec.n();
    let m = spec.item_count();

    let mut group_ranges = Vec::with_capacity(CLASS_COUNT);
    let mut start = 0usize;
    for &size in &spec.group_sizes {
        group_ranges.push(start..start + size);
        start += size;
    }

    let mut responses = vec![vec![0u8; m]; n];
    for j in 0..m {
        if let Some(counts) = &spec.per_item_group_correct {
            for (g, range) in group_ranges.iter().enumerate() {
                let pool: Vec<usize> = range.clone().collect();
                for i in choose_k(&pool, counts[j][g], sub_seed2(seed, j as u64, g as u64)) {
                    responses[i][j] = 1;
                }
            }
        } else {
            let p = spec.per_item_difficulty.as_ref().expect("validated")[j];
            let target = (p * n as f64).round().min(n as f64) as usize;
            let pool: Vec<usize> = (0..n).collect();
            for i in choose_k(&pool, target, sub_seed2(seed, j as u64, CLASS_COUNT as u64)) {
                responses[i][j] = 1;
            }
        }
    }

    let mut students = Vec::with_capacity(n);
    for (g, range) in group_ranges.iter().enumerate() {
        let label = PlacementLabel::from_rank(g)?;
        for i in range.clone() {
            students.push(StudentRecord {
                id: id_for(i, n),
                responses: std::mem::take(&mut responses[i]),
                label: Some(label),
            });
        }
    }
    ResponseMatrix::new(students, m)
}

/// Two-parameter logistic item: P(correct | θ) = logistic(a·(θ − b)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPlItem {
    /// Discrimination slope, > 0.
    pub a: f64,
    /// Difficulty location in ability (logit) units.
    pub b: f64,
}

impl TwoPlItem {
    pub fn validate(&self) -> Result<()> {
        if !self.a.is_finite() || self.a <= 0.0 {
            return Err(Error::Domain(format!("2PL slope must be positive, got {}", self.a)));
        }
        if !self.b.is_finite() {
            return Err(Error::Domain("2PL location must be finite".into()));
        }
        Ok(())
    }

    /// Probability of a correct response at ability θ.
    #[must_use]
    pub fn prob(&self, theta: f64) -> f64 {
        logistic(self.a * (theta - self.b))
    }
}

/// Standard logistic function.
#[must_use]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gauss–Hermite nodes and weights (physicists' convention):
/// `∫ e^{-x²} f(x) dx ≈ Σ wᵢ f(xᵢ)`.
///
/// Newton iteration on the recurrence-evaluated Hermite polynomial, largest
/// root first, with symmetric reflection for the negative half.
pub fn gauss_hermite(n: usize) -> Result<Vec<(f64, f64)>> {
    if n == 0 {
        return Err(Error::Domain("quadrature order must be positive".into()));
    }
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^(−1/4)
    const EPS: f64 = 1e-14;
    let nf = n as f64;
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0f64;
        for _ in 0..200 {
            let mut p1 = PIM4;
            let mut p2 = 0.0f64;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= EPS {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    Ok(nodes.into_iter().zip(weights).collect())
}

/// Population proportion-correct of an item when θ ~ N(0, 1), computed by
/// Gauss–Hermite quadrature of the logistic–normal integral.
#[must_use]
pub fn marginal_difficulty(item: &TwoPlItem, quad: &[(f64, f64)]) -> f64 {
    let sum: f64 = quad
        .iter()
        .map(|&(x, w)| w * item.prob(std::f64::consts::SQRT_2 * x))
        .sum();
    sum / std::f64::consts::PI.sqrt()
}

/// Solve the location `b` so the marginal difficulty equals `p`, by bisection
/// (the marginal is strictly decreasing in `b`).
fn solve_location(a: f64, p: f64, quad: &[(f64, f64)]) -> Result<f64> {
    let (mut lo, mut hi) = B_BRACKET;
    let value = |b: f64| marginal_difficulty(&TwoPlItem { a, b }, quad) - p;
    if value(lo) < 0.0 || value(hi) > 0.0 {
        return Err(Error::Domain(format!(
            "target difficulty {p} not bracketed for slope {a}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if value(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Calibrate one 2PL item per target.
///
/// The slope is a documented monotone map of the discrimination target,
/// `a = SLOPE_FLOOR + SLOPE_SPAN · clamp(D, 0, 1)`, and the location is
/// solved so the θ-marginalized proportion-correct hits the (clamped)
/// difficulty target. One refinement pass then simulates a pilot cohort of
/// [`PILOT_N`] students, rescales each slope by
/// `clamp(target_D / max(observed_D, 0.05), 0.5, 2)`, and re-solves the
/// locations. Deterministic given `(targets, seed)`.
pub fn calibrate(targets: &[ItemTarget], seed: u64) -> Result<Vec<TwoPlItem>> {
    if targets.is_empty() {
        return Err(Error::Domain("no calibration targets".into()));
    }
    let (clamp_lo, clamp_hi) = DIFFICULTY_CLAMP;
    for (j, t) in targets.iter().enumerate() {
        if !t.difficulty.is_finite() || !(0.0..=1.0).contains(&t.difficulty) {
            return Err(Error::Domain(format!(
                "item {j}: difficulty target {} outside [0, 1]",
                t.difficulty
            )));
        }
        if !t.discrimination.is_finite() {
            return Err(Error::Domain(format!("item {j}: non-finite discrimination")));
        }
    }
    let quad = gauss_hermite(QUAD_POINTS)?;

    let solve_all = |slopes: &[f64]| -> std::result::Result<Vec<TwoPlItem>, Vec<usize>> {
        let mut items = Vec::with_capacity(targets.len());
        let mut failed = Vec::new();
        for (j, (&a, t)) in slopes.iter().zip(targets).enumerate() {
            let p = t.difficulty.clamp(clamp_lo, clamp_hi);
            match solve_location(a, p, &quad) {
                Ok(b) => items.push(TwoPlItem { a, b }),
                Err(_) => {
                    failed.push(j);
                    items.push(TwoPlItem { a, b: 0.0 });
                }
            }
        }
        if failed.is_empty() {
            Ok(items)
        } else {
            Err(failed)
        }
    };

    let initial_slopes: Vec<f64> = targets
        .iter()
        .map(|t| SLOPE_FLOOR + SLOPE_SPAN * t.discrimination.clamp(0.0, 1.0))
        .collect();
    let items = solve_all(&initial_slopes).map_err(Error::Calibration)?;

    // Refinement: compare observed discrimination on a pilot cohort against
    // the targets and rescale the slopes once.
    let pilot = simulate_2pl(&items, PILOT_N, sub_seed(seed, 0))?;
    let pilot_stats = ctt::analyze_items(&pilot)?;
    let refined_slopes: Vec<f64> = items
        .iter()
        .zip(targets)
        .zip(&pilot_stats)
        .map(|((item, t), stat)| {
            let observed = stat.discrimination.max(0.05);
            let factor = (t.discrimination.clamp(0.0, 1.0) / observed).clamp(0.5, 2.0);
            item.a * factor
        })
        .collect();
    solve_all(&refined_slopes).map_err(Error::Calibration)
}

/// Simulate a cohort and return it with the latent abilities.
///
/// Student `i` draws an ability θᵢ ~ N(0, 1) and then one uniform per item
/// from a single stream seeded by `(seed, 0)`; labels come from the placement
/// rule applied to each student's percent score.
pub fn simulate_with_abilities(
    items: &[TwoPlItem],
    n: usize,
    seed: u64,
) -> Result<(ResponseMatrix, Vec<f64>)> {
    if items.is_empty() {
        return Err(Error::Domain("simulation needs at least one item".into()));
    }
    if n == 0 {
        return Err(Error::InsufficientData("simulation needs n >= 1".into()));
    }
    for item in items {
        item.validate()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 0));
    let mut students = Vec::with_capacity(n);
    let mut thetas = Vec::with_capacity(n);
    for i in 0..n {
        let theta: f64 = rng.sample(StandardNormal);
        let responses: Vec<u8> = items
            .iter()
            .map(|item| u8::from(rng.random::<f64>() < item.prob(theta)))
            .collect();
        thetas.push(theta);
        students.push(StudentRecord {
            id: id_for(i, n),
            responses,
            label: None,
        });
    }
    let matrix = ResponseMatrix::new(students, items.len())?.with_labels_from_placement();
    Ok((matrix, thetas))
}

/// Simulate a Φ-labeled cohort from 2PL items.
pub fn simulate_2pl(items: &[TwoPlItem], n: usize, seed: u64) -> Result<ResponseMatrix> {
    simulate_with_abilities(items, n, seed).map(|(m, _)| m)
}

/// Simulate a cohort under per-group quotas: candidate students are drawn
/// from the calibrated model and kept only while their placement group still
/// has room. Candidate `c` uses the stream `(seed, 1, c)`; the anchor-item
/// overwrite for group `g` uses `(seed, 2, g)`.
///
/// After the quotas fill, the anchor column is rewritten so each group has
/// exactly the profile's anchor correct count (labels are kept as drawn).
pub fn reference_cohort_from(profile: &CohortProfile, seed: u64) -> Result<ResponseMatrix> {
    profile.validate()?;
    let items = calibrate(&profile.item_targets, sub_seed(seed, 0))?;
    let n = profile.n();

    let mut remaining = profile.group_sizes;
    let mut rows: Vec<(Vec<u8>, PlacementLabel)> = Vec::with_capacity(n);
    let mut draws: u64 = 0;
    while rows.len() < n {
        if draws == QUOTA_DRAW_CAP {
            return Err(Error::Infeasible(format!(
                "quota sampling used {QUOTA_DRAW_CAP} draws with open quotas {remaining:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed2(seed, 1, draws));
        draws += 1;
        let theta: f64 = rng.sample(StandardNormal);
        let responses: Vec<u8> = items
            .iter()
            .map(|item| u8::from(rng.random::<f64>() < item.prob(theta)))
            .collect();
        let label = placement(total_score(&responses).percent)?;
        let slot = &mut remaining[label.rank()];
        if *slot > 0 {
            *slot -= 1;
            rows.push((responses, label));
        }
    }

    let anchor = profile.anchor_item;
    for g in 0..CLASS_COUNT {
        let members: Vec<usize> = rows
            .iter()
            .enumerate()
            .filter(|(_, (_, label))| label.rank() == g)
            .map(|(i, _)| i)
            .collect();
        for &i in &members {
            rows[i].0[anchor] = 0;
        }
        for i in choose_k(
            &members,
            profile.anchor_group_correct[g],
            sub_seed2(seed, 2, g as u64),
        ) {
            rows[i].0[anchor] = 1;
        }
    }

    let students: Vec<StudentRecord> = rows
        .into_iter()
        .enumerate()
        .map(|(i, (responses, label))| StudentRecord {
            id: id_for(i, n),
            responses,
            label: Some(label),
        })
        .collect();
    ResponseMatrix::new(students, profile.item_targets.len())
}

/// The built-in reference cohort (see [`builtin_profile`]).
pub fn reference_cohort(seed: u64) -> Result<ResponseMatrix> {
    reference_cohort_from(&builtin_profile(), seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn q6_spec() -> MarginalSpec {
        anchor_marginal_spec(&builtin_profile())
    }

    #[test]
    fn gauss_hermite_integrates_low_moments_exactly() {
        let quad = gauss_hermite(QUAD_POINTS).unwrap();
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let m0: f64 = quad.iter().map(|&(_, w)| w).sum();
        let m2: f64 = quad.iter().map(|&(x, w)| w * x * x).sum();
        let m4: f64 = quad.iter().map(|&(x, w)| w * x.powi(4)).sum();
        assert_relative_eq!(m0, sqrt_pi, max_relative = 1e-12);
        assert_relative_eq!(m2, sqrt_pi / 2.0, max_relative = 1e-12);
        assert_relative_eq!(m4, 3.0 * sqrt_pi / 4.0, max_relative = 1e-12);
        // Normal moments under the change of variables θ = √2·x.
        let e_theta2: f64 =
            quad.iter().map(|&(x, w)| w * 2.0 * x * x).sum::<f64>() / sqrt_pi;
        let e_theta4: f64 =
            quad.iter().map(|&(x, w)| w * 4.0 * x.powi(4)).sum::<f64>() / sqrt_pi;
        assert_relative_eq!(e_theta2, 1.0, max_relative = 1e-12);
        assert_relative_eq!(e_theta4, 3.0, max_relative = 1e-12);
    }

    #[test]
    fn gauss_hermite_nodes_are_symmetric_and_sorted_roots() {
        let quad = gauss_hermite(21).unwrap();
        for i in 0..21 {
            assert_relative_eq!(quad[i].0, -quad[20 - i].0, epsilon = 1e-12);
            assert!(quad[i].1 > 0.0);
        }
    }

    #[test]
    fn marginal_difficulty_is_half_at_zero_location() {
        let quad = gauss_hermite(QUAD_POINTS).unwrap();
        for &a in &[0.3, 1.0, 2.5, 5.0] {
            let p = marginal_difficulty(&TwoPlItem { a, b: 0.0 }, &quad);
            assert_relative_eq!(p, 0.5, epsilon = 1e-10);
        }
    }

    #[test]
    fn location_solver_hits_targets_and_is_monotone() {
        let quad = gauss_hermite(QUAD_POINTS).unwrap();
        let mut last_b = f64::NEG_INFINITY;
        for &p in &[0.99, 0.9, 0.7, 0.5, 0.3, 0.1, 0.01] {
            let b = solve_location(2.0, p, &quad).unwrap();
            assert!(b > last_b, "location must fall as difficulty rises");
            last_b = b;
            let achieved = marginal_difficulty(&TwoPlItem { a: 2.0, b }, &quad);
            assert_relative_eq!(achieved, p, epsilon = 1e-9);
        }
    }

    #[test]
    fn easy_target_solves_to_strongly_negative_location() {
        let quad = gauss_hermite(QUAD_POINTS).unwrap();
        let b = solve_location(0.5 + 4.5 * 0.019, 0.934, &quad).unwrap();
        assert!(b < -1.5, "p = 0.934 needs b well below 0, got {b}");
    }

    #[test]
    fn calibration_reaches_every_builtin_marginal() {
        let profile = builtin_profile();
        let items = calibrate(&profile.item_targets, 42).unwrap();
        let quad = gauss_hermite(QUAD_POINTS).unwrap();
        let (lo, hi) = DIFFICULTY_CLAMP;
        for (item, target) in items.iter().zip(&profile.item_targets) {
            let p = marginal_difficulty(item, &quad);
            let want = target.difficulty.clamp(lo, hi);
            assert_relative_eq!(p, want, epsilon = 1e-9);
            assert!(item.a > 0.0);
        }
    }

    #[test]
    fn calibration_is_deterministic() {
        let profile = builtin_profile();
        let a = calibrate(&profile.item_targets, 7).unwrap();
        let b = calibrate(&profile.item_targets, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn calibrated_simulation_reproduces_targets_within_tolerance() {
        let profile = builtin_profile();
        let items = calibrate(&profile.item_targets, 42).unwrap();
        let cohort = simulate_2pl(&items, 1000, 42).unwrap();
        let (lo, hi) = DIFFICULTY_CLAMP;
        let mut worst = 0.0f64;
        for (j, target) in profile.item_targets.iter().enumerate() {
            let p = crate::ctt::difficulty(&cohort, j).unwrap();
            let want = target.difficulty.clamp(lo, hi);
            worst = worst.max((p - want).abs());
        }
        assert!(worst <= 0.05, "max |p̂ − p| = {worst}");
    }

    #[test]
    fn flat_slope_gives_coin_flip_items() {
        let items = vec![TwoPlItem { a: 1e-3, b: 0.0 }; 5];
        let cohort = simulate_2pl(&items, 2000, 11).unwrap();
        for j in 0..5 {
            let p = crate::ctt::difficulty(&cohort, j).unwrap();
            assert!((p - 0.5).abs() < 0.05, "item {j}: p = {p}");
        }
    }

    #[test]
    fn saturated_item_is_almost_always_correct() {
        let items = vec![TwoPlItem { a: 2.0, b: -4.0 }, TwoPlItem { a: 2.0, b: 0.0 }];
        let cohort = simulate_2pl(&items, 1000, 3).unwrap();
        let p = crate::ctt::difficulty(&cohort, 0).unwrap();
        assert!(p > 0.95, "b = -4 should saturate, got p = {p}");
    }

    fn ranks(v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut out = vec![0.0; n];
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &id in &idx[i..=j] {
                out[id] = avg;
            }
            i = j + 1;
        }
        out
    }

    #[test]
    fn ability_orders_total_scores() {
        let profile = builtin_profile();
        let items = calibrate(&profile.item_targets, 42).unwrap();
        let (cohort, thetas) = simulate_with_abilities(&items, 1000, 42).unwrap();
        let totals: Vec<f64> = cohort.totals().iter().map(|&t| f64::from(t)).collect();
        let rho = crate::featstats::pearson(&ranks(&thetas), &ranks(&totals)).unwrap();
        assert!(rho > 0.8, "Spearman(θ, total) = {rho}");
    }

    #[test]
    fn steeper_slope_raises_point_biserial() {
        let flat: Vec<TwoPlItem> = (0..6).map(|_| TwoPlItem { a: 1.2, b: 0.0 }).collect();
        let mut steep = flat.clone();
        steep[0].a = 4.0;
        let flat_cohort = simulate_2pl(&flat, 2000, 5).unwrap();
        let steep_cohort = simulate_2pl(&steep, 2000, 5).unwrap();
        let r_flat = crate::ctt::point_biserial(&flat_cohort, 0).unwrap().unwrap();
        let r_steep = crate::ctt::point_biserial(&steep_cohort, 0).unwrap().unwrap();
        assert!(
            r_steep > r_flat,
            "a = 4 item should correlate more with totals: {r_steep} vs {r_flat}"
        );
    }

    #[test]
    fn reconstruct_hits_group_counts_exactly_for_any_seed() {
        let spec = q6_spec();
        for seed in [0u64, 1, 42, 999] {
            let m = reconstruct_exact(&spec, seed).unwrap();
            assert_eq!(m.n(), 198);
            assert_eq!(m.class_counts(), [118, 59, 21]);
            let labels = m.labels().unwrap();
            let mut per_group = [0usize; 3];
            for (i, &x) in m.column(0).iter().enumerate() {
                per_group[labels[i].rank()] += usize::from(x);
            }
            assert_eq!(per_group, [1, 59, 21]);
            assert_relative_eq!(
                crate::ctt::difficulty(&m, 0).unwrap(),
                81.0 / 198.0,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn reconstruct_is_deterministic_per_seed() {
        let spec = q6_spec();
        let a = reconstruct_exact(&spec, 4).unwrap();
        let b = reconstruct_exact(&spec, 4).unwrap();
        let c = reconstruct_exact(&spec, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c, "different seeds should move the 1s around");
        assert_eq!(c.class_counts(), [118, 59, 21]);
    }

    #[test]
    fn reconstruct_all_correct_spec_gives_all_ones() {
        let spec = MarginalSpec {
            group_sizes: [3, 2, 1],
            per_item_group_correct: Some(vec![[3, 2, 1], [3, 2, 1]]),
            per_item_difficulty: None,
        };
        let m = reconstruct_exact(&spec, 0).unwrap();
        for s in m.students() {
            assert!(s.responses.iter().all(|&x| x == 1));
        }
    }

    #[test]
    fn reconstruct_difficulty_only_rounds_to_nearest_count() {
        let spec = MarginalSpec {
            group_sizes: [6, 3, 1],
            per_item_group_correct: None,
            per_item_difficulty: Some(vec![0.5, 0.26, 1.0, 0.0]),
        };
        let m = reconstruct_exact(&spec, 9).unwrap();
        let totals: Vec<u32> = (0..4)
            .map(|j| m.column(j).iter().map(|&x| u32::from(x)).sum())
            .collect();
        assert_eq!(totals, vec![5, 3, 10, 0]);
    }

    #[test]
    fn reconstruct_rejects_inconsistent_specs() {
        let overfull = MarginalSpec {
            group_sizes: [2, 2, 2],
            per_item_group_correct: Some(vec![[3, 0, 0]]),
            per_item_difficulty: None,
        };
        assert!(matches!(
            reconstruct_exact(&overfull, 0),
            Err(Error::Infeasible(_))
        ));
        let disagreeing = MarginalSpec {
            group_sizes: [2, 2, 2],
            per_item_group_correct: Some(vec![[1, 1, 1]]),
            per_item_difficulty: Some(vec![0.9]),
        };
        assert!(reconstruct_exact(&disagreeing, 0).is_err());
        let empty = MarginalSpec {
            group_sizes: [1, 1, 1],
            per_item_group_correct: None,
            per_item_difficulty: None,
        };
        assert!(reconstruct_exact(&empty, 0).is_err());
    }

    #[test]
    fn reference_cohort_honours_quotas_and_anchor() {
        let cohort = reference_cohort(42).unwrap();
        assert_eq!(cohort.n(), 198);
        assert_eq!(cohort.item_count(), 40);
        assert_eq!(cohort.class_counts(), [118, 59, 21]);
        let labels = cohort.labels().unwrap();
        let mut per_group = [0usize; 3];
        for (i, &x) in cohort.column(5).iter().enumerate() {
            per_group[labels[i].rank()] += usize::from(x);
        }
        assert_eq!(per_group, [1, 59, 21]);
    }

    #[test]
    fn reference_cohort_is_deterministic() {
        let a = reference_cohort(7).unwrap();
        let b = reference_cohort(7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn profile_validation_catches_bad_anchor() {
        let mut p = builtin_profile();
        p.anchor_item = 40;
        assert!(p.validate().is_err());
        let mut p2 = builtin_profile();
        p2.anchor_group_correct = [119, 59, 21];
        assert!(matches!(p2.validate(), Err(Error::Infeasible(_))));
    }
}
