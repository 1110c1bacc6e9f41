//! Deterministic seed derivation.
//!
//! Every stochastic routine in the crate owns a *master* seed and derives one
//! independent sub-seed per unit of work (tree, fold, restart, bootstrap
//! iteration, item, ...) through [`sub_seed`]. Because the sub-seed depends
//! only on `(master, counter)` — never on execution order — results are
//! bit-identical regardless of how the work units are scheduled across
//! threads.
//!
//! The derivation is the SplitMix64 output function applied to
//! `master + (counter + 1) * GAMMA`, the same construction SplitMix64 itself
//! uses to split streams. It is statistically strong for this purpose and
//! trivially portable.

/// Weyl-sequence increment used by SplitMix64.
const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Derive the `counter`-th sub-seed of `master`.
///
/// Distinct counters yield statistically independent seeds; the same
/// `(master, counter)` pair always yields the same value.
#[must_use]
pub fn sub_seed(master: u64, counter: u64) -> u64 {
    let mut z = master.wrapping_add(counter.wrapping_add(1).wrapping_mul(GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Two-level derivation for nested work units (e.g. repeat `r` of item `j`).
#[must_use]
pub fn sub_seed2(master: u64, outer: u64, inner: u64) -> u64 {
    sub_seed(sub_seed(master, outer), inner)
}
