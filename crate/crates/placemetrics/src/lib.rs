//! Item analysis, random-forest feature importance, and competency clustering
//! for placement exams.
//!
//! The crate analyzes binary response matrices (students × items, each cell a
//! 0/1 answer) labeled with one of three placement outcomes, and provides:
//!
//! - **Classical test theory** ([`ctt`]): difficulty, upper-minus-lower
//!   discrimination with 27% extreme groups, point-biserial correlations, and
//!   Ebel quality bands.
//! - **Feature statistics** ([`featstats`]): one-way ANOVA F tests with
//!   log-domain p-values, plug-in mutual information, and a method-agreement
//!   correlation matrix.
//! - **Random forests** ([`forest`]): a from-scratch, seed-deterministic CART
//!   forest for binary features with MDI and permutation importances,
//!   stratified k-fold cross-validation, and JSON model persistence.
//! - **Competency clustering** ([`cluster`]): seeded k-means with a
//!   silhouette / elbow / gap-statistic / bootstrap-ARI validation stack and
//!   score-band profiles.
//! - **Synthetic cohorts** ([`synth`]): an exact marginal reconstructor and a
//!   calibrated 2PL simulator for reproducible benchmark data.
//! - **CSV / report plumbing** ([`io`], [`report`]): a strict CSV schema and
//!   byte-deterministic JSON reports.
//!
//! Determinism is a crate-wide contract: every stochastic routine takes an
//! explicit `u64` seed, derives private sub-streams via [`seeding`], and
//! produces identical results at any thread count.

pub mod cluster;
pub mod ctt;
pub mod error;
pub mod featstats;
pub mod forest;
pub mod io;
pub mod model;
pub mod report;
pub mod seeding;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    describe, placement, total_score, PlacementLabel, ResponseMatrix, ScoreSummary, StudentRecord,
    TotalScore, CLASS_COUNT,
};
