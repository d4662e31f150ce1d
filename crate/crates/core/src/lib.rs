//! Augmented regression estimates for studies with an internal validation
//! subsample.
//!
//! Reference variables (measured without error) are observed on a simple
//! random validation subsample; surrogate variables on the full sample. Three
//! regressions are fit: reference variables on the subsample (β_val),
//! surrogates on the subsample (γ_val) and surrogates on the full sample
//! (γ_ful). A resampling estimate of the joint covariance of
//! `(β_val, γ_val − γ_ful)` then yields the augmented estimate
//! `β_aug = β_val − Ω K⁻¹ (γ_val − γ_ful)` with variance `Σ − Ω K⁻¹ Ωᵀ`.
//!
//! Linear, logistic and Cox models are supported, with any number of
//! surrogates per reference variable, clustered observations and
//! inverse-probability sampling weights.

pub mod analysis;
pub mod augment;
pub mod error;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod resample;
pub mod rng;
pub mod simulate;
pub mod study;

pub use analysis::AnalysisSpec;
pub use augment::{augment, wald_table, AugmentedEstimate, WaldRow};
pub use error::{Error, Result};
pub use resample::{CovBlocks, JointStatistic, ResamplePlan};
pub use study::StudyData;
