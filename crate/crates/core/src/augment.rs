//! The augmented estimator and its Wald inference.
//!
//! Conditional on the observed surrogate shift `γ_val − γ_ful`, the
//! validation estimate is corrected by its regression on that shift:
//!
//! ```text
//! β_aug = β_val − Ω K⁻¹ (γ_val − γ_ful)
//! Var(β_aug) = Σ − Ω K⁻¹ Ωᵀ
//! ```

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::resample::{CovBlocks, JointStatistic};

/// Relative eigenvalue threshold below which K is treated as singular and
/// inverted by truncated eigendecomposition.
pub const PINV_TOLERANCE: f64 = 1e-10;
/// Relative tolerance for negative eigenvalues of the augmented variance
/// before they are clipped.
pub const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldRow {
    pub estimate: f64,
    pub se: f64,
    pub lcl: f64,
    pub ucl: f64,
    pub z: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentDiagnostics {
    /// Largest over smallest eigenvalue of K (infinite when singular).
    pub k_condition: f64,
    /// K was near-singular and inverted by truncated eigendecomposition.
    pub pseudo_inverse: bool,
    /// The augmented variance had negative eigenvalues that were clipped.
    pub psd_repair: bool,
    /// K was exactly zero; the estimate falls back to β_val.
    pub no_augmentation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedEstimate {
    pub beta_aug: Vec<f64>,
    pub var_aug: DMatrix<f64>,
    pub aug: Vec<WaldRow>,
    pub val: Vec<WaldRow>,
    pub ful: Vec<WaldRow>,
    pub diagnostics: AugmentDiagnostics,
}

impl AugmentedEstimate {
    pub fn se(&self) -> Vec<f64> {
        self.aug.iter().map(|r| r.se).collect()
    }
}

/// Combines a joint statistic with its covariance blocks.
///
/// γ_ful standard errors come from the directly resampled γ_ful block when
/// `cov.gamma_ful` is present, otherwise from K.
pub fn augment(js: &JointStatistic, cov: &CovBlocks, alpha: f64) -> Result<AugmentedEstimate> {
    let (p, q) = (js.p(), js.q());
    let dims_ok = cov.sigma.shape() == (p, p)
        && cov.omega.shape() == (p, q)
        && cov.k.shape() == (q, q)
        && js.gamma_diff.len() == q
        && cov.gamma_ful.as_ref().is_none_or(|g| g.shape() == (q, q));
    if !dims_ok {
        return Err(Error::DimensionMismatch(format!(
            "p = {p}, q = {q}; Σ {:?}, Ω {:?}, K {:?}",
            cov.sigma.shape(),
            cov.omega.shape(),
            cov.k.shape()
        )));
    }
    let all_finite = cov.sigma.iter().chain(cov.omega.iter()).chain(cov.k.iter()).all(|v| v.is_finite())
        && js.beta_val.iter().chain(&js.gamma_diff).all(|v| v.is_finite());
    if !all_finite {
        return Err(Error::NonFinite("statistic or covariance blocks".into()));
    }

    let mut diagnostics = AugmentDiagnostics::default();
    let (beta_aug, var_aug) = if cov.k.iter().all(|&v| v == 0.0) {
        diagnostics.no_augmentation = true;
        diagnostics.k_condition = f64::INFINITY;
        (js.beta_val.clone(), cov.sigma.clone())
    } else {
        let k = symmetrize(&cov.k);
        let eig = SymmetricEigen::new(k.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        diagnostics.k_condition = if min > 0.0 { max / min } else { f64::INFINITY };

        let omega_t = cov.omega.transpose();
        let diff = DVector::from_column_slice(&js.gamma_diff);
        let chol = (min > PINV_TOLERANCE * max)
            .then(|| nalgebra::Cholesky::new(k.clone()))
            .flatten();
        let (x, y) = match chol {
            Some(c) => (c.solve(&diff), c.solve(&omega_t)),
            None => {
                diagnostics.pseudo_inverse = true;
                let inv = pseudo_inverse(&eig, PINV_TOLERANCE);
                (&inv * &diff, &inv * &omega_t)
            }
        };
        let correction = &cov.omega * x;
        let beta_aug = js
            .beta_val
            .iter()
            .zip(correction.iter())
            .map(|(b, c)| b - c)
            .collect();
        let var = symmetrize(&(&cov.sigma - &cov.omega * y));
        (beta_aug, var)
    };

    let var_aug = if let Some(repaired) = clip_negative(&var_aug) {
        diagnostics.psd_repair = true;
        repaired
    } else {
        var_aug
    };

    let aug = wald_table(&beta_aug, &var_aug, alpha)?;
    let val = wald_table(&js.beta_val, &cov.sigma, alpha)?;
    let ful_cov = cov.gamma_ful.as_ref().unwrap_or(&cov.k);
    let ful = wald_table(&js.gamma_ful, ful_cov, alpha)?;
    Ok(AugmentedEstimate {
        beta_aug,
        var_aug,
        aug,
        val,
        ful,
        diagnostics,
    })
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn pseudo_inverse(eig: &SymmetricEigen<f64, nalgebra::Dyn>, rel_tol: f64) -> DMatrix<f64> {
    let max = eig.eigenvalues.max();
    let inv = eig
        .eigenvalues
        .map(|l| if l > rel_tol * max { 1.0 / l } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// Re-forms `m` with negative eigenvalues set to zero when any falls below
/// `−PSD_TOLERANCE × max|λ|`; `None` if no repair is needed.
fn clip_negative(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let scale = eig.eigenvalues.amax();
    if eig.eigenvalues.min() >= -PSD_TOLERANCE * scale {
        return None;
    }
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    Some(symmetrize(
        &(&eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose()),
    ))
}

/// Per-coefficient Wald rows at level `1 − alpha` with normal quantiles.
pub fn wald_table(estimate: &[f64], cov: &DMatrix<f64>, alpha: f64) -> Result<Vec<WaldRow>> {
    if cov.shape() != (estimate.len(), estimate.len()) {
        return Err(Error::DimensionMismatch(format!(
            "{} estimates with a {:?} covariance",
            estimate.len(),
            cov.shape()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidSpec(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let crit = normal_quantile(1.0 - alpha / 2.0);
    estimate
        .iter()
        .enumerate()
        .map(|(j, &est)| {
            let var = cov[(j, j)];
            if !(est.is_finite() && var.is_finite()) {
                return Err(Error::NonFinite(format!("coefficient {j}")));
            }
            // rounding can leave a zero variance a hair below zero
            let se = var.max(0.0).sqrt();
            if var < 0.0 && var < -1e-12 * est.abs().max(1.0) {
                return Err(Error::NonFinite(format!("negative variance for coefficient {j}")));
            }
            if se == 0.0 {
                return Err(Error::DegenerateSe { row: j });
            }
            let z = est / se;
            Ok(WaldRow {
                estimate: est,
                se,
                lcl: est - crit * se,
                ucl: est + crit * se,
                z,
                p: two_sided_p(z),
            })
        })
        .collect()
}

pub fn normal_quantile(prob: f64) -> f64 {
    Normal::standard().inverse_cdf(prob)
}

/// `2 · (1 − Φ(|z|))`, computed through `erfc` to keep precision in the tail.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_case(sigma: f64, omega: f64, k: f64, beta: f64, diff: f64) -> AugmentedEstimate {
        let js = JointStatistic {
            beta_val: vec![beta],
            gamma_val: vec![diff],
            gamma_ful: vec![0.0],
            gamma_diff: vec![diff],
        };
        let mut cov = CovBlocks::new(
            DMatrix::from_element(1, 1, sigma),
            DMatrix::from_element(1, 1, omega),
            DMatrix::from_element(1, 1, k),
        );
        cov.gamma_ful = Some(DMatrix::from_element(1, 1, 1.0));
        augment(&js, &cov, 0.05).unwrap()
    }

    #[test]
    fn hand_arithmetic() {
        let est = scalar_case(4.0, 2.0, 4.0, 1.0, 1.0);
        assert_eq!(est.beta_aug, vec![0.5]);
        assert_eq!(est.var_aug[(0, 0)], 3.0);
        assert!(!est.diagnostics.pseudo_inverse);
    }

    #[test]
    fn zero_difference_keeps_beta_val() {
        let est = scalar_case(4.0, 2.0, 4.0, 1.3, 0.0);
        assert_eq!(est.beta_aug, vec![1.3]);
        assert_eq!(est.var_aug[(0, 0)], 3.0);
    }

    #[test]
    fn uncorrelated_surrogate_changes_nothing() {
        let est = scalar_case(4.0, 0.0, 4.0, 1.3, 0.7);
        assert_eq!(est.beta_aug, vec![1.3]);
        assert_eq!(est.var_aug[(0, 0)], 4.0);
    }

    #[test]
    fn zero_k_means_no_augmentation() {
        let est = scalar_case(4.0, 0.0, 0.0, 1.3, 0.0);
        assert!(est.diagnostics.no_augmentation);
        assert_eq!(est.beta_aug, vec![1.3]);
        assert_eq!(est.var_aug[(0, 0)], 4.0);
    }

    #[test]
    fn singular_k_uses_pseudo_inverse() {
        // duplicated surrogate: K has rank one
        let js = JointStatistic {
            beta_val: vec![1.0],
            gamma_val: vec![1.0, 1.0],
            gamma_ful: vec![0.0, 0.0],
            gamma_diff: vec![1.0, 1.0],
        };
        let cov = CovBlocks::new(
            DMatrix::from_element(1, 1, 4.0),
            DMatrix::from_row_slice(1, 2, &[2.0, 2.0]),
            DMatrix::from_element(2, 2, 4.0),
        );
        let est = augment(&js, &cov, 0.05).unwrap();
        assert!(est.diagnostics.pseudo_inverse);
        assert!((est.beta_aug[0] - 0.5).abs() < 1e-12);
        assert!((est.var_aug[(0, 0)] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn negative_variance_is_clipped_and_flagged() {
        // Ω too large for Σ: the stacked matrix is not PSD
        let js = JointStatistic::new(vec![1.0, 1.0], vec![0.0], vec![0.0]);
        let cov = CovBlocks::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]),
            DMatrix::from_row_slice(2, 1, &[0.5, -0.5]),
            DMatrix::from_element(1, 1, 0.1),
        );
        let est = augment(&js, &cov, 0.05).unwrap();
        assert!(est.diagnostics.psd_repair);
        let eig = SymmetricEigen::new(est.var_aug.clone());
        assert!(eig.eigenvalues.min() > -1e-12);
        assert!((est.var_aug[(0, 0)] - 0.95).abs() < 1e-12);
        assert!((est.var_aug[(0, 1)] - 0.95).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let js = JointStatistic::new(vec![1.0], vec![1.0], vec![0.0]);
        let cov = CovBlocks::new(
            DMatrix::from_element(2, 2, 1.0),
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 1.0),
        );
        assert!(matches!(augment(&js, &cov, 0.05), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn wald_standard_normal() {
        let rows = wald_table(&[0.0], &DMatrix::from_element(1, 1, 1.0), 0.05).unwrap();
        assert!((rows[0].lcl + 1.959_963_985).abs() < 1e-8);
        assert!((rows[0].ucl - 1.959_963_985).abs() < 1e-8);
        assert_eq!(rows[0].p, 1.0);
    }

    #[test]
    fn wald_zero_se() {
        let err = wald_table(&[0.3], &DMatrix::from_element(1, 1, 0.0), 0.05).unwrap_err();
        assert!(matches!(err, Error::DegenerateSe { row: 0 }));
    }

    #[test]
    fn wald_matches_published_row() {
        // chf.ref row of an augmented-estimate table: 0.633 (se 0.161)
        let rows = wald_table(&[0.633], &DMatrix::from_element(1, 1, 0.161 * 0.161), 0.05).unwrap();
        assert!((rows[0].z - 3.93).abs() < 0.005);
        assert!((rows[0].p - 8.6e-5).abs() < 0.3e-5);
        assert!((rows[0].lcl - 0.317).abs() < 0.001);
        assert!((rows[0].ucl - 0.949).abs() < 0.001);
        // the published z and p are mutually consistent
        assert!((two_sided_p(3.925) - 8.66e-5).abs() < 0.02e-5);
    }
}
