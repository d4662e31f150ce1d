//! End-to-end analysis: the three fits, resampling, augmentation.

use crate::analysis::AnalysisSpec;
use crate::augment::{augment, AugmentedEstimate};
use crate::error::Result;
use crate::resample::{estimate_cov, CovEstimate, JointStatistic, Problem};
use crate::study::StudyData;

#[derive(Debug, Clone)]
pub struct Analysis {
    pub beta_labels: Vec<String>,
    pub gamma_labels: Vec<String>,
    pub gamma_to_beta: Vec<usize>,
    pub n_full: usize,
    pub n_val: usize,
    pub statistic: JointStatistic,
    pub cov: CovEstimate,
    pub estimate: AugmentedEstimate,
}

/// Runs the analysis described by `spec`, using its resample plan and alpha.
pub fn analyze(data: &StudyData, spec: &AnalysisSpec) -> Result<Analysis> {
    let problem = Problem::new(data, spec)?;
    let statistic = problem.joint_statistic()?;
    let cov = estimate_cov(&problem, &statistic, &spec.resample)?;
    let estimate = augment(&statistic, &cov.blocks, spec.alpha)?;
    Ok(Analysis {
        beta_labels: problem.beta_labels().to_vec(),
        gamma_labels: problem.gamma_labels().to_vec(),
        gamma_to_beta: problem.gamma_to_beta().to_vec(),
        n_full: problem.n_full(),
        n_val: problem.n_val(),
        statistic,
        cov,
        estimate,
    })
}
