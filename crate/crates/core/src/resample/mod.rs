//! Resampling estimates of the joint covariance of `(β_val, γ_val − γ_ful)`.
//!
//! Both estimators work by reweighting one prepared [`Problem`]: a
//! jackknife leave-out sets the weights of the dropped rows to zero, a
//! bootstrap replicate sets each row's weight to its draw count. Replicates
//! are evaluated in parallel and reduced in replicate order, so results do
//! not depend on the number of worker threads.

mod bootstrap;
mod jackknife;
mod statistic;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisSpec;
use crate::error::Result;
use crate::study::StudyData;

pub use bootstrap::{bootstrap_cov, bootstrap_from_problem, bootstrap_multiplicities};
pub use jackknife::{jackknife_cov, jackknife_from_groups, jackknife_groups};
pub use statistic::{compute_joint_statistic, JointStatistic, Problem};

/// Default number of jackknife groups once the sample has more units than
/// [`DELETE_ONE_LIMIT`].
pub const DEFAULT_GROUPS: usize = 500;
pub const DELETE_ONE_LIMIT: usize = 2000;
pub const MIN_BOOTSTRAP_REPLICATES: usize = 50;
/// Largest share of bootstrap replicates that may fail before the estimate
/// is rejected.
pub const MAX_DROPPED_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum ResamplePlan {
    Jackknife {
        #[serde(default)]
        groups: GroupCount,
        #[serde(default)]
        assignment: GroupAssignment,
    },
    Bootstrap {
        replicates: usize,
        #[serde(default)]
        seed: u64,
    },
}

impl Default for ResamplePlan {
    fn default() -> Self {
        ResamplePlan::Jackknife {
            groups: GroupCount::Auto,
            assignment: GroupAssignment::RoundRobin,
        }
    }
}

impl ResamplePlan {
    pub fn jackknife(groups: GroupCount) -> Self {
        ResamplePlan::Jackknife {
            groups,
            assignment: GroupAssignment::RoundRobin,
        }
    }

    pub fn bootstrap(replicates: usize, seed: u64) -> Self {
        ResamplePlan::Bootstrap { replicates, seed }
    }

    /// Number of refits of each model the plan implies for `n_units` units.
    pub fn refits(&self, n_units: usize) -> usize {
        match self {
            ResamplePlan::Jackknife { groups, .. } => groups.resolve(n_units),
            ResamplePlan::Bootstrap { replicates, .. } => *replicates,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupCount {
    /// Delete-one up to [`DELETE_ONE_LIMIT`] units, else [`DEFAULT_GROUPS`].
    #[default]
    Auto,
    PerElement,
    Fixed(usize),
}

impl GroupCount {
    /// Group count for `n_units` sampling units (rows, or clusters).
    pub fn resolve(self, n_units: usize) -> usize {
        match self {
            GroupCount::Auto if n_units <= DELETE_ONE_LIMIT => n_units,
            GroupCount::Auto => DEFAULT_GROUPS,
            GroupCount::PerElement => n_units,
            GroupCount::Fixed(g) => g.min(n_units),
        }
    }
}

/// How units are dealt into jackknife groups. Either way validated and
/// non-validated units are dealt separately, so every group keeps roughly the
/// overall validation fraction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupAssignment {
    /// Units in order of first appearance.
    #[default]
    RoundRobin,
    /// Units shuffled within each stratum first.
    Shuffled { seed: u64 },
}

/// Covariance blocks for `(β_val − β, γ_val − γ_ful)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovBlocks {
    /// p×p
    pub sigma: DMatrix<f64>,
    /// p×q
    pub omega: DMatrix<f64>,
    /// q×q
    pub k: DMatrix<f64>,
    /// q×q covariance of γ_ful from the same resampling pass, when available.
    pub gamma_ful: Option<DMatrix<f64>>,
}

impl CovBlocks {
    pub fn new(sigma: DMatrix<f64>, omega: DMatrix<f64>, k: DMatrix<f64>) -> Self {
        Self {
            sigma,
            omega,
            k,
            gamma_ful: None,
        }
    }

    /// `[[Σ, Ω], [Ωᵀ, K]]`
    pub fn stacked(&self) -> DMatrix<f64> {
        let (p, q) = (self.sigma.nrows(), self.k.nrows());
        let mut m = DMatrix::zeros(p + q, p + q);
        m.view_mut((0, 0), (p, p)).copy_from(&self.sigma);
        m.view_mut((0, p), (p, q)).copy_from(&self.omega);
        m.view_mut((p, 0), (q, p)).copy_from(&self.omega.transpose());
        m.view_mut((p, p), (q, q)).copy_from(&self.k);
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Jackknife,
    Bootstrap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovEstimate {
    pub blocks: CovBlocks,
    pub method: MethodKind,
    /// Groups (jackknife) or successful replicates (bootstrap).
    pub replicates: usize,
    /// Bootstrap replicates whose fits failed.
    pub dropped: usize,
}

/// Resampling covariance under `plan` for a prepared problem whose full-data
/// statistic is `full`.
pub fn estimate_cov(
    problem: &Problem,
    full: &JointStatistic,
    plan: &ResamplePlan,
) -> Result<CovEstimate> {
    match plan {
        ResamplePlan::Jackknife { groups, assignment } => {
            let groups = jackknife_groups(problem, *groups, *assignment)?;
            jackknife_from_groups(problem, full, &groups)
        }
        ResamplePlan::Bootstrap { replicates, seed } => {
            bootstrap_from_problem(problem, full, *replicates, *seed)
        }
    }
}

/// Statistic plus resampling covariance for `data` under `spec` and `plan`.
pub fn resample(
    data: &StudyData,
    spec: &AnalysisSpec,
    plan: &ResamplePlan,
) -> Result<(Problem, JointStatistic, CovEstimate)> {
    let problem = Problem::new(data, spec)?;
    let full = problem.joint_statistic()?;
    let cov = estimate_cov(&problem, &full, plan)?;
    Ok((problem, full, cov))
}

/// `scale · Σᵢ (sᵢ − s̄)(sᵢ − s̄)ᵀ` over stacked statistics
/// `[β_val, γ_diff, γ_ful]`, split into blocks. Sums run in replicate order.
pub(crate) fn blocks_from_replicates(stats: &[Vec<f64>], p: usize, q: usize, scale: f64) -> CovBlocks {
    let d = p + 2 * q;
    let n = stats.len() as f64;
    let mut mean = vec![0.0; d];
    for s in stats {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let mut acc = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for s in stats {
        for j in 0..d {
            centered[j] = s[j] - mean[j];
        }
        for a in 0..d {
            let ca = centered[a];
            for b in a..d {
                acc[a * d + b] += ca * centered[b];
            }
        }
    }
    let full = DMatrix::from_fn(d, d, |a, b| {
        let v = if a <= b { acc[a * d + b] } else { acc[b * d + a] };
        scale * v
    });
    CovBlocks {
        sigma: full.view((0, 0), (p, p)).into_owned(),
        omega: full.view((0, p), (p, q)).into_owned(),
        k: full.view((p, p), (q, q)).into_owned(),
        gamma_ful: Some(full.view((p + q, p + q), (q, q)).into_owned()),
    }
}
