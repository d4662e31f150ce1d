//! Regression fitters for the three supported families.
//!
//! Every fitter takes a [`DesignMatrix`], a response and non-negative
//! [`CaseWeights`], and returns a [`RegressionFit`]. Rows with zero weight are
//! skipped entirely, so a zero-weight row is equivalent to deleting it. The
//! resampling code relies on that to express leave-out and bootstrap fits as
//! reweightings of one fixed design.

mod cox;
mod design;
mod linear;
mod logistic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cox::{fit_cox, CoxData};
pub use design::{CaseWeights, DesignMatrix, Response};
pub use linear::fit_linear;
pub use logistic::{fit_logistic, logistic_score};

/// Linear predictor magnitude beyond which the likelihood is flat to machine
/// precision and separation (or a monotone partial likelihood) is suspected.
pub const LINEAR_PREDICTOR_GUARD: f64 = 30.0;

/// Smallest/largest eigenvalue ratio of the weighted Gram matrix below which a
/// design is treated as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Linear,
    Logistic,
    Cox,
}

impl Family {
    /// Linear and logistic models carry an intercept column; Cox models absorb
    /// it into the baseline hazard.
    pub fn has_intercept(self) -> bool {
        !matches!(self, Family::Cox)
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Linear => "linear",
            Family::Logistic => "logistic",
            Family::Cox => "cox",
        })
    }
}

/// Ties handling for the Cox partial likelihood.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ties {
    #[default]
    Efron,
    Breslow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Convergence tolerance on the max-norm of the Newton step.
    pub tol: f64,
    pub max_iter: usize,
    pub ties: Ties,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50,
            ties: Ties::Efron,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Log-likelihood for logistic, partial log-likelihood for Cox, residual
    /// sum of squares for linear fits.
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NonConvergence {
    IterationLimit,
    /// The partial likelihood keeps increasing as a coefficient diverges.
    MonotoneLikelihood { coefficient: usize },
}

impl std::fmt::Display for NonConvergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NonConvergence::IterationLimit => f.write_str("iteration limit reached"),
            NonConvergence::MonotoneLikelihood { coefficient } => write!(
                f,
                "monotone likelihood, coefficient {coefficient} diverges"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("{rows} usable rows for {cols} columns")]
    TooFewRows { rows: usize, cols: usize },
    #[error("non-finite design value at row {row}, column {col}")]
    NonFiniteDesign { row: usize, col: usize },
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("invalid case weights: {0}")]
    InvalidWeights(String),
    #[error("length mismatch: design has {rows} rows, {what} has {len}")]
    LengthMismatch {
        rows: usize,
        what: &'static str,
        len: usize,
    },
    #[error("start vector has length {got}, expected {expected}")]
    BadStart { got: usize, expected: usize },
    #[error("design is rank deficient (eigenvalue ratio {ratio:.3e})")]
    RankDeficient { ratio: f64 },
    #[error("outcome has a single class")]
    Degenerate,
    #[error("separation detected: linear predictor exceeds {LINEAR_PREDICTOR_GUARD}")]
    Separation,
    #[error("no events")]
    NoEvents,
    #[error("not converged after {iterations} iterations: {reason}")]
    NotConverged {
        iterations: usize,
        reason: NonConvergence,
    },
}

/// Fits `family` to `(x, response)` with case weights, optionally warm-started.
pub fn fit(
    family: Family,
    x: &DesignMatrix,
    response: &Response,
    w: &CaseWeights,
    opts: &FitOptions,
    start: Option<&[f64]>,
) -> Result<RegressionFit, FitError> {
    match (family, response) {
        (Family::Linear, Response::Continuous(y)) => fit_linear(x, y, w),
        (Family::Logistic, Response::Binary(y)) => fit_logistic(x, y, w, opts, start),
        (Family::Cox, Response::Survival { time, event }) => {
            let data = CoxData::new(x.clone(), time.clone(), event.clone())?;
            data.fit(w, opts, start)
        }
        (family, _) => Err(FitError::InvalidResponse(format!(
            "response kind does not match the {family} family"
        ))),
    }
}

/// A design and response bundled for repeated reweighted fits.
///
/// Cox data is pre-sorted by time once; the other families fit directly.
#[derive(Debug, Clone)]
pub enum ModelData {
    Linear { x: DesignMatrix, y: Vec<f64> },
    Logistic { x: DesignMatrix, y: Vec<f64> },
    Cox(CoxData),
}

impl ModelData {
    pub fn new(family: Family, x: DesignMatrix, response: Response) -> Result<Self, FitError> {
        match (family, response) {
            (Family::Linear, Response::Continuous(y)) => Ok(ModelData::Linear { x, y }),
            (Family::Logistic, Response::Binary(y)) => Ok(ModelData::Logistic { x, y }),
            (Family::Cox, Response::Survival { time, event }) => {
                Ok(ModelData::Cox(CoxData::new(x, time, event)?))
            }
            (family, _) => Err(FitError::InvalidResponse(format!(
                "response kind does not match the {family} family"
            ))),
        }
    }

    pub fn rows(&self) -> usize {
        self.design().rows()
    }

    pub fn design(&self) -> &DesignMatrix {
        match self {
            ModelData::Linear { x, .. } | ModelData::Logistic { x, .. } => x,
            ModelData::Cox(d) => d.design(),
        }
    }

    pub fn fit(
        &self,
        w: &CaseWeights,
        opts: &FitOptions,
        start: Option<&[f64]>,
    ) -> Result<RegressionFit, FitError> {
        match self {
            ModelData::Linear { x, y } => fit_linear(x, y, w),
            ModelData::Logistic { x, y } => fit_logistic(x, y, w, opts, start),
            ModelData::Cox(d) => d.fit(w, opts, start),
        }
    }
}

/// Weighted Gram matrix `Σ wᵢ xᵢ xᵢᵀ` (upper triangle mirrored), row-major p×p.
pub(crate) fn weighted_gram(x: &DesignMatrix, w: &[f64]) -> Vec<f64> {
    let p = x.cols();
    let mut g = vec![0.0; p * p];
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        let row = x.row(i);
        for a in 0..p {
            let wa = wi * row[a];
            for b in a..p {
                g[a * p + b] += wa * row[b];
            }
        }
    }
    mirror_upper(&mut g, p);
    g
}

pub(crate) fn mirror_upper(m: &mut [f64], p: usize) {
    for a in 0..p {
        for b in 0..a {
            m[a * p + b] = m[b * p + a];
        }
    }
}

/// Solves the symmetric positive-definite system `m · s = rhs` by Cholesky.
/// Returns `None` if `m` is not numerically positive definite.
pub(crate) fn spd_solve(m: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let p = rhs.len();
    let mat = nalgebra::DMatrix::from_row_slice(p, p, m);
    let chol = nalgebra::Cholesky::new(mat)?;
    let sol = chol.solve(&nalgebra::DVector::from_column_slice(rhs));
    if sol.iter().all(|v| v.is_finite()) {
        Some(sol.as_slice().to_vec())
    } else {
        None
    }
}

/// Smallest/largest eigenvalue ratio of a symmetric matrix.
pub(crate) fn eigen_ratio(m: &[f64], p: usize) -> f64 {
    let mat = nalgebra::DMatrix::from_row_slice(p, p, m);
    let eig = nalgebra::SymmetricEigen::new(mat);
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if max <= 0.0 || !max.is_finite() {
        0.0
    } else {
        min / max
    }
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl ModelData {
    /// Why fitting under weights `w` is bound to fail on outcome support
    /// grounds, if it is.
    pub(crate) fn support_problem(&self, w: &[f64]) -> Option<&'static str> {
        match self {
            ModelData::Linear { .. } => None,
            ModelData::Logistic { y, .. } => {
                let has = |class: f64| y.iter().zip(w).any(|(&v, &wi)| v == class && wi > 0.0);
                (!(has(0.0) && has(1.0))).then_some("retained data has a single outcome class")
            }
            ModelData::Cox(d) => {
                let any = d.event().iter().zip(w).any(|(&e, &wi)| e && wi > 0.0);
                (!any).then_some("retained data has no events")
            }
        }
    }
}
