use thiserror::Error;

use crate::model::FitError;

/// Which of the three regressions behind a joint statistic failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelRole {
    /// Reference variables on the validation subsample (β_val).
    ReferenceValidation,
    /// Surrogate variables on the validation subsample (γ_val).
    SurrogateValidation,
    /// Surrogate variables on the full sample (γ_ful).
    SurrogateFull,
}

impl std::fmt::Display for ModelRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelRole::ReferenceValidation => "reference/validation",
            ModelRole::SurrogateValidation => "surrogate/validation",
            ModelRole::SurrogateFull => "surrogate/full",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{model} fit failed: {source}")]
    Fit {
        model: ModelRole,
        #[source]
        source: FitError,
    },
    #[error("leave-out group {group}: {model} fit failed: {source}")]
    LeaveOutFit {
        group: usize,
        model: ModelRole,
        #[source]
        source: FitError,
    },
    #[error("jackknife group {group} is too small: {reason}")]
    GroupTooSmall { group: usize, reason: String },
    #[error("at least 2 resampling groups are required, got {0}")]
    InsufficientGroups(usize),
    #[error("{failed} of {total} {what} failed, above the {limit_pct}% limit")]
    TooManyFailures {
        what: &'static str,
        failed: usize,
        total: usize,
        limit_pct: f64,
    },
    #[error("invalid study data: {0}")]
    InvalidData(String),
    #[error("invalid analysis spec: {0}")]
    InvalidSpec(String),
    #[error("invalid resample plan: {0}")]
    InvalidPlan(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("coefficient {row}: standard error is zero")]
    DegenerateSe { row: usize },
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}, column `{column}`: reference value missing on a validated row")]
    ReferenceMissingInValidation { line: usize, column: String },
    #[error("line {line}, column `{column}`: reference value present on a non-validated row")]
    ReferencePresentOutsideValidation { line: usize, column: String },
    #[error("line {line}, column `{column}`: cannot parse `{value}` as a number")]
    NonNumericCell {
        line: usize,
        column: String,
        value: String,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Fit and convergence failures, as opposed to invalid input.
    pub fn is_fit_failure(&self) -> bool {
        matches!(
            self,
            Error::Fit { .. } | Error::LeaveOutFit { .. } | Error::TooManyFailures { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
