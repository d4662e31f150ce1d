//! Column roles for an analysis, read from a versioned JSON document.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "family": "logistic",
//!   "outcome": { "reference": "y", "surrogate": "y_s" },
//!   "predictors": [
//!     { "name": "x1", "reference": "x1", "surrogates": ["x1_nlp", "x1_icd"] },
//!     { "name": "age", "reference": "age", "surrogates": ["age"], "perfect": true }
//!   ],
//!   "validation": "val"
//! }
//! ```
//!
//! Cox outcomes name a `{ "time": .., "event": .. }` pair on each side.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Family, Ties};
use crate::resample::ResamplePlan;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    pub schema_version: u32,
    pub family: Family,
    pub outcome: OutcomeSpec,
    pub predictors: Vec<PredictorSpec>,
    /// Column holding the 0/1 validation flag.
    pub validation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<String>,
    /// Inverse-probability sampling weights, applied to the validation fits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
    #[serde(default)]
    pub resample: ResamplePlan,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub ties: Ties,
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeSpec {
    pub reference: OutcomeColumns,
    pub surrogate: OutcomeColumns,
    #[serde(default)]
    pub perfect: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OutcomeColumns {
    Single(String),
    Survival { time: String, event: String },
}

impl OutcomeColumns {
    pub fn columns(&self) -> Vec<&str> {
        match self {
            OutcomeColumns::Single(c) => vec![c],
            OutcomeColumns::Survival { time, event } => vec![time, event],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorSpec {
    pub name: String,
    pub reference: String,
    pub surrogates: Vec<String>,
    /// The surrogate is taken to be measured without error.
    #[serde(default)]
    pub perfect: bool,
}

impl AnalysisSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: AnalysisSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let survival = matches!(self.family, Family::Cox);
        for (side, cols) in [
            ("reference", &self.outcome.reference),
            ("surrogate", &self.outcome.surrogate),
        ] {
            let is_pair = matches!(cols, OutcomeColumns::Survival { .. });
            if survival && !is_pair {
                return bad(format!("cox {side} outcome needs a time and an event column"));
            }
            if !survival && is_pair {
                return bad(format!("{} {side} outcome takes a single column", self.family));
            }
        }
        if self.predictors.is_empty() && survival {
            return bad("a cox model needs at least one predictor".into());
        }
        let mut names = HashSet::new();
        let mut refs = HashSet::new();
        for p in &self.predictors {
            if !names.insert(p.name.as_str()) {
                return bad(format!("duplicate predictor name `{}`", p.name));
            }
            if !refs.insert(p.reference.as_str()) {
                return bad(format!("reference column `{}` used twice", p.reference));
            }
            if p.surrogates.is_empty() {
                return bad(format!("predictor `{}` has no surrogate column", p.name));
            }
        }
        let surrogates: Vec<&str> = self.surrogate_columns();
        let unique: HashSet<&str> = surrogates.iter().copied().collect();
        if unique.len() != surrogates.len() {
            return bad("a surrogate column is listed twice".into());
        }
        if self.outcome.perfect && self.predictors.iter().all(|p| p.perfect) {
            return bad("every surrogate is flagged perfect; nothing to correct".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        Ok(())
    }

    /// Number of reference coefficients (p).
    pub fn n_beta(&self) -> usize {
        self.predictors.len() + usize::from(self.family.has_intercept())
    }

    /// Number of surrogate coefficients (q).
    pub fn n_gamma(&self) -> usize {
        self.predictors.iter().map(|p| p.surrogates.len()).sum::<usize>()
            + usize::from(self.family.has_intercept())
    }

    pub fn beta_labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.family.has_intercept() {
            out.push("(Intercept)".to_string());
        }
        out.extend(self.predictors.iter().map(|p| p.name.clone()));
        out
    }

    pub fn gamma_labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.family.has_intercept() {
            out.push("(Intercept)".to_string());
        }
        out.extend(self.predictors.iter().flat_map(|p| p.surrogates.iter().cloned()));
        out
    }

    /// For each surrogate coefficient, the index of the reference coefficient
    /// it stands in for.
    pub fn gamma_to_beta(&self) -> Vec<usize> {
        let offset = usize::from(self.family.has_intercept());
        let mut out = Vec::new();
        if offset == 1 {
            out.push(0);
        }
        for (j, p) in self.predictors.iter().enumerate() {
            out.extend(std::iter::repeat_n(j + offset, p.surrogates.len()));
        }
        out
    }

    pub fn surrogate_columns(&self) -> Vec<&str> {
        let mut out = self.outcome.surrogate.columns();
        out.extend(
            self.predictors
                .iter()
                .flat_map(|p| p.surrogates.iter().map(String::as_str)),
        );
        out
    }

    /// Reference columns that are not also surrogate columns; these must be
    /// observed exactly on the validated rows.
    pub fn reference_only_columns(&self) -> Vec<&str> {
        let surrogates: HashSet<&str> = self.surrogate_columns().into_iter().collect();
        let mut out = self.outcome.reference.columns();
        out.extend(self.predictors.iter().map(|p| p.reference.as_str()));
        out.retain(|c| !surrogates.contains(c));
        out
    }
}
