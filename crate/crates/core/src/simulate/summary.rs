use serde::{Deserialize, Serialize};

use crate::augment::WaldRow;
use crate::model::Family;
use crate::resample::ResamplePlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    BetaAug,
    BetaVal,
    GammaFul,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::BetaAug => "beta_aug",
            Estimator::BetaVal => "beta_val",
            Estimator::GammaFul => "gamma_ful",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "beta_aug" => Ok(Estimator::BetaAug),
            "beta_val" => Ok(Estimator::BetaVal),
            "gamma_ful" => Ok(Estimator::GammaFul),
            _ => Err(format!("unknown estimator `{s}`")),
        }
    }
}

/// One coefficient estimate from one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub estimator: Estimator,
    /// Coefficient label within its own model.
    pub term: String,
    /// The reference coefficient it is scored against.
    pub target: String,
    pub truth: f64,
    pub estimate: f64,
    pub se: f64,
    pub lcl: f64,
    pub ucl: f64,
}

impl ReplicateRecord {
    pub(crate) fn new(
        replicate: usize,
        estimator: Estimator,
        term: &str,
        target: &str,
        truth: f64,
        row: WaldRow,
    ) -> Self {
        Self {
            replicate,
            estimator,
            term: term.to_string(),
            target: target.to_string(),
            truth,
            estimate: row.estimate,
            se: row.se,
            lcl: row.lcl,
            ucl: row.ucl,
        }
    }
}

/// Monte Carlo performance of one estimator for one coefficient.
///
/// `sd` uses the `R − 1` denominator and `rmse` the `R` denominator, so
/// `rmse² = bias² + sd² (R − 1)/R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub estimator: Estimator,
    pub term: String,
    pub target: String,
    pub truth: f64,
    pub n: usize,
    pub mean: f64,
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub ci_half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub scenario: String,
    pub family: Family,
    pub n_full: usize,
    pub n_val: usize,
    pub seed: u64,
    pub plan: ResamplePlan,
    pub alpha: f64,
    pub replicates: usize,
    pub failures: usize,
    pub failure_messages: Vec<String>,
    pub rows: Vec<SummaryRow>,
}

impl ReplicationSummary {
    pub fn row(&self, estimator: Estimator, term: &str) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.term == term)
    }

    pub fn rows_for(&self, estimator: Estimator) -> impl Iterator<Item = &SummaryRow> {
        self.rows.iter().filter(move |r| r.estimator == estimator)
    }
}

/// Aggregates records per (estimator, term), in order of first appearance.
/// Sums run in record order.
pub fn summarize(records: &[ReplicateRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Estimator, &str)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.estimator, r.term.as_str())) {
            keys.push((r.estimator, &r.term));
        }
    }
    keys.into_iter()
        .map(|(estimator, term)| {
            let group: Vec<&ReplicateRecord> = records
                .iter()
                .filter(|r| r.estimator == estimator && r.term == term)
                .collect();
            let n = group.len() as f64;
            let truth = group[0].truth;
            let mean = group.iter().map(|r| r.estimate).sum::<f64>() / n;
            let ss = group.iter().map(|r| (r.estimate - mean).powi(2)).sum::<f64>();
            let sd = if group.len() > 1 { (ss / (n - 1.0)).sqrt() } else { f64::NAN };
            let mse = group.iter().map(|r| (r.estimate - truth).powi(2)).sum::<f64>() / n;
            let covered = group.iter().filter(|r| r.lcl <= truth && truth <= r.ucl).count();
            let half = group.iter().map(|r| (r.ucl - r.lcl) / 2.0).sum::<f64>() / n;
            SummaryRow {
                estimator,
                term: term.to_string(),
                target: group[0].target.clone(),
                truth,
                n: group.len(),
                mean,
                bias: mean - truth,
                sd,
                rmse: mse.sqrt(),
                coverage: covered as f64 / n,
                ci_half_width: half,
            }
        })
        .collect()
}
