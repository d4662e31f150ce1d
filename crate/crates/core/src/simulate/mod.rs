//! Monte Carlo studies: scenario generators, replicated estimation and
//! bias / SD / RMSE / coverage summaries.
//!
//! Replicate `r` draws its data from stream `r` of the run seed and, for
//! bootstrap plans, resamples under a seed derived from the plan seed and
//! `r`. Replicates are evaluated in parallel and summarized in replicate
//! order, so a run is reproducible regardless of the number of threads.

mod scenarios;
mod summary;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisSpec;
use crate::augment::WaldRow;
use crate::error::{Error, Result};
use crate::pipeline::analyze;
use crate::resample::ResamplePlan;
use crate::rng::{derive_seed, stream, StreamRng};
use crate::study::StudyData;

pub use scenarios::{Accuracy, Example1, Example2, Example3, Example4, VALIDATION_COLUMN};
pub use summary::{summarize, Estimator, ReplicateRecord, ReplicationSummary, SummaryRow};

/// Share of failed replicates above which a run is rejected.
pub const MAX_FAILED_FRACTION: f64 = 0.02;

/// Returns 1 with probability `sens` when `truth` is 1, and 0 with
/// probability `spec` when `truth` is 0.
pub fn misclassify<R: Rng + ?Sized>(truth: bool, sens: f64, spec: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    if truth {
        u < sens
    } else {
        u >= spec
    }
}

/// A data-generating process together with the analysis it is meant for.
pub trait Generator: Sync {
    fn name(&self) -> &str;
    fn analysis_spec(&self) -> AnalysisSpec;
    /// True values of the reference coefficients, in `analysis_spec` order.
    fn true_beta(&self) -> Vec<f64>;
    fn generate(&self, n_full: usize, n_val: usize, rng: &mut StreamRng) -> Result<StudyData>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Scenario {
    Example1(Example1),
    Example2(Example2),
    Example3(Example3),
    Example4(Example4),
}

impl Scenario {
    /// The scenario with default parameters, by name (`example1` .. `example4`).
    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name {
            "example1" => Scenario::Example1(Example1::default()),
            "example2" => Scenario::Example2(Example2::default()),
            "example3" => Scenario::Example3(Example3::default()),
            "example4" => Scenario::Example4(Example4::default()),
            _ => {
                return Err(Error::InvalidSpec(format!(
                    "unknown scenario `{name}` (expected example1 .. example4)"
                )))
            }
        })
    }

    pub fn generator(&self) -> &dyn Generator {
        match self {
            Scenario::Example1(g) => g,
            Scenario::Example2(g) => g,
            Scenario::Example3(g) => g,
            Scenario::Example4(g) => g,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n_full: usize,
    pub n_val: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        Self {
            scenario,
            n_full: 4000,
            n_val: 400,
            seed,
        }
    }

    /// Data for replicate `replicate`.
    pub fn dataset(&self, replicate: usize) -> Result<StudyData> {
        self.scenario.generator().generate(
            self.n_full,
            self.n_val,
            &mut stream(self.seed, replicate as u64),
        )
    }
}

/// Outcome of a replicated study: the summary plus every replicate's
/// estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub summary: ReplicationSummary,
    pub records: Vec<ReplicateRecord>,
}

/// Runs `reps` replicates of `spec` under `plan`, with Wald intervals at
/// level `1 − alpha`.
pub fn run_replications(
    spec: &ScenarioSpec,
    reps: usize,
    plan: &ResamplePlan,
    alpha: f64,
) -> Result<SimulationRun> {
    run_generator(
        spec.scenario.generator(),
        spec.n_full,
        spec.n_val,
        spec.seed,
        reps,
        plan,
        alpha,
    )
}

/// [`run_replications`] for any generator.
pub fn run_generator(
    generator: &dyn Generator,
    n_full: usize,
    n_val: usize,
    seed: u64,
    reps: usize,
    plan: &ResamplePlan,
    alpha: f64,
) -> Result<SimulationRun> {
    if reps < 2 {
        return Err(Error::InvalidSpec(format!("at least 2 replicates are needed, got {reps}")));
    }
    let base = generator.analysis_spec();
    let outcomes: Vec<std::result::Result<[Vec<WaldRow>; 3], String>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut spec = base.clone();
            spec.alpha = alpha;
            spec.resample = match plan {
                ResamplePlan::Bootstrap { replicates, seed } => {
                    ResamplePlan::bootstrap(*replicates, derive_seed(*seed, r as u64))
                }
                jk => jk.clone(),
            };
            let data = generator
                .generate(n_full, n_val, &mut stream(seed, r as u64))
                .map_err(|e| e.to_string())?;
            let a = analyze(&data, &spec).map_err(|e| e.to_string())?;
            Ok([a.estimate.aug, a.estimate.val, a.estimate.ful])
        })
        .collect();

    let failures: Vec<(usize, String)> = outcomes
        .iter()
        .enumerate()
        .filter_map(|(r, o)| o.as_ref().err().map(|m| (r, m.clone())))
        .collect();
    if failures.len() as f64 > MAX_FAILED_FRACTION * reps as f64 {
        return Err(Error::TooManyFailures {
            what: "simulation replicates",
            failed: failures.len(),
            total: reps,
            limit_pct: MAX_FAILED_FRACTION * 100.0,
        });
    }

    let truth = generator.true_beta();
    let beta_labels = base.beta_labels();
    let gamma_labels = base.gamma_labels();
    let gamma_to_beta = base.gamma_to_beta();
    let mut records = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        let Ok([aug, val, ful]) = outcome else { continue };
        for (estimator, rows) in [(Estimator::BetaAug, aug), (Estimator::BetaVal, val)] {
            for (j, row) in rows.into_iter().enumerate() {
                records.push(ReplicateRecord::new(r, estimator, &beta_labels[j], &beta_labels[j], truth[j], row));
            }
        }
        for (k, row) in ful.into_iter().enumerate() {
            let j = gamma_to_beta[k];
            records.push(ReplicateRecord::new(
                r,
                Estimator::GammaFul,
                &gamma_labels[k],
                &beta_labels[j],
                truth[j],
                row,
            ));
        }
    }
    let summary = ReplicationSummary {
        scenario: generator.name().to_string(),
        family: base.family,
        n_full,
        n_val,
        seed,
        plan: plan.clone(),
        alpha,
        replicates: reps,
        failures: failures.len(),
        failure_messages: failures
            .into_iter()
            .map(|(r, m)| format!("replicate {r}: {m}"))
            .collect(),
        rows: summarize(&records),
    };
    Ok(SimulationRun { summary, records })
}
