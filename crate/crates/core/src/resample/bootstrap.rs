use rand::Rng;
use rayon::prelude::*;

use super::{
    blocks_from_replicates, CovEstimate, JointStatistic, MethodKind, Problem, ResamplePlan,
    MAX_DROPPED_FRACTION, MIN_BOOTSTRAP_REPLICATES,
};
use crate::analysis::AnalysisSpec;
use crate::error::{Error, Result};
use crate::study::StudyData;

struct Strata {
    unit_rows: Vec<Vec<usize>>,
    validated: Vec<usize>,
    other: Vec<usize>,
}

fn strata(problem: &Problem) -> Strata {
    let units = problem.units();
    let mut unit_rows = vec![Vec::new(); problem.n_units()];
    for (row, &u) in units.iter().enumerate() {
        unit_rows[u].push(row);
    }
    let mut is_val = vec![false; unit_rows.len()];
    for &r in problem.val_rows() {
        is_val[units[r]] = true;
    }
    let (validated, other) = (0..unit_rows.len()).partition(|&u| is_val[u]);
    Strata {
        unit_rows,
        validated,
        other,
    }
}

fn draw(strata: &Strata, n_rows: usize, seed: u64, replicate: usize) -> Vec<f64> {
    let mut rng = crate::rng::stream(seed, replicate as u64);
    let mut mult = vec![0.0; n_rows];
    for stratum in [&strata.validated, &strata.other] {
        for _ in 0..stratum.len() {
            let u = stratum[rng.random_range(0..stratum.len())];
            for &r in &strata.unit_rows[u] {
                mult[r] += 1.0;
            }
        }
    }
    mult
}

/// Row multiplicities of bootstrap replicate `replicate`.
///
/// Units are drawn with replacement separately among validated and
/// non-validated units, each stratum keeping its size.
pub fn bootstrap_multiplicities(problem: &Problem, seed: u64, replicate: usize) -> Vec<f64> {
    draw(&strata(problem), problem.n_full(), seed, replicate)
}

/// Bootstrap covariance (`B − 1` denominator) over the replicates whose
/// fits succeed. Failed replicates are dropped and counted.
pub fn bootstrap_from_problem(
    problem: &Problem,
    full: &JointStatistic,
    replicates: usize,
    seed: u64,
) -> Result<CovEstimate> {
    if replicates < MIN_BOOTSTRAP_REPLICATES {
        return Err(Error::InvalidPlan(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP_REPLICATES} replicates, got {replicates}"
        )));
    }
    let strata = strata(problem);
    let n = problem.n_full();
    let results: Vec<Option<Vec<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mult = draw(&strata, n, seed, b);
            problem.evaluate(&mult, Some(full), false).ok().map(|s| s.stacked())
        })
        .collect();
    let stats: Vec<Vec<f64>> = results.into_iter().flatten().collect();
    let dropped = replicates - stats.len();
    if dropped as f64 > MAX_DROPPED_FRACTION * replicates as f64 || stats.len() < 2 {
        return Err(Error::TooManyFailures {
            what: "bootstrap replicates",
            failed: dropped,
            total: replicates,
            limit_pct: MAX_DROPPED_FRACTION * 100.0,
        });
    }
    let scale = 1.0 / (stats.len() as f64 - 1.0);
    Ok(CovEstimate {
        blocks: blocks_from_replicates(&stats, problem.p(), problem.q(), scale),
        method: MethodKind::Bootstrap,
        replicates: stats.len(),
        dropped,
    })
}

/// Bootstrap covariance blocks for `data` under `spec`; `plan` must be a
/// bootstrap plan.
pub fn bootstrap_cov(
    data: &StudyData,
    spec: &AnalysisSpec,
    plan: &ResamplePlan,
) -> Result<CovEstimate> {
    let ResamplePlan::Bootstrap { replicates, seed } = plan else {
        return Err(Error::InvalidPlan("expected a bootstrap plan".into()));
    };
    let problem = Problem::new(data, spec)?;
    let full = problem.joint_statistic()?;
    bootstrap_from_problem(&problem, &full, *replicates, *seed)
}
