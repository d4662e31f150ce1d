use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{
    blocks_from_replicates, CovEstimate, GroupAssignment, GroupCount, JointStatistic, MethodKind,
    Problem, ResamplePlan,
};
use crate::analysis::AnalysisSpec;
use crate::error::{Error, Result};
use crate::study::StudyData;

/// Partitions the sampling units (clusters, or rows) into jackknife groups.
///
/// Validated units are dealt round-robin first, then non-validated units
/// continue from the next group, so group sizes differ by at most one and
/// each group keeps about the overall validation fraction. A unit counts as
/// validated if any of its rows is. Groups are returned as sorted row lists,
/// ordered by their first row.
pub fn jackknife_groups(
    problem: &Problem,
    count: GroupCount,
    assignment: GroupAssignment,
) -> Result<Vec<Vec<usize>>> {
    let n_units = problem.n_units();
    let g = count.resolve(n_units);
    if g < 2 {
        return Err(Error::InsufficientGroups(g));
    }
    let units = problem.units();
    let mut unit_rows = vec![Vec::new(); n_units];
    for (row, &u) in units.iter().enumerate() {
        unit_rows[u].push(row);
    }
    let mut validated_unit = vec![false; n_units];
    for &row in problem.val_rows() {
        validated_unit[units[row]] = true;
    }
    let (mut val_units, mut other_units): (Vec<usize>, Vec<usize>) =
        (0..n_units).partition(|&u| validated_unit[u]);
    if let GroupAssignment::Shuffled { seed } = assignment {
        let mut rng = crate::rng::stream(seed, 0);
        val_units.shuffle(&mut rng);
        other_units.shuffle(&mut rng);
    }

    let mut groups = vec![Vec::new(); g];
    for (k, u) in val_units.iter().chain(&other_units).enumerate() {
        groups[k % g].extend_from_slice(&unit_rows[*u]);
    }
    Ok(canonical(groups))
}

fn canonical(mut groups: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    groups.retain(|grp| !grp.is_empty());
    for grp in &mut groups {
        grp.sort_unstable();
    }
    groups.sort_unstable_by_key(|grp| grp[0]);
    groups
}

/// Grouped jackknife covariance for an explicit partition of the rows.
///
/// The groups are put in canonical order first, so any enumeration of the same
/// partition gives bit-identical blocks. The scale factor is `(g − 1)/g`.
pub fn jackknife_from_groups(
    problem: &Problem,
    full: &JointStatistic,
    groups: &[Vec<usize>],
) -> Result<CovEstimate> {
    let groups = canonical(groups.to_vec());
    let g = groups.len();
    if g < 2 {
        return Err(Error::InsufficientGroups(g));
    }
    let n = problem.n_full();
    let mut seen = vec![false; n];
    for grp in &groups {
        for &r in grp {
            if r >= n || std::mem::replace(&mut seen[r], true) {
                return Err(Error::InvalidPlan(format!(
                    "row {r} is out of range or appears in two jackknife groups"
                )));
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidPlan("jackknife groups must cover every row".into()));
    }
    for (i, grp) in groups.iter().enumerate() {
        check_group(problem, i, grp)?;
    }

    let results: Vec<_> = groups
        .par_iter()
        .enumerate()
        .map(|(i, grp)| {
            let mut mult = vec![1.0; n];
            for &r in grp {
                mult[r] = 0.0;
            }
            problem
                .evaluate(&mult, Some(full), true)
                .map(|s| s.stacked())
                .map_err(|(model, source)| Error::LeaveOutFit {
                    group: i,
                    model,
                    source,
                })
        })
        .collect();
    let stats = results.into_iter().collect::<Result<Vec<_>>>()?;
    let scale = (g as f64 - 1.0) / g as f64;
    Ok(CovEstimate {
        blocks: blocks_from_replicates(&stats, problem.p(), problem.q(), scale),
        method: MethodKind::Jackknife,
        replicates: g,
        dropped: 0,
    })
}

fn check_group(problem: &Problem, index: usize, group: &[usize]) -> Result<()> {
    let n = problem.n_full();
    let mut mult = vec![1.0; n];
    for &r in group {
        mult[r] = 0.0;
    }
    let val_w: Vec<f64> = problem.val_rows().iter().map(|&r| mult[r]).collect();
    let retained = val_w.iter().filter(|&&w| w > 0.0).count();
    let required = problem.p().max(problem.q()) + 1;
    let too_small = |reason: String| Err(Error::GroupTooSmall {
        group: index,
        reason,
    });
    if retained < required {
        return too_small(format!(
            "leaving it out retains {retained} validated rows, at least {required} are needed"
        ));
    }
    for (data, w) in [
        (problem.reference_val(), &val_w),
        (problem.surrogate_val(), &val_w),
        (problem.surrogate_ful(), &mult),
    ] {
        if let Some(reason) = data.support_problem(w) {
            return too_small(reason.to_string());
        }
    }
    Ok(())
}

/// Jackknife covariance blocks for `data` under `spec`; `plan` must be a
/// jackknife plan.
pub fn jackknife_cov(
    data: &StudyData,
    spec: &AnalysisSpec,
    plan: &ResamplePlan,
) -> Result<CovEstimate> {
    let ResamplePlan::Jackknife { groups, assignment } = plan else {
        return Err(Error::InvalidPlan("expected a jackknife plan".into()));
    };
    let problem = Problem::new(data, spec)?;
    let full = problem.joint_statistic()?;
    let groups = jackknife_groups(&problem, *groups, *assignment)?;
    jackknife_from_groups(&problem, &full, &groups)
}
