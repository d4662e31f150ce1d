//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line for
//! each, then fails if any criterion failed.

mod common;

use std::io::Write;
use std::path::Path;

use augreg::model::{fit_cox, fit_linear, fit_logistic, CaseWeights, DesignMatrix, FitOptions};
use augreg::pipeline::analyze;
use augreg::resample::{jackknife_cov, GroupCount, ResamplePlan};
use augreg::rng::stream;
use augreg::simulate::{
    run_replications, Estimator, ReplicateRecord, ReplicationSummary, Scenario, ScenarioSpec,
    SimulationRun,
};
use augreg::{augment, AnalysisSpec, CovBlocks, JointStatistic, StudyData};
use common::*;
use nalgebra::DMatrix;
use rand::Rng;
use tempfile::TempDir;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(checks: Vec<(bool, String)>) -> Self {
        let pass = checks.iter().all(|(ok, _)| *ok);
        let detail = checks
            .into_iter()
            .map(|(ok, msg)| format!("{}{msg}", if ok { "" } else { "FAILED " }))
            .collect::<Vec<_>>()
            .join("; ");
        Self { pass, detail }
    }
}

/// Written straight to stdout so the lines show up without `--nocapture`.
fn report(id: usize, name: &str, outcome: &Outcome) {
    let mut out = std::io::stdout().lock();
    let status = if outcome.pass { "PASS" } else { "FAIL" };
    writeln!(out, "acceptance {id} {name}: {status} ({})", outcome.detail).unwrap();
    out.flush().unwrap();
}

fn simulate(name: &str, seed: u64, reps: usize, plan: &ResamplePlan) -> SimulationRun {
    let spec = ScenarioSpec::new(Scenario::by_name(name).unwrap(), seed);
    run_replications(&spec, reps, plan, 0.05).unwrap()
}

fn rmse(s: &ReplicationSummary, e: Estimator, term: &str) -> f64 {
    s.row(e, term).unwrap().rmse
}

fn beta_terms(s: &ReplicationSummary) -> Vec<String> {
    s.rows_for(Estimator::BetaAug).map(|r| r.term.clone()).collect()
}

/// γ_ful rows scored against reference coefficient `target`.
fn gamma_rows<'a>(s: &'a ReplicationSummary, target: &'a str) -> impl Iterator<Item = &'a augreg::simulate::SummaryRow> {
    s.rows_for(Estimator::GammaFul).filter(move |r| r.target == target)
}

/// Per-replicate check that augmentation did not raise any variance.
fn variance_never_increases(records: &[ReplicateRecord]) -> (bool, usize) {
    let mut worst = 0usize;
    let mut checked = 0;
    for aug in records.iter().filter(|r| r.estimator == Estimator::BetaAug) {
        let val = records
            .iter()
            .find(|r| r.estimator == Estimator::BetaVal && r.replicate == aug.replicate && r.term == aug.term)
            .unwrap();
        checked += 1;
        if aug.se * aug.se > val.se * val.se + 1e-10 {
            worst += 1;
        }
    }
    (worst == 0, checked)
}

fn example4_rmse(run: &SimulationRun) -> Outcome {
    let s = &run.summary;
    let mut checks = Vec::new();
    for term in beta_terms(s).iter().skip(1) {
        let (a, v) = (rmse(s, Estimator::BetaAug, term), rmse(s, Estimator::BetaVal, term));
        checks.push(((0.012..=0.020).contains(&a), format!("{term} aug {a:.4}")));
        checks.push(((0.040..=0.062).contains(&v), format!("val {v:.4}")));
        checks.push(((2.5..=3.8).contains(&(v / a)), format!("ratio {:.2}", v / a)));
    }
    Outcome::new(checks)
}

fn example1_ordering(run: &SimulationRun) -> Outcome {
    let s = &run.summary;
    let mut checks = Vec::new();
    for (j, term) in beta_terms(s).iter().enumerate() {
        let (a, v) = (rmse(s, Estimator::BetaAug, term), rmse(s, Estimator::BetaVal, term));
        checks.push((a < v, format!("{term} aug {a:.4} < val {v:.4}")));
        if j > 0 {
            for g in gamma_rows(s, term) {
                checks.push((a <= g.rmse, format!("{term} aug {a:.4} <= ful {:.4}", g.rmse)));
            }
        }
        let cov = s.row(Estimator::BetaAug, term).unwrap().coverage;
        checks.push(((0.925..=0.97).contains(&cov), format!("{term} coverage {cov:.3}")));
    }
    Outcome::new(checks)
}

fn example2_properties(run: &SimulationRun) -> Outcome {
    let s = &run.summary;
    let mut checks = Vec::new();
    for term in beta_terms(s) {
        let a = s.row(Estimator::BetaAug, &term).unwrap();
        let v = s.row(Estimator::BetaVal, &term).unwrap();
        checks.push((a.sd < v.sd, format!("{term} sd aug {:.4} < val {:.4}", a.sd, v.sd)));
        checks.push((a.coverage >= 0.925, format!("{term} coverage {:.3}", a.coverage)));
        if term == "x1" || term == "x3" {
            for g in gamma_rows(s, &term) {
                checks.push((
                    g.bias.abs() > a.bias.abs(),
                    format!("{term} |bias| ful {:.4} > aug {:.4}", g.bias.abs(), a.bias.abs()),
                ));
            }
        }
    }
    Outcome::new(checks)
}

fn example3_dual_surrogates(run: &SimulationRun) -> Outcome {
    let s = &run.summary;
    let spec = Scenario::by_name("example3").unwrap().generator().analysis_spec();
    let mut checks = vec![(
        spec.n_beta() == 5 && spec.n_gamma() == 6,
        format!("p = {}, q = {}", spec.n_beta(), spec.n_gamma()),
    )];
    for term in beta_terms(s) {
        let (a, v) = (rmse(s, Estimator::BetaAug, &term), rmse(s, Estimator::BetaVal, &term));
        checks.push((a < v, format!("{term} aug {a:.4} < val {v:.4}")));
    }
    let dual: Vec<_> = gamma_rows(s, "x4").collect();
    checks.push((dual.len() == 2, format!("{} surrogates for x4", dual.len())));
    for g in dual {
        checks.push((g.rmse > 0.3, format!("ful {} rmse {:.4}", g.term, g.rmse)));
    }
    Outcome::new(checks)
}

fn jackknife_oracle() -> Outcome {
    let data = linear_data(20, 8, 5);
    let spec = linear_spec();
    let cov = jackknife_cov(&data, &spec, &ResamplePlan::jackknife(GroupCount::PerElement)).unwrap();
    let (sigma, omega, k) = brute_force_jackknife(&data, &spec);
    let diff = max_rel_diff(&cov.blocks.sigma, &sigma)
        .max(max_rel_diff(&cov.blocks.omega, &omega))
        .max(max_rel_diff(&cov.blocks.k, &k));

    let mean_spec = AnalysisSpec::from_json(
        r#"{"schema_version": 1, "family": "linear",
            "outcome": {"reference": "y", "surrogate": "y"},
            "predictors": [], "validation": "val"}"#,
    )
    .unwrap();
    let mut rng = stream(6, 0);
    let y: Vec<f64> = (0..25).map(|_| 10.0 + normal(&mut rng)).collect();
    let mean_data = StudyData::new(vec![true; 25])
        .with_column("y", y.clone())
        .unwrap()
        .with_column("val", vec![1.0; 25])
        .unwrap();
    let jk = jackknife_cov(&mean_data, &mean_spec, &ResamplePlan::jackknife(GroupCount::PerElement)).unwrap();
    let m = y.iter().sum::<f64>() / 25.0;
    let s2n = y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 24.0 / 25.0;
    let mean_err = (jk.blocks.sigma[(0, 0)] - s2n).abs();
    Outcome::new(vec![
        (diff < 1e-10, format!("blocks max rel diff {diff:.1e}")),
        (mean_err < 1e-12, format!("mean identity error {mean_err:.1e}")),
    ])
}

fn augmentation_algebra(runs: &[&SimulationRun]) -> Outcome {
    let m = |v: f64| DMatrix::from_element(1, 1, v);
    let mut blocks = CovBlocks::new(m(4.0), m(2.0), m(4.0));
    blocks.gamma_ful = Some(m(1.0));
    let hand = augment(&JointStatistic::new(vec![1.0], vec![1.0], vec![0.0]), &blocks, 0.05).unwrap();
    let zero = augment(&JointStatistic::new(vec![1.25], vec![0.5], vec![0.5]), &blocks, 0.05).unwrap();
    let mut checks = vec![
        (
            hand.beta_aug[0] == 0.5 && hand.var_aug[(0, 0)] == 3.0,
            format!("hand case ({}, {})", hand.beta_aug[0], hand.var_aug[(0, 0)]),
        ),
        (zero.beta_aug[0] == 1.25, "zero difference keeps beta_val".into()),
    ];
    for run in runs {
        let (ok, n) = variance_never_increases(&run.records);
        checks.push((ok, format!("{} var_aug <= sigma over {n} estimates", run.summary.scenario)));
    }
    Outcome::new(checks)
}

fn reparameterization() -> Outcome {
    let scenario = ScenarioSpec::new(Scenario::by_name("example4").unwrap(), 8);
    let data = scenario.dataset(0).unwrap();
    let spec = scenario.scenario.generator().analysis_spec();
    let base = analyze(&data, &spec).unwrap();
    let factors = [("x1_s", 0.5), ("x2_s", 2.0), ("x3_s", 10.0), ("x4_s", -1.0)];
    let scaled = analyze(&rescale_columns(&data, &factors), &spec).unwrap();
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
    let mut worst: f64 = 0.0;
    let (se0, se1) = (base.estimate.se(), scaled.estimate.se());
    for j in 0..5 {
        worst = worst.max(rel(base.estimate.beta_aug[j], scaled.estimate.beta_aug[j]));
        worst = worst.max(rel(se0[j], se1[j]));
    }
    let gamma_changed = base.statistic.gamma_ful[3] != scaled.statistic.gamma_ful[3];
    Outcome::new(vec![
        (worst < 1e-8, format!("max rel change {worst:.1e}")),
        (gamma_changed, "gamma changes".into()),
    ])
}

fn fitter_oracles() -> Outcome {
    let mut rng = stream(9, 0);
    let n = 50;
    let x: Vec<f64> = (0..n).map(|i| f64::from(u8::from(i % 3 == 0))).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|&v| f64::from(u8::from(rng.random::<f64>() < 0.35 + 0.3 * v)))
        .collect();
    let d = DesignMatrix::from_columns(&[&x], true).unwrap();
    let fit = fit_logistic(&d, &y, &CaseWeights::ones(n), &FitOptions::default(), None).unwrap();
    let (b0, b1) = two_by_two_logit(&x, &y);
    let logit_err = (fit.coefficients[0] - b0).abs().max((fit.coefficients[1] - b1).abs());

    let n = 30;
    let xc: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let time: Vec<f64> = xc.iter().map(|v| -rng.random::<f64>().ln() / (0.6 * v).exp()).collect();
    let event: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.75).collect();
    let dc = DesignMatrix::from_columns(&[&xc], false).unwrap();
    let cox = fit_cox(&dc, &time, &event, &CaseWeights::ones(n), &FitOptions::default(), None).unwrap();
    let cox_err = (cox.coefficients[0]
        - golden_max(|b| cox_efron_loglik(b, &xc, &time, &event), -5.0, 5.0, 1e-10))
    .abs();

    let n = 20;
    let cols: Vec<Vec<f64>> = (0..2).map(|_| (0..n).map(|_| normal(&mut rng)).collect()).collect();
    let yl: Vec<f64> = (0..n).map(|i| 1.0 + cols[0][i] - cols[1][i] + normal(&mut rng)).collect();
    let dl = DesignMatrix::from_columns(&[&cols[0], &cols[1]], true).unwrap();
    let lin = fit_linear(&dl, &yl, &CaseWeights::ones(n)).unwrap();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| dl.row(i).to_vec()).collect();
    let oracle = normal_equations(&rows, &yl, &vec![1.0; n]);
    let lin_err = lin.coefficients.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    Outcome::new(vec![
        (logit_err < 1e-8, format!("logistic {logit_err:.1e}")),
        (cox_err < 1e-6, format!("cox {cox_err:.1e}")),
        (lin_err < 1e-10, format!("linear {lin_err:.1e}")),
    ])
}

fn determinism() -> Outcome {
    let dir = TempDir::new().unwrap();
    let p = |name: &str| dir.path().join(name);
    let s = |path: &Path| path.to_str().unwrap().to_string();
    let gen = run_cli([
        "generate", "--scenario", "example2", "--n-full", "1000", "--n-val", "200", "--seed", "4",
        "--out", &s(&p("data.csv")), "--spec-out", &s(&p("spec.json")),
    ]);
    assert!(gen.status.success());

    let mut checks = Vec::new();
    let report_schema = schema("report.schema.json");
    for method in ["jackknife", "bootstrap"] {
        let mut files = Vec::new();
        for threads in ["1", "4"] {
            let out = p(&format!("fit-{method}-{threads}.json"));
            let r = run_cli([
                "fit", "--data", &s(&p("data.csv")), "--spec", &s(&p("spec.json")),
                "--method", method, "--boot-B", "100", "--seed", "3", "--threads", threads,
                "--out", &s(&out),
            ]);
            assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
            let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
            let errs = schema_errors(&report_schema, &doc);
            checks.push((errs.is_empty(), format!("{method} report schema {errs:?}")));
            files.push(std::fs::read(&out).unwrap());
        }
        checks.push((files[0] == files[1], format!("fit {method} identical")));
    }
    let mut files = Vec::new();
    for threads in ["1", "3"] {
        let out = p(&format!("sim-{threads}.csv"));
        let r = run_cli([
            "simulate", "--scenario", "example1", "--reps", "4", "--n-full", "1000", "--n-val",
            "200", "--seed", "7", "--threads", threads, "--format", "csv", "--out", &s(&out),
        ]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        files.push(std::fs::read(&out).unwrap());
    }
    checks.push((files[0] == files[1], "simulate identical".into()));
    Outcome::new(checks)
}

#[test]
fn acceptance() {
    let mut results = Vec::new();
    let mut record = |id: usize, name: &str, outcome: Outcome| {
        report(id, name, &outcome);
        results.push((id, outcome.pass));
    };

    let ex4 = simulate("example4", 11, 200, &ResamplePlan::jackknife(GroupCount::Fixed(500)));
    record(1, "example4_rmse_values", example4_rmse(&ex4));
    let ex1 = simulate("example1", 17, 500, &ResamplePlan::default());
    record(2, "example1_ordering_and_coverage", example1_ordering(&ex1));
    let ex2 = simulate("example2", 19, 200, &ResamplePlan::default());
    record(3, "example2_properties", example2_properties(&ex2));
    let ex3 = simulate("example3", 13, 200, &ResamplePlan::default());
    record(4, "example3_dual_surrogates", example3_dual_surrogates(&ex3));
    record(5, "jackknife_oracle", jackknife_oracle());
    record(6, "augmentation_algebra", augmentation_algebra(&[&ex4, &ex1, &ex2, &ex3]));
    record(7, "reparameterization_invariance", reparameterization());
    record(8, "fitter_oracles", fitter_oracles());
    record(9, "thread_count_determinism", determinism());

    let failed: Vec<usize> = results.iter().filter(|(_, ok)| !ok).map(|(id, _)| *id).collect();
    assert!(failed.is_empty(), "failed acceptance criteria: {failed:?}");
}
