mod common;

use augreg::pipeline::analyze;
use augreg::resample::{jackknife_groups, GroupAssignment, GroupCount, Problem, ResamplePlan};
use augreg::simulate::{Scenario, ScenarioSpec};
use augreg::{augment, AnalysisSpec, CovBlocks, JointStatistic, StudyData};
use common::{gauss_solve, linear_data, linear_spec, normal_equations, rescale_columns};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn example4(n_full: usize, n_val: usize, seed: u64) -> (StudyData, AnalysisSpec) {
    let scenario = ScenarioSpec {
        n_full,
        n_val,
        ..ScenarioSpec::new(Scenario::by_name("example4").unwrap(), seed)
    };
    let data = scenario.dataset(0).unwrap();
    (data, scenario.scenario.generator().analysis_spec())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn surrogate_rescaling_leaves_the_augmented_estimate_unchanged() {
    let (data, mut spec) = example4(4000, 400, 301);
    spec.resample = ResamplePlan::default();
    let base = analyze(&data, &spec).unwrap();
    let factors = [("x1_s", 0.5), ("x2_s", 2.0), ("x3_s", 10.0), ("x4_s", -1.0)];
    let scaled = analyze(&rescale_columns(&data, &factors), &spec).unwrap();

    for (j, (_, f)) in factors.iter().enumerate() {
        let g0 = base.statistic.gamma_ful[j + 1];
        let g1 = scaled.statistic.gamma_ful[j + 1];
        assert!(rel(g1 * f, g0) < 1e-10);
    }
    let (se0, se1) = (base.estimate.se(), scaled.estimate.se());
    for j in 0..5 {
        assert!(rel(base.estimate.beta_aug[j], scaled.estimate.beta_aug[j]) < 1e-8);
        assert!(rel(se0[j], se1[j]) < 1e-8);
    }
}

#[test]
fn full_validation_reproduces_the_validation_fit() {
    let (data, spec) = example4(300, 300, 302);
    let a = analyze(&data, &spec).unwrap();
    assert!(a.estimate.diagnostics.no_augmentation);
    assert_eq!(a.estimate.beta_aug, a.statistic.beta_val);
    assert_eq!(a.estimate.var_aug, a.cov.blocks.sigma);
}

#[test]
fn grouped_jackknife_pipeline_matches_literal_refits() {
    let (data, mut spec) = example4(400, 100, 303);
    spec.resample = ResamplePlan::jackknife(GroupCount::Fixed(20));
    let result = analyze(&data, &spec).unwrap();

    let problem = Problem::new(&data, &spec).unwrap();
    let groups = jackknife_groups(&problem, GroupCount::Fixed(20), GroupAssignment::RoundRobin).unwrap();

    let col = |name: &str| data.column(name).unwrap().to_vec();
    let refs: Vec<Vec<f64>> = (1..=4).map(|j| col(&format!("x{j}"))).collect();
    let surs: Vec<Vec<f64>> = (1..=4).map(|j| col(&format!("x{j}_s"))).collect();
    let (y, ys) = (col("y"), col("y_s"));
    let validated = data.validated().to_vec();
    let row = |cols: &[Vec<f64>], i: usize| -> Vec<f64> {
        std::iter::once(1.0).chain(cols.iter().map(|c| c[i])).collect()
    };
    let statistic = |keep: &[usize]| -> Vec<f64> {
        let val: Vec<usize> = keep.iter().copied().filter(|&i| validated[i]).collect();
        let fit = |rows: &[usize], cols: &[Vec<f64>], out: &[f64]| {
            let x: Vec<Vec<f64>> = rows.iter().map(|&i| row(cols, i)).collect();
            let yy: Vec<f64> = rows.iter().map(|&i| out[i]).collect();
            normal_equations(&x, &yy, &vec![1.0; rows.len()])
        };
        let beta = fit(&val, &refs, &y);
        let gv = fit(&val, &surs, &ys);
        let gf = fit(keep, &surs, &ys);
        beta.into_iter().chain(gv.iter().zip(&gf).map(|(a, b)| a - b)).collect()
    };

    let all: Vec<usize> = (0..400).collect();
    let full = statistic(&all);
    let reps: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let keep: Vec<usize> = all.iter().copied().filter(|i| !g.contains(i)).collect();
            statistic(&keep)
        })
        .collect();
    let g = reps.len() as f64;
    let d = full.len();
    let mean: Vec<f64> = (0..d).map(|j| reps.iter().map(|r| r[j]).sum::<f64>() / g).collect();
    let cov = |a: usize, b: usize| {
        reps.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() * (g - 1.0) / g
    };
    let (p, q) = (5, 5);
    let k: Vec<Vec<f64>> = (0..q).map(|a| (0..q).map(|b| cov(p + a, p + b)).collect()).collect();
    let diff = full[p..].to_vec();
    let kinv_diff = gauss_solve(k.clone(), diff);
    for i in 0..p {
        let adj: f64 = (0..q).map(|a| cov(i, p + a) * kinv_diff[a]).sum();
        let expect = full[i] - adj;
        assert!(rel(result.estimate.beta_aug[i], expect) < 1e-10, "{i}");
        let omega_row: Vec<f64> = (0..q).map(|a| cov(i, p + a)).collect();
        let kinv_omega = gauss_solve(k.clone(), omega_row.clone());
        let var = cov(i, i) - omega_row.iter().zip(&kinv_omega).map(|(a, b)| a * b).sum::<f64>();
        assert!(rel(result.estimate.var_aug[(i, i)], var) < 1e-9, "{i}");
    }
}

#[test]
fn augmentation_never_increases_variance_on_examples() {
    let (data, spec) = example4(2000, 200, 304);
    let a = analyze(&data, &spec).unwrap();
    for i in 0..5 {
        assert!(a.estimate.var_aug[(i, i)] <= a.cov.blocks.sigma[(i, i)] + 1e-10);
    }
    let data = linear_data(200, 40, 305);
    let a = analyze(&data, &linear_spec()).unwrap();
    for i in 0..3 {
        assert!(a.estimate.var_aug[(i, i)] <= a.cov.blocks.sigma[(i, i)] + 1e-10);
    }
}

/// Random joint covariance `[[Σ, Ω], [Ωᵀ, K]] = AAᵀ`.
fn random_blocks(p: usize, q: usize, entries: &[f64]) -> CovBlocks {
    let d = p + q;
    let a = DMatrix::from_fn(d, d + 2, |i, j| entries[(i * (d + 2) + j) % entries.len()]);
    let full = &a * a.transpose() + DMatrix::identity(d, d) * 1e-3;
    let mut blocks = CovBlocks::new(
        full.view((0, 0), (p, p)).into_owned(),
        full.view((0, p), (p, q)).into_owned(),
        full.view((p, p), (q, q)).into_owned(),
    );
    blocks.gamma_ful = Some(blocks.k.clone());
    blocks
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn augmented_variance_is_bounded_by_sigma(
        entries in prop::collection::vec(-2.0f64..2.0, 30..60),
        p in 1usize..4, q in 1usize..4,
    ) {
        let blocks = random_blocks(p, q, &entries);
        let js = JointStatistic::new(vec![0.3; p], vec![0.1; q], vec![0.0; q]);
        let est = augment(&js, &blocks, 0.05).unwrap();
        // Σ − var_aug = ΩK⁻¹Ωᵀ is PSD
        let gap = &blocks.sigma - &est.var_aug;
        let eig = gap.symmetric_eigen().eigenvalues;
        prop_assert!(eig.min() > -1e-9 * blocks.sigma.amax());
        for i in 0..p {
            prop_assert!(est.var_aug[(i, i)] <= blocks.sigma[(i, i)] + 1e-10);
        }
    }

    #[test]
    fn zero_difference_returns_the_validation_estimate(
        entries in prop::collection::vec(-2.0f64..2.0, 30..60),
        beta in prop::collection::vec(-5.0f64..5.0, 3),
    ) {
        let blocks = random_blocks(3, 2, &entries);
        let js = JointStatistic::new(beta.clone(), vec![0.7, -0.2], vec![0.7, -0.2]);
        let est = augment(&js, &blocks, 0.05).unwrap();
        prop_assert_eq!(est.beta_aug, beta);
    }

    #[test]
    fn adjustment_is_linear_in_the_difference(
        entries in prop::collection::vec(-2.0f64..2.0, 30..60),
        t in -3.0f64..3.0,
    ) {
        let blocks = random_blocks(2, 2, &entries);
        let base = JointStatistic::new(vec![1.0, 2.0], vec![0.4, 0.1], vec![0.0, 0.0]);
        let scaled = JointStatistic::new(vec![1.0, 2.0], vec![0.4 * t, 0.1 * t], vec![0.0, 0.0]);
        let a = augment(&base, &blocks, 0.05).unwrap();
        let b = augment(&scaled, &blocks, 0.05).unwrap();
        let da = DVector::from_vec(vec![a.beta_aug[0] - 1.0, a.beta_aug[1] - 2.0]);
        let db = DVector::from_vec(vec![b.beta_aug[0] - 1.0, b.beta_aug[1] - 2.0]);
        prop_assert!((da * t - db).amax() < 1e-8 * (1.0 + a.beta_aug.iter().fold(0.0f64, |m, v| m.max(v.abs()))));
    }
}
