//! Independent reference implementations used as oracles, plus small data
//! builders. Nothing here calls the library's fitting or resampling code
//! except where a test states that it does.
#![allow(dead_code)]

use augreg::analysis::AnalysisSpec;
use augreg::resample::compute_joint_statistic;
use augreg::StudyData;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Weighted least squares through the normal equations `XᵀWX β = XᵀWy`.
pub fn normal_equations(rows: &[Vec<f64>], y: &[f64], w: &[f64]) -> Vec<f64> {
    let p = rows[0].len();
    let mut a = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for ((r, &yi), &wi) in rows.iter().zip(y).zip(w) {
        for j in 0..p {
            b[j] += wi * r[j] * yi;
            for k in 0..p {
                a[j][k] += wi * r[j] * r[k];
            }
        }
    }
    gauss_solve(a, b)
}

/// Logistic fit with an intercept and one 0/1 predictor, from the 2×2 table:
/// the intercept is the log-odds at x = 0 and the slope the log odds ratio.
pub fn two_by_two_logit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mut n = [[0.0f64; 2]; 2];
    for (&xi, &yi) in x.iter().zip(y) {
        n[xi as usize][yi as usize] += 1.0;
    }
    let logit0 = (n[0][1] / n[0][0]).ln();
    let logit1 = (n[1][1] / n[1][0]).ln();
    (logit0, logit1 - logit0)
}

/// Efron partial log-likelihood of a single-predictor Cox model, computed
/// directly from the definition in O(n²).
pub fn cox_efron_loglik(beta: f64, x: &[f64], time: &[f64], event: &[bool]) -> f64 {
    let n = x.len();
    let mut ll = 0.0;
    let mut done = vec![false; n];
    for i in 0..n {
        if !event[i] || done[i] {
            continue;
        }
        let tied: Vec<usize> = (0..n).filter(|&j| event[j] && time[j] == time[i]).collect();
        for &j in &tied {
            done[j] = true;
        }
        let risk: f64 = (0..n).filter(|&j| time[j] >= time[i]).map(|j| (beta * x[j]).exp()).sum();
        let tie_sum: f64 = tied.iter().map(|&j| (beta * x[j]).exp()).sum();
        let d = tied.len() as f64;
        for (k, &j) in tied.iter().enumerate() {
            ll += beta * x[j] - (risk - k as f64 / d * tie_sum).ln();
        }
    }
    ll
}

/// Golden-section search for the maximizer of a unimodal `f` on `[lo, hi]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    (lo + hi) / 2.0
}

/// `data` restricted to `keep` (in order).
pub fn subset(data: &StudyData, keep: &[usize]) -> StudyData {
    let flags = keep.iter().map(|&i| data.validated()[i]).collect();
    let mut out = StudyData::new(flags);
    for name in data.names() {
        let col = data.column(name).unwrap();
        out.push_column(name.clone(), keep.iter().map(|&i| col[i]).collect())
            .unwrap();
    }
    if let Some(c) = data.cluster_labels() {
        out = out
            .with_clusters(keep.iter().map(|&i| c[i].clone()).collect())
            .unwrap();
    }
    if let Some(w) = data.weights() {
        out = out.with_weights(keep.iter().map(|&i| w[i]).collect()).unwrap();
    }
    out
}

/// Covariance blocks `(Σ, Ω, K)` of the delete-one jackknife obtained by
/// literally deleting each row and refitting all three models.
pub fn brute_force_jackknife(
    data: &StudyData,
    spec: &AnalysisSpec,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = data.n_full();
    let mut stats = Vec::new();
    for drop in 0..n {
        let keep: Vec<usize> = (0..n).filter(|&i| i != drop).collect();
        let js = compute_joint_statistic(&subset(data, &keep), spec).unwrap();
        let mut v = js.beta_val.clone();
        v.extend(js.gamma_val.iter().zip(&js.gamma_ful).map(|(a, b)| a - b));
        stats.push(v);
    }
    let p = spec.n_beta();
    let d = stats[0].len();
    let g = stats.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| stats.iter().map(|s| s[j]).sum::<f64>() / g).collect();
    let mut cov = DMatrix::zeros(d, d);
    for s in &stats {
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += (s[a] - mean[a]) * (s[b] - mean[b]);
            }
        }
    }
    cov *= (g - 1.0) / g;
    let q = d - p;
    (
        cov.view((0, 0), (p, p)).into_owned(),
        cov.view((0, p), (p, q)).into_owned(),
        cov.view((p, p), (q, q)).into_owned(),
    )
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn linear_spec() -> AnalysisSpec {
    AnalysisSpec::from_json(
        r#"{"schema_version": 1, "family": "linear",
            "outcome": {"reference": "y", "surrogate": "y_s"},
            "predictors": [
                {"name": "x", "reference": "x", "surrogates": ["x_s"]},
                {"name": "z", "reference": "z", "surrogates": ["z"], "perfect": true}
            ],
            "validation": "val"}"#,
    )
    .unwrap()
}

/// Linear data for [`linear_spec`]: `n` rows, the first `n_val` validated.
pub fn linear_data(n: usize, n_val: usize, seed: u64) -> StudyData {
    let mut rng = augreg::rng::stream(seed, 0);
    let flags: Vec<bool> = (0..n).map(|i| i < n_val).collect();
    let (mut y, mut ys, mut x, mut xs, mut z) = (vec![], vec![], vec![], vec![], vec![]);
    for i in 0..n {
        let xi = normal(&mut rng);
        let zi = normal(&mut rng);
        let yi = 1.0 + 0.5 * xi - 0.3 * zi + normal(&mut rng);
        let obs = flags[i];
        x.push(if obs { xi } else { f64::NAN });
        y.push(if obs { yi } else { f64::NAN });
        xs.push(0.8 * xi + 0.4 * normal(&mut rng));
        ys.push(0.2 + yi + 0.3 * normal(&mut rng));
        z.push(zi);
    }
    let val = flags.iter().map(|&f| f64::from(u8::from(f))).collect();
    StudyData::new(flags)
        .with_column("y", y)
        .unwrap()
        .with_column("y_s", ys)
        .unwrap()
        .with_column("x", x)
        .unwrap()
        .with_column("x_s", xs)
        .unwrap()
        .with_column("z", z)
        .unwrap()
        .with_column("val", val)
        .unwrap()
}

pub fn max_rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.amax().max(b.amax()).max(f64::MIN_POSITIVE);
    (a - b).amax() / scale
}

/// Copy of `data` with each named column multiplied by its factor.
pub fn rescale_columns(data: &StudyData, factors: &[(&str, f64)]) -> StudyData {
    let mut out = StudyData::new(data.validated().to_vec());
    for name in data.names() {
        let col = data.column(name).unwrap();
        let f = factors.iter().find(|(n, _)| n == name).map_or(1.0, |(_, f)| *f);
        out.push_column(name.clone(), col.iter().map(|v| v * f).collect())
            .unwrap();
    }
    out
}

/// Runs the `augreg` binary with `args`.
pub fn run_cli<I, S>(args: I) -> std::process::Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    std::process::Command::new(env!("CARGO_BIN_EXE_augreg"))
        .args(args)
        .env_remove("AUGREG_THREADS")
        .output()
        .expect("failed to start augreg")
}

pub fn schema(name: &str) -> serde_json::Value {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("schema").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Schema violations of `instance`, rendered as messages.
pub fn schema_errors(schema: &serde_json::Value, instance: &serde_json::Value) -> Vec<String> {
    let validator = jsonschema::validator_for(schema).expect("schema compiles");
    validator.iter_errors(instance).map(|e| e.to_string()).collect()
}
