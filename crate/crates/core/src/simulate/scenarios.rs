use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{misclassify, Generator};
use crate::analysis::{AnalysisSpec, OutcomeColumns, OutcomeSpec, PredictorSpec, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::model::{Family, Ties};
use crate::resample::ResamplePlan;
use crate::rng::StreamRng;
use crate::study::StudyData;

pub const VALIDATION_COLUMN: &str = "val";

/// Sensitivity and specificity of a misclassified 0/1 variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub sens: f64,
    pub spec: f64,
}

impl Accuracy {
    pub const PERFECT: Accuracy = Accuracy {
        sens: 1.0,
        spec: 1.0,
    };

    pub const fn new(sens: f64, spec: f64) -> Self {
        Self { sens, spec }
    }

    fn apply(self, truth: bool, rng: &mut StreamRng) -> bool {
        misclassify(truth, self.sens, self.spec, rng)
    }

    fn check(self, what: &str) -> Result<()> {
        let ok = |v: f64| (0.0..=1.0).contains(&v);
        if ok(self.sens) && ok(self.spec) {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!(
                "{what}: sensitivity and specificity must lie in [0, 1]"
            )))
        }
    }
}

/// Logistic outcome with differential outcome misclassification; all
/// predictors observed without error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example1 {
    pub beta: [f64; 5],
    pub p_x1: f64,
    pub p_x2: f64,
    /// Outcome accuracy when X1 = 1.
    pub outcome_x1: Accuracy,
    /// Outcome accuracy when X1 = 0.
    pub outcome_x0: Accuracy,
}

impl Default for Example1 {
    fn default() -> Self {
        Self {
            beta: [-0.5, 0.5, 0.2, 1.0, 0.5],
            p_x1: 0.25,
            p_x2: 0.15,
            outcome_x1: Accuracy::new(0.95, 0.80),
            outcome_x0: Accuracy::new(0.85, 0.90),
        }
    }
}

impl Example1 {
    pub fn without_error() -> Self {
        Self {
            outcome_x1: Accuracy::PERFECT,
            outcome_x0: Accuracy::PERFECT,
            ..Self::default()
        }
    }
}

/// Exponential survival with error in time, event, X1 and X3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example2 {
    /// Log baseline hazard followed by the four log hazard ratios.
    pub beta: [f64; 5],
    pub p_x1: f64,
    pub p_x2: f64,
    pub censor_rate: f64,
    pub max_follow_up: f64,
    /// SD of the normal multiplier on the log scale of the surrogate time.
    pub time_error_sd: f64,
    /// Event accuracy when X1 = 1.
    pub event_x1: Accuracy,
    /// Event accuracy when X1 = 0.
    pub event_x0: Accuracy,
    /// X1 accuracy when E = 1.
    pub x1_event: Accuracy,
    /// X1 accuracy when E = 0.
    pub x1_censored: Accuracy,
    /// Replace X3 by the rescaled `max(0, X3 + 2)²` before adding noise.
    pub x3_quadratic: bool,
    pub x3_target_sd: f64,
    /// The X3 noise SD is `max(floor, slope · (X3 + 2))`.
    pub x3_noise_floor: f64,
    pub x3_noise_slope: f64,
}

impl Default for Example2 {
    fn default() -> Self {
        Self {
            beta: [-0.5, 0.5, 0.2, 1.0, 0.5],
            p_x1: 0.25,
            p_x2: 0.15,
            censor_rate: 0.3,
            max_follow_up: 3.0,
            time_error_sd: 0.05,
            event_x1: Accuracy::new(0.90, 0.95),
            event_x0: Accuracy::new(0.95, 0.90),
            x1_event: Accuracy::new(0.95, 0.95),
            x1_censored: Accuracy::new(0.90, 0.90),
            x3_quadratic: true,
            x3_target_sd: 0.9,
            x3_noise_floor: 0.05,
            x3_noise_slope: 0.05,
        }
    }
}

impl Example2 {
    pub fn without_error() -> Self {
        Self {
            time_error_sd: 0.0,
            event_x1: Accuracy::PERFECT,
            event_x0: Accuracy::PERFECT,
            x1_event: Accuracy::PERFECT,
            x1_censored: Accuracy::PERFECT,
            x3_quadratic: false,
            x3_noise_floor: 0.0,
            x3_noise_slope: 0.0,
            ..Self::default()
        }
    }
}

/// Linear outcome with differential outcome error, X1 misclassification
/// and two error-prone surrogates for X4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example3 {
    pub beta: [f64; 5],
    pub p_x1: f64,
    pub p_x2: f64,
    /// Surrogate Y is shifted by `−shift` when X1 = 1 and `+shift` otherwise.
    pub outcome_shift: f64,
    pub outcome_noise_sd: f64,
    /// X1 accuracy when the model error is positive.
    pub x1_positive: Accuracy,
    /// X1 accuracy otherwise.
    pub x1_negative: Accuracy,
    pub x4_slopes: [f64; 2],
    pub x4_noise_sd: f64,
}

impl Default for Example3 {
    fn default() -> Self {
        Self {
            beta: [-0.5, 0.5, 0.2, 0.5, 1.0],
            p_x1: 0.25,
            p_x2: 0.15,
            outcome_shift: 0.5,
            outcome_noise_sd: 0.1,
            x1_positive: Accuracy::new(0.95, 0.91),
            x1_negative: Accuracy::new(0.90, 0.90),
            x4_slopes: [1.1, 0.9],
            x4_noise_sd: 0.05,
        }
    }
}

impl Example3 {
    pub fn without_error() -> Self {
        Self {
            outcome_shift: 0.0,
            outcome_noise_sd: 0.0,
            x1_positive: Accuracy::PERFECT,
            x1_negative: Accuracy::PERFECT,
            x4_slopes: [1.0, 1.0],
            x4_noise_sd: 0.0,
            ..Self::default()
        }
    }
}

/// Linear outcome whose surrogates are exact affine rescalings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example4 {
    pub beta: [f64; 5],
    pub outcome_offset: f64,
    pub outcome_scale: f64,
    pub x_scales: [f64; 4],
}

impl Default for Example4 {
    fn default() -> Self {
        Self {
            beta: [2.0, 0.2, 0.3, 0.7, 0.4],
            outcome_offset: 0.14,
            outcome_scale: 0.9,
            x_scales: [0.82, 1.05, 0.80, 1.05],
        }
    }
}

fn validation_flags(n_full: usize, n_val: usize, rng: &mut StreamRng) -> Result<Vec<bool>> {
    if n_val == 0 || n_val > n_full {
        return Err(Error::InvalidSpec(format!(
            "validation size {n_val} must lie in 1..={n_full}"
        )));
    }
    let mut flags = vec![false; n_full];
    for i in index::sample(rng, n_full, n_val) {
        flags[i] = true;
    }
    Ok(flags)
}

fn bernoulli(p: f64, rng: &mut StreamRng) -> bool {
    rng.random::<f64>() < p
}

fn normal(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}

fn as_f64(v: &[bool]) -> Vec<f64> {
    v.iter().map(|&b| f64::from(u8::from(b))).collect()
}

/// NaN outside the validation subsample.
fn reference_only(values: Vec<f64>, flags: &[bool]) -> Vec<f64> {
    values
        .into_iter()
        .zip(flags)
        .map(|(v, &f)| if f { v } else { f64::NAN })
        .collect()
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{what} must lie in [0, 1], got {p}")))
    }
}

fn predictor(name: &str, reference: &str, surrogates: &[&str], perfect: bool) -> PredictorSpec {
    PredictorSpec {
        name: name.into(),
        reference: reference.into(),
        surrogates: surrogates.iter().map(|s| s.to_string()).collect(),
        perfect,
    }
}

fn spec_for(family: Family, outcome: OutcomeSpec, predictors: Vec<PredictorSpec>) -> AnalysisSpec {
    AnalysisSpec {
        schema_version: SCHEMA_VERSION,
        family,
        outcome,
        predictors,
        validation: VALIDATION_COLUMN.into(),
        cluster: None,
        weight: None,
        resample: ResamplePlan::default(),
        alpha: 0.05,
        ties: Ties::default(),
    }
}

fn single_outcome() -> OutcomeSpec {
    OutcomeSpec {
        reference: OutcomeColumns::Single("y".into()),
        surrogate: OutcomeColumns::Single("y_s".into()),
        perfect: false,
    }
}

impl Generator for Example1 {
    fn name(&self) -> &str {
        "example1"
    }

    fn analysis_spec(&self) -> AnalysisSpec {
        let preds = (1..=4)
            .map(|j| {
                let c = format!("x{j}");
                predictor(&c, &c, &[&c], true)
            })
            .collect();
        spec_for(Family::Logistic, single_outcome(), preds)
    }

    fn true_beta(&self) -> Vec<f64> {
        self.beta.to_vec()
    }

    fn generate(&self, n_full: usize, n_val: usize, rng: &mut StreamRng) -> Result<StudyData> {
        check_probability(self.p_x1, "p_x1")?;
        check_probability(self.p_x2, "p_x2")?;
        self.outcome_x1.check("outcome accuracy")?;
        self.outcome_x0.check("outcome accuracy")?;
        let b = &self.beta;
        let mut x = vec![Vec::with_capacity(n_full); 4];
        let (mut y, mut y_s) = (Vec::with_capacity(n_full), Vec::with_capacity(n_full));
        for _ in 0..n_full {
            let x1 = bernoulli(self.p_x1, rng);
            let x2 = bernoulli(self.p_x2, rng);
            let row = [f64::from(u8::from(x1)), f64::from(u8::from(x2)), normal(rng), normal(rng)];
            let eta = b[0] + (0..4).map(|j| b[j + 1] * row[j]).sum::<f64>();
            let yi = bernoulli(1.0 / (1.0 + (-eta).exp()), rng);
            let acc = if x1 { self.outcome_x1 } else { self.outcome_x0 };
            y_s.push(acc.apply(yi, rng));
            y.push(yi);
            for (col, v) in x.iter_mut().zip(row) {
                col.push(v);
            }
        }
        let flags = validation_flags(n_full, n_val, rng)?;
        let mut data = StudyData::new(flags.clone())
            .with_column("y", reference_only(as_f64(&y), &flags))?
            .with_column("y_s", as_f64(&y_s))?;
        for (j, col) in x.into_iter().enumerate() {
            data.push_column(format!("x{}", j + 1), col)?;
        }
        data.push_column(VALIDATION_COLUMN, as_f64(&flags))?;
        Ok(data)
    }
}

impl Generator for Example2 {
    fn name(&self) -> &str {
        "example2"
    }

    fn analysis_spec(&self) -> AnalysisSpec {
        let outcome = OutcomeSpec {
            reference: OutcomeColumns::Survival {
                time: "time".into(),
                event: "event".into(),
            },
            surrogate: OutcomeColumns::Survival {
                time: "time_s".into(),
                event: "event_s".into(),
            },
            perfect: false,
        };
        let preds = vec![
            predictor("x1", "x1", &["x1_s"], false),
            predictor("x2", "x2", &["x2"], true),
            predictor("x3", "x3", &["x3_s"], false),
            predictor("x4", "x4", &["x4"], true),
        ];
        spec_for(Family::Cox, outcome, preds)
    }

    /// The log hazard ratios; the log baseline hazard is not estimable.
    fn true_beta(&self) -> Vec<f64> {
        self.beta[1..].to_vec()
    }

    fn generate(&self, n_full: usize, n_val: usize, rng: &mut StreamRng) -> Result<StudyData> {
        check_probability(self.p_x1, "p_x1")?;
        check_probability(self.p_x2, "p_x2")?;
        for acc in [self.event_x1, self.event_x0, self.x1_event, self.x1_censored] {
            acc.check("misclassification")?;
        }
        let censor = Exp::new(self.censor_rate)
            .map_err(|e| Error::InvalidSpec(format!("censoring rate: {e}")))?;
        let time_noise = Normal::new(0.0, self.time_error_sd)
            .map_err(|e| Error::InvalidSpec(format!("time error sd: {e}")))?;
        let b = &self.beta;
        let mut x = vec![Vec::with_capacity(n_full); 4];
        let mut cols: [Vec<f64>; 5] = Default::default();
        let [time, event, time_s, event_s, x1_s] = &mut cols;
        let mut x3_noise = Vec::with_capacity(n_full);
        for _ in 0..n_full {
            let x1 = bernoulli(self.p_x1, rng);
            let x2 = bernoulli(self.p_x2, rng);
            let row = [f64::from(u8::from(x1)), f64::from(u8::from(x2)), normal(rng), normal(rng)];
            let rate = (b[0] + (0..4).map(|j| b[j + 1] * row[j]).sum::<f64>()).exp();
            let t = Exp::new(rate)
                .map_err(|e| Error::InvalidSpec(format!("event rate: {e}")))?
                .sample(rng);
            let c = censor.sample(rng);
            let limit = c.min(self.max_follow_up);
            let e = t <= limit;
            let t_s = t * time_noise.sample(rng).exp();
            let ev_acc = if x1 { self.event_x1 } else { self.event_x0 };
            let e_s = ev_acc.apply(e, rng);
            let x_acc = if e { self.x1_event } else { self.x1_censored };
            let x1_sur = x_acc.apply(x1, rng);
            x3_noise.push(normal(rng));

            time.push(t.min(limit));
            event.push(f64::from(u8::from(e)));
            time_s.push(t_s.min(limit));
            event_s.push(f64::from(u8::from(e_s)));
            x1_s.push(f64::from(u8::from(x1_sur)));
            for (col, v) in x.iter_mut().zip(row) {
                col.push(v);
            }
        }

        let x3_s = if self.x3_quadratic {
            let q: Vec<f64> = x[2].iter().map(|&v| (v + 2.0).max(0.0).powi(2)).collect();
            let sd = sample_sd(&q);
            let scale = if sd > 0.0 { self.x3_target_sd / sd } else { 1.0 };
            q.iter()
                .zip(&x[2])
                .zip(&x3_noise)
                .map(|((&qi, &x3), &z)| {
                    let noise_sd = self.x3_noise_floor.max(self.x3_noise_slope * (x3 + 2.0));
                    qi * scale + noise_sd * z
                })
                .collect()
        } else {
            x[2].iter()
                .zip(&x3_noise)
                .map(|(&x3, &z)| {
                    let noise_sd = self.x3_noise_floor.max(self.x3_noise_slope * (x3 + 2.0));
                    x3 + noise_sd * z
                })
                .collect()
        };

        let flags = validation_flags(n_full, n_val, rng)?;
        let [time, event, time_s, event_s, x1_s] = cols;
        let mut x = x.into_iter();
        let mut data = StudyData::new(flags.clone())
            .with_column("time", reference_only(time, &flags))?
            .with_column("event", reference_only(event, &flags))?
            .with_column("time_s", time_s)?
            .with_column("event_s", event_s)?;
        data.push_column("x1", reference_only(x.next().unwrap(), &flags))?;
        data.push_column("x1_s", x1_s)?;
        data.push_column("x2", x.next().unwrap())?;
        data.push_column("x3", reference_only(x.next().unwrap(), &flags))?;
        data.push_column("x3_s", x3_s)?;
        data.push_column("x4", x.next().unwrap())?;
        data.push_column(VALIDATION_COLUMN, as_f64(&flags))?;
        Ok(data)
    }
}

impl Generator for Example3 {
    fn name(&self) -> &str {
        "example3"
    }

    fn analysis_spec(&self) -> AnalysisSpec {
        let preds = vec![
            predictor("x1", "x1", &["x1_s"], false),
            predictor("x2", "x2", &["x2"], true),
            predictor("x3", "x3", &["x3"], true),
            predictor("x4", "x4", &["x4_s", "x4_d"], false),
        ];
        spec_for(Family::Linear, single_outcome(), preds)
    }

    fn true_beta(&self) -> Vec<f64> {
        self.beta.to_vec()
    }

    fn generate(&self, n_full: usize, n_val: usize, rng: &mut StreamRng) -> Result<StudyData> {
        check_probability(self.p_x1, "p_x1")?;
        check_probability(self.p_x2, "p_x2")?;
        self.x1_positive.check("X1 accuracy")?;
        self.x1_negative.check("X1 accuracy")?;
        let b = &self.beta;
        let mut x = vec![Vec::with_capacity(n_full); 4];
        let mut cols: [Vec<f64>; 5] = Default::default();
        let [y, y_s, x1_s, x4_s, x4_d] = &mut cols;
        for _ in 0..n_full {
            let x1 = bernoulli(self.p_x1, rng);
            let x2 = bernoulli(self.p_x2, rng);
            let row = [f64::from(u8::from(x1)), f64::from(u8::from(x2)), normal(rng), normal(rng)];
            let err = normal(rng);
            let yi = b[0] + (0..4).map(|j| b[j + 1] * row[j]).sum::<f64>() + err;
            let shift = if x1 { -self.outcome_shift } else { self.outcome_shift };
            y_s.push(yi + shift + self.outcome_noise_sd * normal(rng));
            let acc = if err > 0.0 { self.x1_positive } else { self.x1_negative };
            x1_s.push(f64::from(u8::from(acc.apply(x1, rng))));
            x4_s.push(self.x4_slopes[0] * row[3] + self.x4_noise_sd * normal(rng));
            x4_d.push(self.x4_slopes[1] * row[3] + self.x4_noise_sd * normal(rng));
            y.push(yi);
            for (col, v) in x.iter_mut().zip(row) {
                col.push(v);
            }
        }
        let flags = validation_flags(n_full, n_val, rng)?;
        let [y, y_s, x1_s, x4_s, x4_d] = cols;
        let mut x = x.into_iter();
        let mut data = StudyData::new(flags.clone())
            .with_column("y", reference_only(y, &flags))?
            .with_column("y_s", y_s)?;
        data.push_column("x1", reference_only(x.next().unwrap(), &flags))?;
        data.push_column("x1_s", x1_s)?;
        data.push_column("x2", x.next().unwrap())?;
        data.push_column("x3", x.next().unwrap())?;
        data.push_column("x4", reference_only(x.next().unwrap(), &flags))?;
        data.push_column("x4_s", x4_s)?;
        data.push_column("x4_d", x4_d)?;
        data.push_column(VALIDATION_COLUMN, as_f64(&flags))?;
        Ok(data)
    }
}

impl Generator for Example4 {
    fn name(&self) -> &str {
        "example4"
    }

    fn analysis_spec(&self) -> AnalysisSpec {
        let preds = (1..=4)
            .map(|j| {
                let c = format!("x{j}");
                predictor(&c, &c, &[&format!("x{j}_s")], false)
            })
            .collect();
        spec_for(Family::Linear, single_outcome(), preds)
    }

    fn true_beta(&self) -> Vec<f64> {
        self.beta.to_vec()
    }

    fn generate(&self, n_full: usize, n_val: usize, rng: &mut StreamRng) -> Result<StudyData> {
        let b = &self.beta;
        let mut x = vec![Vec::with_capacity(n_full); 4];
        let mut y = Vec::with_capacity(n_full);
        for _ in 0..n_full {
            let row = [normal(rng), normal(rng), normal(rng), normal(rng)];
            y.push(b[0] + (0..4).map(|j| b[j + 1] * row[j]).sum::<f64>() + normal(rng));
            for (col, v) in x.iter_mut().zip(row) {
                col.push(v);
            }
        }
        let y_s = y
            .iter()
            .map(|&v| self.outcome_offset + self.outcome_scale * v)
            .collect();
        let flags = validation_flags(n_full, n_val, rng)?;
        let mut data = StudyData::new(flags.clone())
            .with_column("y", reference_only(y, &flags))?
            .with_column("y_s", y_s)?;
        for (j, col) in x.into_iter().enumerate() {
            let sur = col.iter().map(|&v| self.x_scales[j] * v).collect();
            data.push_column(format!("x{}", j + 1), reference_only(col, &flags))?;
            data.push_column(format!("x{}_s", j + 1), sur)?;
        }
        data.push_column(VALIDATION_COLUMN, as_f64(&flags))?;
        Ok(data)
    }
}

fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
