use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisSpec, OutcomeColumns};
use crate::error::{Error, ModelRole, Result};
use crate::model::{CaseWeights, DesignMatrix, Family, FitOptions, ModelData, Response};
use crate::study::StudyData;

/// Coefficients of the three fits behind an augmented estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointStatistic {
    pub beta_val: Vec<f64>,
    pub gamma_val: Vec<f64>,
    pub gamma_ful: Vec<f64>,
    /// `gamma_val − gamma_ful`
    pub gamma_diff: Vec<f64>,
}

impl JointStatistic {
    pub fn new(beta_val: Vec<f64>, gamma_val: Vec<f64>, gamma_ful: Vec<f64>) -> Self {
        let gamma_diff = gamma_val.iter().zip(&gamma_ful).map(|(v, f)| v - f).collect();
        Self {
            beta_val,
            gamma_val,
            gamma_ful,
            gamma_diff,
        }
    }

    pub fn p(&self) -> usize {
        self.beta_val.len()
    }

    pub fn q(&self) -> usize {
        self.gamma_val.len()
    }

    /// `[beta_val, gamma_diff, gamma_ful]`, the vector whose resampling
    /// covariance yields Σ, Ω, K and the γ_ful companion block.
    pub(crate) fn stacked(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.p() + 2 * self.q());
        v.extend_from_slice(&self.beta_val);
        v.extend_from_slice(&self.gamma_diff);
        v.extend_from_slice(&self.gamma_ful);
        v
    }
}

/// The three regressions of an analysis, prepared once for repeated
/// reweighted fits.
#[derive(Debug, Clone)]
pub struct Problem {
    family: Family,
    opts: FitOptions,
    reference_val: ModelData,
    surrogate_val: ModelData,
    surrogate_ful: ModelData,
    /// Full-sample row index of each validated row.
    val_rows: Vec<usize>,
    /// Sampling weight per validated row, `None` when all are equal.
    sampling: Option<Vec<f64>>,
    units: Vec<usize>,
    n_units: usize,
    beta_labels: Vec<String>,
    gamma_labels: Vec<String>,
    gamma_to_beta: Vec<usize>,
}

impl Problem {
    pub fn new(data: &StudyData, spec: &AnalysisSpec) -> Result<Self> {
        spec.validate()?;
        data.validate(spec)?;
        let family = spec.family;
        let intercept = family.has_intercept();
        let val_rows = data.validated_rows();
        let design_err = |e| Error::InvalidData(format!("design: {e}"));

        let ref_cols: Vec<&[f64]> = spec
            .predictors
            .iter()
            .map(|p| data.column(&p.reference))
            .collect::<Result<_>>()?;
        let ref_cols: Vec<Vec<f64>> = ref_cols
            .iter()
            .map(|c| val_rows.iter().map(|&i| c[i]).collect())
            .collect();
        let ref_refs: Vec<&[f64]> = ref_cols.iter().map(Vec::as_slice).collect();
        let x_ref = design(&ref_refs, val_rows.len(), intercept).map_err(design_err)?;
        let y_ref = response(data, family, &spec.outcome.reference)?.select_rows(&val_rows);

        let sur_cols: Vec<&[f64]> = spec
            .predictors
            .iter()
            .flat_map(|p| p.surrogates.iter())
            .map(|c| data.column(c))
            .collect::<Result<_>>()?;
        let x_sur = design(&sur_cols, data.n_full(), intercept).map_err(design_err)?;
        let y_sur = response(data, family, &spec.outcome.surrogate)?;
        let x_sur_val = x_sur.select_rows(&val_rows);
        let y_sur_val = y_sur.select_rows(&val_rows);

        let sampling = data.weights().and_then(|w| {
            let sw: Vec<f64> = val_rows.iter().map(|&i| w[i]).collect();
            // equal weights carry no information; drop them so the weighted and
            // unweighted paths coincide exactly
            let all_equal = sw.iter().all(|&v| v == sw[0]);
            (!all_equal).then_some(sw)
        });

        let units = data.unit_ids();
        let n_units = units.iter().max().map_or(0, |m| m + 1);
        let build = |x, y| ModelData::new(family, x, y).map_err(design_err);
        Ok(Self {
            family,
            opts: FitOptions {
                ties: spec.ties,
                ..FitOptions::default()
            },
            reference_val: build(x_ref, y_ref)?,
            surrogate_val: build(x_sur_val, y_sur_val)?,
            surrogate_ful: build(x_sur, y_sur)?,
            val_rows,
            sampling,
            units,
            n_units,
            beta_labels: spec.beta_labels(),
            gamma_labels: spec.gamma_labels(),
            gamma_to_beta: spec.gamma_to_beta(),
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n_full(&self) -> usize {
        self.surrogate_ful.rows()
    }

    pub fn n_val(&self) -> usize {
        self.val_rows.len()
    }

    pub fn p(&self) -> usize {
        self.reference_val.design().cols()
    }

    pub fn q(&self) -> usize {
        self.surrogate_ful.design().cols()
    }

    pub fn beta_labels(&self) -> &[String] {
        &self.beta_labels
    }

    pub fn gamma_labels(&self) -> &[String] {
        &self.gamma_labels
    }

    pub fn gamma_to_beta(&self) -> &[usize] {
        &self.gamma_to_beta
    }

    pub fn val_rows(&self) -> &[usize] {
        &self.val_rows
    }

    pub(crate) fn units(&self) -> &[usize] {
        &self.units
    }

    pub(crate) fn n_units(&self) -> usize {
        self.n_units
    }

    pub(crate) fn reference_val(&self) -> &ModelData {
        &self.reference_val
    }

    pub(crate) fn surrogate_val(&self) -> &ModelData {
        &self.surrogate_val
    }

    pub(crate) fn surrogate_ful(&self) -> &ModelData {
        &self.surrogate_ful
    }

    /// The statistic on the data as given.
    pub fn joint_statistic(&self) -> Result<JointStatistic> {
        let ones = vec![1.0; self.n_full()];
        self.evaluate(&ones, None, false)
            .map_err(|(model, source)| Error::Fit { model, source })
    }

    /// The statistic with each full-sample row counted `mult[i]` times.
    ///
    /// With `reuse_validation`, a multiplicity vector that leaves every
    /// validated row at 1 reuses β_val and γ_val from `warm` instead of
    /// refitting. `warm` also supplies starting values for the iterative fits.
    pub(crate) fn evaluate(
        &self,
        mult: &[f64],
        warm: Option<&JointStatistic>,
        reuse_validation: bool,
    ) -> std::result::Result<JointStatistic, (ModelRole, crate::model::FitError)> {
        let untouched = self.val_rows.iter().all(|&i| mult[i] == 1.0);
        let (beta_val, gamma_val) = match warm {
            Some(w) if reuse_validation && untouched => (w.beta_val.clone(), w.gamma_val.clone()),
            _ => {
                let wv: Vec<f64> = match &self.sampling {
                    None => self.val_rows.iter().map(|&i| mult[i]).collect(),
                    Some(sw) => self.val_rows.iter().zip(sw).map(|(&i, s)| mult[i] * s).collect(),
                };
                let wv = CaseWeights::new(wv)
                    .map_err(|e| (ModelRole::ReferenceValidation, e))?;
                let beta = self
                    .reference_val
                    .fit(&wv, &self.opts, warm.map(|w| w.beta_val.as_slice()))
                    .map_err(|e| (ModelRole::ReferenceValidation, e))?;
                let gamma = self
                    .surrogate_val
                    .fit(&wv, &self.opts, warm.map(|w| w.gamma_val.as_slice()))
                    .map_err(|e| (ModelRole::SurrogateValidation, e))?;
                (beta.coefficients, gamma.coefficients)
            }
        };
        let wf = CaseWeights::new(mult.to_vec()).map_err(|e| (ModelRole::SurrogateFull, e))?;
        let gamma_ful = self
            .surrogate_ful
            .fit(&wf, &self.opts, warm.map(|w| w.gamma_ful.as_slice()))
            .map_err(|e| (ModelRole::SurrogateFull, e))?
            .coefficients;
        Ok(JointStatistic::new(beta_val, gamma_val, gamma_ful))
    }
}

fn design(
    columns: &[&[f64]],
    rows: usize,
    intercept: bool,
) -> std::result::Result<DesignMatrix, crate::model::FitError> {
    if columns.is_empty() && intercept {
        Ok(DesignMatrix::intercept_only(rows))
    } else {
        DesignMatrix::from_columns(columns, intercept)
    }
}

fn response(data: &StudyData, family: Family, cols: &OutcomeColumns) -> Result<Response> {
    let err = |e| Error::InvalidData(format!("outcome: {e}"));
    match (family, cols) {
        (Family::Cox, OutcomeColumns::Survival { time, event }) => {
            let t = data.column(time)?.to_vec();
            let e = data.column(event)?;
            let e = e
                .iter()
                .map(|&v| match v {
                    v if v == 1.0 => Ok(true),
                    v if v == 0.0 || v.is_nan() => Ok(false),
                    v => Err(Error::InvalidData(format!(
                        "event column `{event}` must be 0 or 1, found {v}"
                    ))),
                })
                .collect::<Result<Vec<bool>>>()?;
            // non-validated rows of reference columns are NaN; fill so the
            // full-length vector is well formed before subsetting
            let t = t.iter().map(|&v| if v.is_nan() { 1.0 } else { v }).collect();
            Response::survival(t, e).map_err(err)
        }
        (Family::Logistic, OutcomeColumns::Single(c)) => {
            let y = data.column(c)?.iter().map(|&v| if v.is_nan() { 0.0 } else { v });
            Response::binary(y.collect()).map_err(err)
        }
        (Family::Linear, OutcomeColumns::Single(c)) => {
            let y = data.column(c)?.iter().map(|&v| if v.is_nan() { 0.0 } else { v });
            Response::continuous(y.collect()).map_err(err)
        }
        _ => Err(Error::InvalidSpec(format!(
            "outcome columns do not match the {family} family"
        ))),
    }
}

/// β_val, γ_val and γ_ful for `data` under `spec`.
pub fn compute_joint_statistic(data: &StudyData, spec: &AnalysisSpec) -> Result<JointStatistic> {
    Problem::new(data, spec)?.joint_statistic()
}
