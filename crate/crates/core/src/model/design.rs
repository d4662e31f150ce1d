use super::FitError;

/// Dense row-major design matrix.
///
/// For linear and logistic models the first column is the intercept; Cox
/// designs carry no intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    has_intercept: bool,
}

impl DesignMatrix {
    /// Builds a design from predictor columns, prepending a column of ones
    /// when `intercept` is set.
    pub fn from_columns(columns: &[&[f64]], intercept: bool) -> Result<Self, FitError> {
        let rows = columns.first().map_or(0, |c| c.len());
        for c in columns {
            if c.len() != rows {
                return Err(FitError::LengthMismatch {
                    rows,
                    what: "predictor column",
                    len: c.len(),
                });
            }
        }
        let cols = columns.len() + usize::from(intercept);
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            if intercept {
                values.push(1.0);
            }
            values.extend(columns.iter().map(|c| c[i]));
        }
        Self::from_row_major(rows, cols, values, intercept)
    }

    /// A single column of ones.
    pub fn intercept_only(rows: usize) -> Self {
        Self {
            rows,
            cols: 1,
            values: vec![1.0; rows],
            has_intercept: true,
        }
    }

    pub fn from_row_major(
        rows: usize,
        cols: usize,
        values: Vec<f64>,
        has_intercept: bool,
    ) -> Result<Self, FitError> {
        if values.len() != rows * cols {
            return Err(FitError::LengthMismatch {
                rows,
                what: "value buffer",
                len: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(FitError::NonFiniteDesign {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self {
            rows,
            cols,
            values,
            has_intercept,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn has_intercept(&self) -> bool {
        self.has_intercept
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.values[i * self.cols + j]).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Copies the selected rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            values,
            has_intercept: self.has_intercept,
        }
    }

    /// `X · beta` for every row.
    pub fn linear_predictor(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.linear_predictor_into(beta, &mut out);
        out
    }

    pub(crate) fn linear_predictor_into(&self, beta: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), beta);
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Outcome data for one of the three families.
#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Continuous(Vec<f64>),
    /// 0/1 outcomes stored as `f64`.
    Binary(Vec<f64>),
    Survival { time: Vec<f64>, event: Vec<bool> },
}

impl Response {
    pub fn continuous(y: Vec<f64>) -> Result<Self, FitError> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(FitError::InvalidResponse("non-finite outcome".into()));
        }
        Ok(Response::Continuous(y))
    }

    pub fn binary(y: Vec<f64>) -> Result<Self, FitError> {
        if let Some(v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(FitError::InvalidResponse(format!(
                "binary outcome must be 0 or 1, found {v}"
            )));
        }
        Ok(Response::Binary(y))
    }

    pub fn survival(time: Vec<f64>, event: Vec<bool>) -> Result<Self, FitError> {
        if time.len() != event.len() {
            return Err(FitError::LengthMismatch {
                rows: time.len(),
                what: "event indicator",
                len: event.len(),
            });
        }
        if let Some(t) = time.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
            return Err(FitError::InvalidResponse(format!(
                "survival times must be positive and finite, found {t}"
            )));
        }
        Ok(Response::Survival { time, event })
    }

    pub fn len(&self) -> usize {
        match self {
            Response::Continuous(y) | Response::Binary(y) => y.len(),
            Response::Survival { time, .. } => time.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        match self {
            Response::Continuous(y) => Response::Continuous(idx.iter().map(|&i| y[i]).collect()),
            Response::Binary(y) => Response::Binary(idx.iter().map(|&i| y[i]).collect()),
            Response::Survival { time, event } => Response::Survival {
                time: idx.iter().map(|&i| time[i]).collect(),
                event: idx.iter().map(|&i| event[i]).collect(),
            },
        }
    }
}

/// Non-negative per-row case weights with a positive total.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseWeights(Vec<f64>);

impl CaseWeights {
    pub fn ones(n: usize) -> Self {
        CaseWeights(vec![1.0; n])
    }

    pub fn new(w: Vec<f64>) -> Result<Self, FitError> {
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(FitError::InvalidWeights(
                "weights must be finite and non-negative".into(),
            ));
        }
        if !(w.iter().sum::<f64>() > 0.0) {
            return Err(FitError::InvalidWeights("weights sum to zero".into()));
        }
        Ok(CaseWeights(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn positive_count(&self) -> usize {
        self.0.iter().filter(|&&w| w > 0.0).count()
    }

    pub(crate) fn check_len(&self, rows: usize) -> Result<(), FitError> {
        if self.0.len() != rows {
            return Err(FitError::LengthMismatch {
                rows,
                what: "case weights",
                len: self.0.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_is_prepended() {
        let x = DesignMatrix::from_columns(&[&[2.0, 3.0]], true).unwrap();
        assert_eq!(x.row(1), &[1.0, 3.0]);
        assert!(x.has_intercept());
    }

    #[test]
    fn rejects_non_finite_entries() {
        let err = DesignMatrix::from_columns(&[&[1.0, f64::NAN]], false).unwrap_err();
        assert_eq!(err, FitError::NonFiniteDesign { row: 1, col: 0 });
    }

    #[test]
    fn response_checks() {
        assert!(Response::binary(vec![0.0, 2.0]).is_err());
        assert!(Response::survival(vec![0.0], vec![true]).is_err());
        assert!(CaseWeights::new(vec![0.0, 0.0]).is_err());
        assert!(CaseWeights::new(vec![-1.0, 2.0]).is_err());
    }
}
