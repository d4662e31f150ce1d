//! Full-sample study data with a flagged validation subsample.

use std::collections::HashMap;

use crate::analysis::AnalysisSpec;
use crate::error::{Error, Result};

/// Named numeric columns over the full sample.
///
/// Missing values are stored as NaN. Reference columns are observed on the
/// validated rows only; surrogate columns on every row.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyData {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
    validated: Vec<bool>,
    clusters: Option<Vec<String>>,
    weights: Option<Vec<f64>>,
}

impl StudyData {
    pub fn new(validated: Vec<bool>) -> Self {
        Self {
            names: Vec::new(),
            columns: Vec::new(),
            index: HashMap::new(),
            validated,
            clusters: None,
            weights: None,
        }
    }

    /// Adds (or replaces) a column.
    pub fn with_column(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        self.push_column(name, values)?;
        Ok(self)
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.n_full() {
            return Err(Error::InvalidData(format!(
                "column `{name}` has {} values for {} rows",
                values.len(),
                self.n_full()
            )));
        }
        match self.index.get(&name) {
            Some(&j) => self.columns[j] = values,
            None => {
                self.index.insert(name.clone(), self.names.len());
                self.names.push(name);
                self.columns.push(values);
            }
        }
        Ok(())
    }

    pub fn with_clusters(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_full() {
            return Err(Error::InvalidData("cluster column length mismatch".into()));
        }
        self.clusters = Some(labels);
        Ok(self)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n_full() {
            return Err(Error::InvalidData("weight column length mismatch".into()));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn n_full(&self) -> usize {
        self.validated.len()
    }

    pub fn n_val(&self) -> usize {
        self.validated.iter().filter(|&&v| v).count()
    }

    pub fn validated(&self) -> &[bool] {
        &self.validated
    }

    pub fn validated_rows(&self) -> Vec<usize> {
        (0..self.n_full()).filter(|&i| self.validated[i]).collect()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.index
            .get(name)
            .map(|&j| self.columns[j].as_slice())
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn cluster_labels(&self) -> Option<&[String]> {
        self.clusters.as_deref()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Dense cluster index per row, numbered by first appearance. Without
    /// clusters every row is its own unit.
    pub fn unit_ids(&self) -> Vec<usize> {
        match &self.clusters {
            None => (0..self.n_full()).collect(),
            Some(labels) => {
                let mut seen: HashMap<&str, usize> = HashMap::new();
                labels
                    .iter()
                    .map(|l| {
                        let next = seen.len();
                        *seen.entry(l.as_str()).or_insert(next)
                    })
                    .collect()
            }
        }
    }

    /// Checks the data against the column roles of `spec`.
    pub fn validate(&self, spec: &AnalysisSpec) -> Result<()> {
        let n = self.n_full();
        let n_val = self.n_val();
        if n_val == 0 {
            return Err(Error::InvalidData("the validation subsample is empty".into()));
        }
        for col in spec.surrogate_columns() {
            let values = self.column(col)?;
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "surrogate column `{col}` is missing at row {}",
                    i + 1
                )));
            }
        }
        for col in spec.reference_only_columns() {
            let values = self.column(col)?;
            for i in 0..n {
                let present = values[i].is_finite();
                if self.validated[i] && !present {
                    return Err(Error::ReferenceMissingInValidation {
                        line: i + 2,
                        column: col.to_string(),
                    });
                }
                if !self.validated[i] && !values[i].is_nan() {
                    return Err(Error::ReferencePresentOutsideValidation {
                        line: i + 2,
                        column: col.to_string(),
                    });
                }
            }
        }
        if let Some(w) = &self.weights {
            for &i in &self.validated_rows() {
                if !(w[i].is_finite() && w[i] > 0.0) {
                    return Err(Error::InvalidData(format!(
                        "sampling weight on validated row {} must be positive, got {}",
                        i + 1,
                        w[i]
                    )));
                }
            }
        }
        Ok(())
    }
}
