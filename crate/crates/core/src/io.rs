//! CSV ingestion and report serialization.
//!
//! Missing cells are the empty string or `NA`. Numbers are written with the
//! shortest decimal that reads back to the same `f64`, so a write/read
//! round trip is exact.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::AnalysisSpec;
use crate::augment::WaldRow;
use crate::error::{Error, Result};
use crate::model::Family;
use crate::pipeline::Analysis;
use crate::resample::{MethodKind, ResamplePlan};
use crate::simulate::{ReplicateRecord, ReplicationSummary};
use crate::study::StudyData;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Treat reference values on non-validated rows as an error instead of
    /// dropping them with a warning.
    pub strict: bool,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub data: StudyData,
    pub warnings: Vec<String>,
    /// SHA-256 of the raw input bytes, hex encoded.
    pub sha256: String,
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c == "NA"
}

pub fn load_csv(path: impl AsRef<Path>, spec: &AnalysisSpec, opts: LoadOptions) -> Result<Loaded> {
    let bytes = std::fs::read(path)?;
    read_csv(bytes.as_slice(), spec, opts)
}

/// Reads the columns named in `spec` from CSV text with a header row.
pub fn read_csv(mut input: impl Read, spec: &AnalysisSpec, opts: LoadOptions) -> Result<Loaded> {
    spec.validate()?;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let sha256 = hex::encode(Sha256::digest(&bytes));

    let mut reader = csv::ReaderBuilder::new().from_reader(bytes.as_slice());
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let mut needed: HashSet<&str> = spec.surrogate_columns().into_iter().collect();
    needed.extend(spec.outcome.reference.columns());
    needed.extend(spec.predictors.iter().map(|p| p.reference.as_str()));
    needed.insert(&spec.validation);
    if let Some(w) = &spec.weight {
        needed.insert(w);
    }
    for col in &needed {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::MissingColumn(col.to_string()));
        }
    }
    let cluster_idx = match &spec.cluster {
        Some(c) => Some(
            headers
                .iter()
                .position(|h| h == c)
                .ok_or_else(|| Error::MissingColumn(c.clone()))?,
        ),
        None => None,
    };
    // header order, each needed column once
    let numeric: Vec<(usize, &str)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| needed.contains(h.as_str()))
        .filter(|(i, h)| headers[..*i].iter().all(|prev| prev != *h))
        .map(|(i, h)| (i, h.as_str()))
        .collect();

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); numeric.len()];
    let mut clusters = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(row + 2, |p| p.line() as usize);
        for ((idx, name), col) in numeric.iter().zip(columns.iter_mut()) {
            let cell = record.get(*idx).unwrap_or("");
            let value = if is_missing(cell) {
                f64::NAN
            } else {
                cell.trim().parse::<f64>().map_err(|_| Error::NonNumericCell {
                    line,
                    column: name.to_string(),
                    value: cell.to_string(),
                })?
            };
            col.push(value);
        }
        if let Some(i) = cluster_idx {
            let label = record.get(i).unwrap_or("").trim();
            if is_missing(label) {
                return Err(Error::InvalidData(format!("line {line}: cluster id is missing")));
            }
            clusters.push(label.to_string());
        }
    }

    let pos = |name: &str| numeric.iter().position(|(_, n)| *n == name).unwrap();
    let flags = columns[pos(&spec.validation)]
        .iter()
        .enumerate()
        .map(|(i, &v)| match v {
            v if v == 1.0 => Ok(true),
            v if v == 0.0 => Ok(false),
            v => Err(Error::InvalidData(format!(
                "line {}: validation flag `{}` must be 0 or 1, got {v}",
                i + 2,
                spec.validation
            ))),
        })
        .collect::<Result<Vec<bool>>>()?;

    let mut warnings = Vec::new();
    for col in spec.reference_only_columns() {
        let values = &mut columns[pos(col)];
        for (i, v) in values.iter_mut().enumerate() {
            if !flags[i] && !v.is_nan() {
                if opts.strict {
                    return Err(Error::ReferencePresentOutsideValidation {
                        line: i + 2,
                        column: col.to_string(),
                    });
                }
                warnings.push(format!(
                    "line {}, column `{col}`: reference value on a non-validated row ignored",
                    i + 2
                ));
                *v = f64::NAN;
            }
        }
    }

    let weights = spec.weight.as_ref().map(|w| columns[pos(w)].clone());
    let mut data = StudyData::new(flags);
    for ((_, name), col) in numeric.iter().zip(columns) {
        data.push_column(*name, col)?;
    }
    if spec.cluster.is_some() {
        data = data.with_clusters(clusters)?;
    }
    if let Some(w) = weights {
        data = data.with_weights(w)?;
    }
    data.validate(spec)?;
    Ok(Loaded {
        data,
        warnings,
        sha256,
    })
}

/// Shortest round-trip decimal, `NA` for NaN.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v}")
    }
}

/// Writes every column of `data`, then the cluster labels as `cluster`,
/// unless a column of that name exists.
pub fn write_csv(data: &StudyData, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let clusters = data
        .cluster_labels()
        .filter(|_| !data.names().iter().any(|n| n == "cluster"));
    let mut header: Vec<&str> = data.names().iter().map(String::as_str).collect();
    if clusters.is_some() {
        header.push("cluster");
    }
    w.write_record(&header)?;
    let cols: Vec<&[f64]> = data
        .names()
        .iter()
        .map(|n| data.column(n))
        .collect::<Result<_>>()?;
    for i in 0..data.n_full() {
        let mut rec: Vec<String> = cols.iter().map(|c| format_number(c[i])).collect();
        if let Some(labels) = clusters {
            rec.push(labels[i].clone());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub term: String,
    pub estimate: f64,
    pub se: f64,
    pub lcl: f64,
    pub ucl: f64,
    pub z: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDiagnostics {
    /// `null` when K is singular.
    pub k_condition: Option<f64>,
    pub pseudo_inverse: bool,
    pub psd_repair: bool,
    pub no_augmentation: bool,
    pub method: MethodKind,
    pub replicates: usize,
    pub dropped_replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub seed: Option<u64>,
    pub plan: ResamplePlan,
    pub input_sha256: Option<String>,
}

impl Provenance {
    pub fn new(plan: &ResamplePlan, input_sha256: Option<String>) -> Self {
        let seed = match plan {
            ResamplePlan::Bootstrap { seed, .. } => Some(*seed),
            ResamplePlan::Jackknife { assignment, .. } => match assignment {
                crate::resample::GroupAssignment::Shuffled { seed } => Some(*seed),
                crate::resample::GroupAssignment::RoundRobin => None,
            },
        };
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            plan: plan.clone(),
            input_sha256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub family: Family,
    pub n_full: usize,
    pub n_val: usize,
    pub alpha: f64,
    pub beta_aug: Vec<ReportRow>,
    pub beta_val: Vec<ReportRow>,
    pub gamma_ful: Vec<ReportRow>,
    pub diagnostics: ReportDiagnostics,
    pub provenance: Provenance,
}

fn rows(labels: &[String], table: &[WaldRow]) -> Vec<ReportRow> {
    labels
        .iter()
        .zip(table)
        .map(|(term, r)| ReportRow {
            term: term.clone(),
            estimate: r.estimate,
            se: r.se,
            lcl: r.lcl,
            ucl: r.ucl,
            z: r.z,
            p: r.p,
        })
        .collect()
}

impl ReportDocument {
    pub fn new(analysis: &Analysis, spec: &AnalysisSpec, input_sha256: Option<String>) -> Self {
        let est = &analysis.estimate;
        let d = &est.diagnostics;
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            family: spec.family,
            n_full: analysis.n_full,
            n_val: analysis.n_val,
            alpha: spec.alpha,
            beta_aug: rows(&analysis.beta_labels, &est.aug),
            beta_val: rows(&analysis.beta_labels, &est.val),
            gamma_ful: rows(&analysis.gamma_labels, &est.ful),
            diagnostics: ReportDiagnostics {
                k_condition: d.k_condition.is_finite().then_some(d.k_condition),
                pseudo_inverse: d.pseudo_inverse,
                psd_repair: d.psd_repair,
                no_augmentation: d.no_augmentation,
                method: analysis.cov.method,
                replicates: analysis.cov.replicates,
                dropped_replicates: analysis.cov.dropped,
            },
            provenance: Provenance::new(&spec.resample, input_sha256),
        }
    }

    pub fn tables(&self) -> [(&'static str, &[ReportRow]); 3] {
        [
            ("beta_aug", &self.beta_aug),
            ("beta_val", &self.beta_val),
            ("gamma_ful", &self.gamma_ful),
        ]
    }

    /// One row per coefficient: `table,term,estimate,se,lcl,ucl,z,p`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["table", "term", "estimate", "se", "lcl", "ucl", "z", "p"])?;
        for (table, rows) in self.tables() {
            for r in rows {
                let nums = [r.estimate, r.se, r.lcl, r.ucl, r.z, r.p].map(format_number);
                let mut rec = vec![table.to_string(), r.term.clone()];
                rec.extend(nums);
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// A simulation summary with provenance, as written by `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub schema_version: u32,
    pub version: String,
    #[serde(flatten)]
    pub summary: ReplicationSummary,
}

impl SummaryDocument {
    pub fn new(summary: ReplicationSummary) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            version: env!("CARGO_PKG_VERSION").to_string(),
            summary,
        }
    }
}

pub fn write_summary_csv(summary: &ReplicationSummary, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "estimator",
        "term",
        "target",
        "truth",
        "n",
        "mean",
        "bias",
        "sd",
        "rmse",
        "coverage",
        "ci_half_width",
    ])?;
    for r in &summary.rows {
        let mut rec = vec![
            r.estimator.as_str().to_string(),
            r.term.clone(),
            r.target.clone(),
            format_number(r.truth),
            r.n.to_string(),
        ];
        rec.extend([r.mean, r.bias, r.sd, r.rmse, r.coverage, r.ci_half_width].map(format_number));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_replicates_csv(records: &[ReplicateRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "replicate", "estimator", "term", "target", "truth", "estimate", "se", "lcl", "ucl",
    ])?;
    for r in records {
        let mut rec = vec![
            r.replicate.to_string(),
            r.estimator.as_str().to_string(),
            r.term.clone(),
            r.target.clone(),
        ];
        rec.extend([r.truth, r.estimate, r.se, r.lcl, r.ucl].map(format_number));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a per-replicate dump written by [`write_replicates_csv`].
pub fn read_replicates_csv(input: impl Read) -> Result<Vec<ReplicateRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let num = |k: usize, name: &str| -> Result<f64> {
            let cell = field(k);
            if is_missing(cell) {
                return Ok(f64::NAN);
            }
            cell.parse().map_err(|_| Error::NonNumericCell {
                line,
                column: name.to_string(),
                value: cell.to_string(),
            })
        };
        out.push(ReplicateRecord {
            replicate: num(0, "replicate")? as usize,
            estimator: field(1).parse().map_err(Error::InvalidData)?,
            term: field(2).to_string(),
            target: field(3).to_string(),
            truth: num(4, "truth")?,
            estimate: num(5, "estimate")?,
            se: num(6, "se")?,
            lcl: num(7, "lcl")?,
            ucl: num(8, "ucl")?,
        });
    }
    Ok(out)
}

/// Six significant digits, as used in the human-readable tables.
pub fn sig6(v: f64) -> String {
    if v.is_nan() {
        return "NA".into();
    }
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.5e}")
    }
}

fn render_table(title: &str, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = format!("{title}\n\n");
    let line = |cells: Vec<&str>| -> String {
        let mut s = String::new();
        for (k, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if k == 0 {
                s.push_str(&format!("{c:<w$}"));
            } else {
                s.push_str(&format!("  {c:>w$}"));
            }
        }
        s.push('\n');
        s
    };
    out.push_str(&line(header.to_vec()));
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

/// Text rendering of a report: the three inference tables plus diagnostics.
pub fn render_report(doc: &ReportDocument) -> String {
    let titles = [
        "Estimates for beta using beta_aug (reference variables augmented with surrogates)",
        "Estimates for beta using beta_val (reference variables alone)",
        "Estimates for gamma using gamma_ful (surrogate variables alone)",
    ];
    let mut out = String::new();
    for ((_, rows), title) in doc.tables().into_iter().zip(titles) {
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                let mut v = vec![r.term.clone()];
                v.extend([r.estimate, r.se, r.lcl, r.ucl, r.z, r.p].map(sig6));
                v
            })
            .collect();
        out.push_str(&render_table(
            title,
            &["", "estimate", "se", "lcl", "ucl", "z", "p"],
            &body,
        ));
        out.push('\n');
    }
    let d = &doc.diagnostics;
    out.push_str(&format!(
        "n_full {}, n_val {}, {:?} with {} replicates ({} dropped)\n",
        doc.n_full, doc.n_val, d.method, d.replicates, d.dropped_replicates
    ));
    out.push_str(&format!(
        "K condition {}, pseudo-inverse {}, PSD repair {}, no augmentation {}\n",
        d.k_condition.map_or("inf".to_string(), sig6),
        d.pseudo_inverse,
        d.psd_repair,
        d.no_augmentation
    ));
    out
}

/// Text rendering of a simulation summary.
pub fn render_summary(doc: &SummaryDocument) -> String {
    let s = &doc.summary;
    let body: Vec<Vec<String>> = s
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![r.estimator.as_str().to_string(), r.term.clone()];
            v.extend([r.truth, r.bias, r.sd, r.rmse, r.coverage, r.ci_half_width].map(sig6));
            v
        })
        .collect();
    let title = format!(
        "{}: {} replicates ({} failed), n_full {}, n_val {}, seed {}",
        s.scenario, s.replicates, s.failures, s.n_full, s.n_val, s.seed
    );
    render_table(
        &title,
        &["estimator", "term", "truth", "bias", "sd", "rmse", "coverage", "ci_half_width"],
        &body,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> AnalysisSpec {
        AnalysisSpec::from_json(
            r#"{"schema_version": 1, "family": "linear",
                "outcome": {"reference": "y", "surrogate": "y_s"},
                "predictors": [{"name": "x", "reference": "x", "surrogates": ["x_s"]}],
                "validation": "val"}"#,
        )
        .unwrap()
    }

    const GOOD: &str = "\
y,y_s,x,x_s,val,notes
1.5,1.4,0.2,0.25,1,a
NA,2.2,,1.0,0,b
3.1,3.0,0.7,0.6,1,c
,0.3,NA,0.1,0,d
";

    #[test]
    fn loads_the_missing_pattern() {
        let l = read_csv(GOOD.as_bytes(), &spec(), LoadOptions::default()).unwrap();
        assert_eq!(l.data.n_full(), 4);
        assert_eq!(l.data.n_val(), 2);
        assert_eq!(l.data.names(), ["y", "y_s", "x", "x_s", "val"]);
        assert!(l.warnings.is_empty());
        assert_eq!(l.sha256.len(), 64);
    }

    #[test]
    fn missing_reference_on_validated_row() {
        let text = GOOD.replace("3.1,3.0,0.7", "3.1,3.0,NA");
        let err = read_csv(text.as_bytes(), &spec(), LoadOptions::default()).unwrap_err();
        match err {
            Error::ReferenceMissingInValidation { line, column } => {
                assert_eq!((line, column.as_str()), (4, "x"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn reference_outside_validation_warns_or_fails() {
        let text = GOOD.replace("NA,2.2,,1.0,0,b", "NA,2.2,0.9,1.0,0,b");
        let l = read_csv(text.as_bytes(), &spec(), LoadOptions::default()).unwrap();
        assert_eq!(l.warnings.len(), 1);
        assert!(l.data.column("x").unwrap()[1].is_nan());
        let err = read_csv(text.as_bytes(), &spec(), LoadOptions { strict: true }).unwrap_err();
        assert!(matches!(err, Error::ReferencePresentOutsideValidation { line: 3, .. }));
    }

    #[test]
    fn non_numeric_cell_is_located() {
        let text = GOOD.replace("0.3,NA", "zero,NA");
        let err = read_csv(text.as_bytes(), &spec(), LoadOptions::default()).unwrap_err();
        match err {
            Error::NonNumericCell { line, column, value } => {
                assert_eq!((line, column.as_str(), value.as_str()), (5, "y_s", "zero"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn missing_column() {
        let text = GOOD.replace("x_s", "xs");
        let err = read_csv(text.as_bytes(), &spec(), LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "x_s"));
    }

    #[test]
    fn write_then_read_is_exact() {
        let l = read_csv(GOOD.as_bytes(), &spec(), LoadOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_csv(&l.data, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &spec(), LoadOptions::default()).unwrap();
        for name in l.data.names() {
            let a: Vec<u64> = l.data.column(name).unwrap().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.data.column(name).unwrap().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn shortest_round_trip_numbers() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 123456789.123, f64::MIN_POSITIVE] {
            assert_eq!(format_number(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_number(0.1), "0.1");
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.633), "0.633000");
        assert_eq!(sig6(-12.749), "-12.7490");
        assert_eq!(sig6(8.66e-5), "8.66000e-5");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.8), "1.23457e6");
    }
}
