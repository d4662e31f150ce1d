use super::{
    eigen_ratio, spd_solve, weighted_gram, CaseWeights, DesignMatrix, FitError, RegressionFit,
    RANK_TOLERANCE,
};

/// Weighted least squares via Cholesky of the weighted Gram matrix.
///
/// `log_likelihood` carries the weighted residual sum of squares.
pub fn fit_linear(x: &DesignMatrix, y: &[f64], w: &CaseWeights) -> Result<RegressionFit, FitError> {
    let (n, p) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(FitError::LengthMismatch {
            rows: n,
            what: "outcome",
            len: y.len(),
        });
    }
    w.check_len(n)?;
    let used = w.positive_count();
    if used < p {
        return Err(FitError::TooFewRows { rows: used, cols: p });
    }
    let w = w.as_slice();
    let gram = weighted_gram(x, w);
    let ratio = eigen_ratio(&gram, p);
    if ratio < RANK_TOLERANCE {
        return Err(FitError::RankDeficient { ratio });
    }

    let mut xty = vec![0.0; p];
    for i in 0..n {
        if w[i] == 0.0 {
            continue;
        }
        let wy = w[i] * y[i];
        for (acc, xv) in xty.iter_mut().zip(x.row(i)) {
            *acc += wy * xv;
        }
    }
    let beta = spd_solve(&gram, &xty).ok_or(FitError::RankDeficient { ratio })?;

    let rss = (0..n)
        .filter(|&i| w[i] != 0.0)
        .map(|i| {
            let r = y[i] - super::design::dot(x.row(i), &beta);
            w[i] * r * r
        })
        .sum();

    Ok(RegressionFit {
        coefficients: beta,
        converged: true,
        iterations: 1,
        log_likelihood: rss,
    })
}
