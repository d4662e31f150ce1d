use super::{
    eigen_ratio, max_abs, mirror_upper, spd_solve, CaseWeights, DesignMatrix, FitError,
    FitOptions, NonConvergence, RegressionFit, LINEAR_PREDICTOR_GUARD,
};

const MAX_HALVINGS: usize = 40;

/// Weighted logistic regression by damped Newton–Raphson.
///
/// Each iteration solves the Fisher system by Cholesky and halves the step
/// until the log-likelihood does not decrease. Convergence is declared once
/// the applied step has max-norm below `opts.tol`.
pub fn fit_logistic(
    x: &DesignMatrix,
    y: &[f64],
    w: &CaseWeights,
    opts: &FitOptions,
    start: Option<&[f64]>,
) -> Result<RegressionFit, FitError> {
    let (n, p) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(FitError::LengthMismatch {
            rows: n,
            what: "outcome",
            len: y.len(),
        });
    }
    w.check_len(n)?;
    let w = w.as_slice();
    let used = w.iter().filter(|&&v| v > 0.0).count();
    if used < p {
        return Err(FitError::TooFewRows { rows: used, cols: p });
    }
    let (mut pos, mut neg) = (0.0, 0.0);
    for (yi, wi) in y.iter().zip(w) {
        match *yi {
            v if v == 1.0 => pos += wi,
            v if v == 0.0 => neg += wi,
            v => {
                return Err(FitError::InvalidResponse(format!(
                    "binary outcome must be 0 or 1, found {v}"
                )))
            }
        }
    }
    if !(pos > 0.0 && neg > 0.0) {
        return Err(FitError::Degenerate);
    }

    let mut beta = match start {
        Some(s) if s.len() != p => {
            return Err(FitError::BadStart {
                got: s.len(),
                expected: p,
            })
        }
        Some(s) => s.to_vec(),
        None => vec![0.0; p],
    };
    let mut eta = x.linear_predictor(&beta);
    let mut ll = log_likelihood(&eta, y, w);
    if !ll.is_finite() {
        beta.iter_mut().for_each(|b| *b = 0.0);
        eta.iter_mut().for_each(|e| *e = 0.0);
        ll = log_likelihood(&eta, y, w);
    }

    let mut score = vec![0.0; p];
    let mut info = vec![0.0; p * p];
    let mut cand = vec![0.0; p];
    let mut cand_eta = vec![0.0; n];
    let mut prev_step = f64::INFINITY;

    for iter in 1..=opts.max_iter {
        score.iter_mut().for_each(|v| *v = 0.0);
        info.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let wi = w[i];
            if wi == 0.0 {
                continue;
            }
            let mu = sigmoid(eta[i]);
            let r = wi * (y[i] - mu);
            let v = wi * mu * (1.0 - mu);
            let row = x.row(i);
            for a in 0..p {
                score[a] += r * row[a];
                let va = v * row[a];
                for b in a..p {
                    info[a * p + b] += va * row[b];
                }
            }
        }
        mirror_upper(&mut info, p);

        let step = match spd_solve(&info, &score) {
            Some(s) => s,
            None if max_abs(&eta) > LINEAR_PREDICTOR_GUARD => return Err(FitError::Separation),
            None => {
                return Err(FitError::RankDeficient {
                    ratio: eigen_ratio(&info, p),
                })
            }
        };

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            for a in 0..p {
                cand[a] = beta[a] + t * step[a];
            }
            x.linear_predictor_into(&cand, &mut cand_eta);
            let cand_ll = log_likelihood(&cand_eta, y, w);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-10 * (1.0 + ll.abs()) {
                accepted = Some(cand_ll);
                break;
            }
            t *= 0.5;
        }
        let applied = t * max_abs(&step);
        let Some(cand_ll) = accepted else {
            // no ascent possible along the Newton direction: already at the optimum
            if applied < opts.tol {
                return Ok(RegressionFit {
                    coefficients: beta,
                    converged: true,
                    iterations: iter,
                    log_likelihood: ll,
                });
            }
            return Err(FitError::NotConverged {
                iterations: iter,
                reason: NonConvergence::IterationLimit,
            });
        };
        std::mem::swap(&mut beta, &mut cand);
        std::mem::swap(&mut eta, &mut cand_eta);
        ll = cand_ll;

        if applied < opts.tol {
            return Ok(RegressionFit {
                coefficients: beta,
                converged: true,
                iterations: iter,
                log_likelihood: ll,
            });
        }
        // near-constant steps while the predictor runs off: quasi-complete separation
        if max_abs(&eta) > LINEAR_PREDICTOR_GUARD && applied >= 0.5 * prev_step {
            return Err(FitError::Separation);
        }
        prev_step = applied;
    }
    Err(FitError::NotConverged {
        iterations: opts.max_iter,
        reason: NonConvergence::IterationLimit,
    })
}

#[inline]
fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `Σ wᵢ [yᵢ ηᵢ − log(1 + exp ηᵢ)]`
fn log_likelihood(eta: &[f64], y: &[f64], w: &[f64]) -> f64 {
    let mut ll = 0.0;
    for i in 0..eta.len() {
        if w[i] == 0.0 {
            continue;
        }
        let e = eta[i];
        let softplus = e.max(0.0) + (-e.abs()).exp().ln_1p();
        ll += w[i] * (y[i] * e - softplus);
    }
    ll
}

/// Score vector `Xᵀ W (y − μ)`; exposed for convergence checks in tests.
pub fn logistic_score(x: &DesignMatrix, y: &[f64], w: &CaseWeights, beta: &[f64]) -> Vec<f64> {
    let eta = x.linear_predictor(beta);
    let mut u = vec![0.0; x.cols()];
    for (i, e) in eta.iter().enumerate() {
        let r = w.as_slice()[i] * (y[i] - sigmoid(*e));
        for (acc, xv) in u.iter_mut().zip(x.row(i)) {
            *acc += r * xv;
        }
    }
    u
}
