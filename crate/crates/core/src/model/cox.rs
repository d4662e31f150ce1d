use super::{
    eigen_ratio, max_abs, mirror_upper, spd_solve, CaseWeights, DesignMatrix, FitError,
    FitOptions, NonConvergence, RegressionFit, Ties, LINEAR_PREDICTOR_GUARD,
};

const MAX_HALVINGS: usize = 40;

/// Survival data pre-sorted for the partial likelihood.
///
/// Sorting happens once; every subsequent fit (with whatever case weights)
/// walks the same descending-time order, accumulating risk sets as it goes.
#[derive(Debug, Clone)]
pub struct CoxData {
    x: DesignMatrix,
    time: Vec<f64>,
    event: Vec<bool>,
    /// Row indices in order of decreasing time; ties keep row order.
    order: Vec<usize>,
    /// Boundaries of equal-time blocks within `order`.
    blocks: Vec<(usize, usize)>,
}

impl CoxData {
    pub fn new(x: DesignMatrix, time: Vec<f64>, event: Vec<bool>) -> Result<Self, FitError> {
        let n = x.rows();
        for (what, len) in [("time", time.len()), ("event", event.len())] {
            if len != n {
                return Err(FitError::LengthMismatch { rows: n, what, len });
            }
        }
        if let Some(t) = time.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
            return Err(FitError::InvalidResponse(format!(
                "survival times must be positive and finite, found {t}"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| time[b].total_cmp(&time[a]));
        let mut blocks = Vec::new();
        let mut start = 0;
        for k in 1..=n {
            if k == n || time[order[k]] != time[order[start]] {
                blocks.push((start, k));
                start = k;
            }
        }
        Ok(Self {
            x,
            time,
            event,
            order,
            blocks,
        })
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.x
    }

    pub fn time(&self) -> &[f64] {
        &self.time
    }

    pub fn event(&self) -> &[bool] {
        &self.event
    }

    /// Maximizes the weighted partial likelihood by Newton–Raphson with step
    /// halving.
    ///
    /// Columns that are constant over the positive-weight rows carry no
    /// information in the partial likelihood; their coefficient is fixed at 0.
    pub fn fit(
        &self,
        w: &CaseWeights,
        opts: &FitOptions,
        start: Option<&[f64]>,
    ) -> Result<RegressionFit, FitError> {
        let (n, p) = (self.x.rows(), self.x.cols());
        w.check_len(n)?;
        let w = w.as_slice();
        if let Some(s) = start {
            if s.len() != p {
                return Err(FitError::BadStart {
                    got: s.len(),
                    expected: p,
                });
            }
        }
        if !(0..n).any(|i| self.event[i] && w[i] > 0.0) {
            return Err(FitError::NoEvents);
        }

        let active: Vec<usize> = (0..p).filter(|&j| !self.is_constant(j, w)).collect();
        let mut coefficients = vec![0.0; p];
        if active.is_empty() {
            let ll = self.sorted(&active, w).evaluate(&[], opts.ties, false).ll;
            return Ok(RegressionFit {
                coefficients,
                converged: true,
                iterations: 0,
                log_likelihood: ll,
            });
        }
        let sorted = self.sorted(&active, w);
        let k = active.len();

        let mut beta: Vec<f64> = match start {
            Some(s) => active.iter().map(|&j| s[j]).collect(),
            None => vec![0.0; k],
        };
        let mut cur = sorted.evaluate(&beta, opts.ties, true);
        if !cur.ll.is_finite() {
            beta.iter_mut().for_each(|b| *b = 0.0);
            cur = sorted.evaluate(&beta, opts.ties, true);
        }
        let mut cand = vec![0.0; k];
        let mut prev_step = f64::INFINITY;

        for iter in 1..=opts.max_iter {
            let step = match spd_solve(&cur.info, &cur.score) {
                Some(s) => s,
                None if sorted.spread(&beta) > LINEAR_PREDICTOR_GUARD => {
                    return Err(monotone(iter, &beta, &active))
                }
                None => {
                    return Err(FitError::RankDeficient {
                        ratio: eigen_ratio(&cur.info, k),
                    })
                }
            };
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                for a in 0..k {
                    cand[a] = beta[a] + t * step[a];
                }
                let next = sorted.evaluate(&cand, opts.ties, true);
                if next.ll.is_finite() && next.ll >= cur.ll - 1e-10 * (1.0 + cur.ll.abs()) {
                    accepted = Some(next);
                    break;
                }
                t *= 0.5;
            }
            let applied = t * max_abs(&step);
            let Some(next) = accepted else {
                if applied < opts.tol {
                    break;
                }
                return Err(FitError::NotConverged {
                    iterations: iter,
                    reason: NonConvergence::IterationLimit,
                });
            };
            std::mem::swap(&mut beta, &mut cand);
            cur = next;

            if applied < opts.tol {
                for (a, &j) in active.iter().enumerate() {
                    coefficients[j] = beta[a];
                }
                return Ok(RegressionFit {
                    coefficients,
                    converged: true,
                    iterations: iter,
                    log_likelihood: cur.ll,
                });
            }
            if sorted.spread(&beta) > LINEAR_PREDICTOR_GUARD && applied >= 0.5 * prev_step {
                return Err(monotone(iter, &beta, &active));
            }
            prev_step = applied;
        }
        Err(FitError::NotConverged {
            iterations: opts.max_iter,
            reason: NonConvergence::IterationLimit,
        })
    }

    /// Partial-likelihood score at `beta` (all columns).
    pub fn score(&self, w: &CaseWeights, beta: &[f64], ties: Ties) -> Vec<f64> {
        let all: Vec<usize> = (0..self.x.cols()).collect();
        self.sorted(&all, w.as_slice()).evaluate(beta, ties, true).score
    }

    /// Partial log-likelihood at `beta` (all columns).
    pub fn log_likelihood(&self, w: &CaseWeights, beta: &[f64], ties: Ties) -> f64 {
        let all: Vec<usize> = (0..self.x.cols()).collect();
        self.sorted(&all, w.as_slice()).evaluate(beta, ties, false).ll
    }

    fn is_constant(&self, j: usize, w: &[f64]) -> bool {
        let mut first = None;
        for i in 0..self.x.rows() {
            if w[i] == 0.0 {
                continue;
            }
            let v = self.x.row(i)[j];
            match first {
                None => first = Some(v),
                Some(f) if f != v => return false,
                _ => {}
            }
        }
        true
    }

    /// Positive-weight rows in descending-time order, with the active
    /// columns centered at their weighted means.
    fn sorted(&self, active: &[usize], w: &[f64]) -> Sorted {
        let k = active.len();
        let total: f64 = w.iter().sum();
        let mut means = vec![0.0; k];
        for i in 0..self.x.rows() {
            if w[i] == 0.0 {
                continue;
            }
            let row = self.x.row(i);
            for (m, &j) in means.iter_mut().zip(active) {
                *m += w[i] * row[j];
            }
        }
        means.iter_mut().for_each(|m| *m /= total);

        let mut x = Vec::with_capacity(self.x.rows() * k);
        let mut weight = Vec::with_capacity(self.x.rows());
        let mut event = Vec::with_capacity(self.x.rows());
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for &(s, e) in &self.blocks {
            let start = weight.len();
            for &i in &self.order[s..e] {
                if w[i] == 0.0 {
                    continue;
                }
                let row = self.x.row(i);
                x.extend(active.iter().zip(&means).map(|(&j, m)| row[j] - m));
                weight.push(w[i]);
                event.push(self.event[i]);
            }
            if weight.len() > start {
                blocks.push((start, weight.len()));
            }
        }
        Sorted {
            k,
            x,
            weight,
            event,
            blocks,
        }
    }
}

fn monotone(iterations: usize, beta: &[f64], active: &[usize]) -> FitError {
    let (a, _) = beta
        .iter()
        .enumerate()
        .fold((0, 0.0), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
    FitError::NotConverged {
        iterations,
        reason: NonConvergence::MonotoneLikelihood {
            coefficient: active[a],
        },
    }
}

/// Convenience wrapper: sort and fit in one call.
pub fn fit_cox(
    x: &DesignMatrix,
    time: &[f64],
    event: &[bool],
    w: &CaseWeights,
    opts: &FitOptions,
    start: Option<&[f64]>,
) -> Result<RegressionFit, FitError> {
    CoxData::new(x.clone(), time.to_vec(), event.to_vec())?.fit(w, opts, start)
}

struct Sorted {
    k: usize,
    x: Vec<f64>,
    weight: Vec<f64>,
    event: Vec<bool>,
    blocks: Vec<(usize, usize)>,
}

struct Evaluation {
    ll: f64,
    score: Vec<f64>,
    /// Observed information (negative Hessian), row-major k×k.
    info: Vec<f64>,
}

impl Sorted {
    fn spread(&self, beta: &[f64]) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for row in self.x.chunks_exact(self.k.max(1)) {
            let eta = super::design::dot(row, beta);
            lo = lo.min(eta);
            hi = hi.max(eta);
        }
        hi - lo
    }

    fn evaluate(&self, beta: &[f64], ties: Ties, derivatives: bool) -> Evaluation {
        let k = self.k;
        let mut ll = 0.0;
        let mut score = vec![0.0; k];
        let mut info = vec![0.0; k * k];

        let mut denom = 0.0;
        let mut a = vec![0.0; k];
        let mut c = vec![0.0; k * k];
        let mut a2 = vec![0.0; k];
        let mut c2 = vec![0.0; k * k];
        let mut am = vec![0.0; k];

        for &(s, e) in &self.blocks {
            let mut deaths = 0usize;
            let mut death_w = 0.0;
            let mut denom2 = 0.0;
            if derivatives {
                a2.iter_mut().for_each(|v| *v = 0.0);
                c2.iter_mut().for_each(|v| *v = 0.0);
            }
            for r in s..e {
                let row = &self.x[r * k..(r + 1) * k];
                let wi = self.weight[r];
                let eta = super::design::dot(row, beta);
                let risk = wi * eta.exp();
                denom += risk;
                if derivatives {
                    for i in 0..k {
                        let ri = risk * row[i];
                        a[i] += ri;
                        for j in i..k {
                            c[i * k + j] += ri * row[j];
                        }
                    }
                }
                if self.event[r] {
                    deaths += 1;
                    death_w += wi;
                    denom2 += risk;
                    ll += wi * eta;
                    if derivatives {
                        for i in 0..k {
                            score[i] += wi * row[i];
                            let ri = risk * row[i];
                            a2[i] += ri;
                            for j in i..k {
                                c2[i * k + j] += ri * row[j];
                            }
                        }
                    }
                }
            }
            if deaths == 0 {
                continue;
            }
            let terms = match ties {
                Ties::Breslow => 1,
                Ties::Efron => deaths,
            };
            let term_w = death_w / terms as f64;
            for t in 0..terms {
                let f = t as f64 / deaths as f64;
                let d = denom - f * denom2;
                ll -= term_w * d.ln();
                if !derivatives {
                    continue;
                }
                for i in 0..k {
                    am[i] = (a[i] - f * a2[i]) / d;
                    score[i] -= term_w * am[i];
                }
                for i in 0..k {
                    for j in i..k {
                        let cm = (c[i * k + j] - f * c2[i * k + j]) / d;
                        info[i * k + j] += term_w * (cm - am[i] * am[j]);
                    }
                }
            }
        }
        mirror_upper(&mut info, k);
        Evaluation { ll, score, info }
    }
}
