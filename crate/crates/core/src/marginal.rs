//! Closed-form log posterior model weights and the incremental workspace
//! that makes candidate scans cheap.
//!
//! For a subset alpha of d columns the unnormalized log weight is
//!
//! ```text
//! w(alpha) = d log(q/(1-q)) - 1/2 log|I + g X'X| - R*2/(2 sigma^2)   (known sigma^2)
//! w(alpha) = d log(q/(1-q)) - 1/2 log|I + g X'X| - (n/2) log R*2     (Jeffreys)
//! ```
//!
//! with `A = (1/g) I + X'X`, `R*2 = y'y - b' A^-1 b`, `b = X'y`, and
//! `log|I + g X'X| = d log g + log|A|`. Differences of two weights are exact
//! log posterior odds. The workspace caches the Cholesky factor of `A` and
//! supports O(n d + d^2) column appends, O(d^2) removals, and non-destructive
//! candidate evaluation for scans.

use crate::chol::PackedChol;
use crate::dataset::{dot, Dataset, ModelSubset, PriorConfig, SigmaMode};
use crate::error::{Error, Result};

/// Log weight from its ingredients; shared by the workspace and the
/// non-committing evaluation paths.
pub(crate) fn weight_from_parts(
    d: usize,
    n: usize,
    logdet_a: f64,
    rss: f64,
    prior: &PriorConfig,
) -> Result<f64> {
    let penalty = d as f64 * prior.log_prior_odds();
    let logdet_ig = d as f64 * prior.g.ln() + logdet_a;
    match prior.sigma_mode {
        SigmaMode::Known(s2) => Ok(penalty - 0.5 * logdet_ig - rss / (2.0 * s2)),
        SigmaMode::Jeffreys => {
            if rss > 0.0 {
                Ok(penalty - 0.5 * logdet_ig - 0.5 * n as f64 * rss.ln())
            } else {
                Err(Error::DegenerateResponse)
            }
        }
    }
}

/// Cached solve of `L u = X'y`; reused across the candidate evaluations of a
/// scan so that each append costs one new component.
pub struct ResidualCache {
    u: Vec<f64>,
    rss: f64,
}

impl ResidualCache {
    pub fn rss(&self) -> f64 {
        self.rss
    }
}

/// Outcome of evaluating (not committing) the append of one column.
pub struct AppendEval {
    col: usize,
    v: Vec<f64>,
    diag: f64,
    bx_t: f64,
    rss: f64,
    logdet: f64,
    d: usize,
    n: usize,
}

impl AppendEval {
    pub fn col(&self) -> usize {
        self.col
    }

    pub fn rss(&self) -> f64 {
        self.rss
    }

    /// Weight of the model with the column appended.
    pub fn log_posterior_weight(&self, prior: &PriorConfig) -> Result<f64> {
        weight_from_parts(self.d, self.n, self.logdet, self.rss, prior)
    }
}

/// Outcome of evaluating (not committing) the removal of one column.
pub struct RemoveEval {
    col: usize,
    pos: usize,
    chol: PackedChol,
    bx: Vec<f64>,
    rss: f64,
    logdet: f64,
    d: usize,
    n: usize,
}

impl RemoveEval {
    pub fn col(&self) -> usize {
        self.col
    }

    pub fn rss(&self) -> f64 {
        self.rss
    }

    pub fn log_posterior_weight(&self, prior: &PriorConfig) -> Result<f64> {
        weight_from_parts(self.d, self.n, self.logdet, self.rss, prior)
    }
}

/// Cached Cholesky factor of `A = (1/g) I + X'X` for the current subset,
/// together with `X'y` and `y'y`. Columns are kept in insertion order; the
/// weight and the coefficients do not depend on that order.
#[derive(Debug, Clone)]
pub struct ModelWorkspace {
    cols: Vec<usize>,
    chol: PackedChol,
    bx: Vec<f64>,
    yy: f64,
    logdet_a: f64,
    g: f64,
    n: usize,
    p: usize,
}

impl ModelWorkspace {
    /// Builds the workspace from scratch in O(n d^2 + d^3).
    pub fn new(data: &Dataset, subset: &ModelSubset, prior: &PriorConfig) -> Result<Self> {
        let d = subset.len();
        for &j in subset.iter() {
            if j >= data.p() {
                return Err(Error::IndexOutOfRange {
                    index: j,
                    p: data.p(),
                });
            }
        }
        let ridge = 1.0 / prior.g;
        let mut a = Vec::with_capacity(d * (d + 1) / 2);
        for (i, &ci) in subset.iter().enumerate() {
            for &cj in subset.iter().take(i + 1) {
                let mut v = data.col_dot_col(ci, cj);
                if ci == cj {
                    v += ridge;
                }
                a.push(v);
            }
        }
        let chol = PackedChol::factorize_packed(a, d);
        let logdet_a = chol.ln_det();
        let bx = subset.iter().map(|&j| data.col_dot_y(j)).collect();
        Ok(Self {
            cols: subset.indices().to_vec(),
            chol,
            bx,
            yy: data.y_dot_y(),
            logdet_a,
            g: prior.g,
            n: data.n(),
            p: data.p(),
        })
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    /// Columns in factor (insertion) order.
    pub fn columns(&self) -> &[usize] {
        &self.cols
    }

    /// The current subset, sorted.
    pub fn subset(&self) -> ModelSubset {
        ModelSubset::from_unsorted(self.cols.clone(), self.p)
            .expect("workspace columns are a valid subset")
    }

    pub fn contains(&self, j: usize) -> bool {
        self.cols.contains(&j)
    }

    pub fn yy(&self) -> f64 {
        self.yy
    }

    /// log |A| for the current subset.
    pub fn logdet_a(&self) -> f64 {
        self.logdet_a
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    fn position_of(&self, j: usize) -> Option<usize> {
        self.cols.iter().position(|&c| c == j)
    }

    fn check_prior(&self, prior: &PriorConfig) -> Result<()> {
        if (prior.g - self.g).abs() > self.g * 1e-12 {
            return Err(Error::InvalidPrior(format!(
                "workspace was built with g={}, weight requested with g={}",
                self.g, prior.g
            )));
        }
        Ok(())
    }

    /// Solves `L u = X'y` and forms the regularized residual
    /// `R*2 = y'y - u'u`.
    pub fn residual_cache(&self) -> ResidualCache {
        let u = self.chol.solve_lower(&self.bx);
        let rss = self.yy - u.iter().map(|x| x * x).sum::<f64>();
        ResidualCache { u, rss }
    }

    /// Regularized residual sum of squares for the current subset.
    pub fn rss(&self) -> f64 {
        self.residual_cache().rss
    }

    /// Log of the unnormalized posterior weight of the current model.
    pub fn log_posterior_weight(&self, prior: &PriorConfig) -> Result<f64> {
        self.check_prior(prior)?;
        let cache = self.residual_cache();
        weight_from_parts(self.len(), self.n, self.logdet_a, cache.rss, prior)
    }

    /// Evaluates appending column `j` in O(n d + d^2) without mutating the
    /// workspace. `cache` must come from `residual_cache` on this workspace.
    pub fn eval_append(
        &self,
        cache: &ResidualCache,
        j: usize,
        data: &Dataset,
    ) -> Result<AppendEval> {
        if j >= self.p {
            return Err(Error::IndexOutOfRange { index: j, p: self.p });
        }
        if self.contains(j) {
            return Err(Error::AlreadyInModel { index: j });
        }
        let c: Vec<f64> = self.cols.iter().map(|&ci| data.col_dot_col(ci, j)).collect();
        let v = self.chol.solve_lower(&c);
        let a_jj = 1.0 / self.g + data.col_dot_col(j, j);
        let diag = PackedChol::append_diag(a_jj, &v);
        let bx_t = data.col_dot_y(j);
        let w_new = (bx_t - dot(&v, &cache.u)) / diag;
        Ok(AppendEval {
            col: j,
            v,
            diag,
            bx_t,
            rss: cache.rss - w_new * w_new,
            logdet: self.logdet_a + 2.0 * diag.ln(),
            d: self.len() + 1,
            n: self.n,
        })
    }

    pub fn commit_append(&mut self, eval: AppendEval) {
        debug_assert_eq!(eval.v.len(), self.chol.size());
        self.cols.push(eval.col);
        self.chol.append_row(&eval.v, eval.diag);
        self.bx.push(eval.bx_t);
        self.logdet_a = eval.logdet;
    }

    /// Evaluates removing column `j` in O(d^2) without mutating the
    /// workspace.
    pub fn eval_remove(&self, j: usize) -> Result<RemoveEval> {
        let pos = self
            .position_of(j)
            .ok_or(Error::NotInModel { index: j })?;
        let chol = self.chol.removed(pos);
        let mut bx = self.bx.clone();
        bx.remove(pos);
        let u = chol.solve_lower(&bx);
        let rss = self.yy - u.iter().map(|x| x * x).sum::<f64>();
        let logdet = chol.ln_det();
        Ok(RemoveEval {
            col: j,
            pos,
            chol,
            bx,
            rss,
            logdet,
            d: self.len() - 1,
            n: self.n,
        })
    }

    pub fn commit_remove(&mut self, eval: RemoveEval) {
        debug_assert_eq!(self.cols[eval.pos], eval.col);
        self.cols.remove(eval.pos);
        self.chol = eval.chol;
        self.bx = eval.bx;
        self.logdet_a = eval.logdet;
    }

    /// Appends column `j`; the workspace then equals a scratch build on the
    /// enlarged subset up to roundoff.
    pub fn add_covariate(&mut self, j: usize, data: &Dataset) -> Result<()> {
        let cache = self.residual_cache();
        let eval = self.eval_append(&cache, j, data)?;
        self.commit_append(eval);
        Ok(())
    }

    /// Removes column `j` via one Givens sweep on the factor.
    pub fn remove_covariate(&mut self, j: usize) -> Result<()> {
        let eval = self.eval_remove(j)?;
        self.commit_remove(eval);
        Ok(())
    }

    /// Replaces `out_j` by `in_k`: a removal followed by an append.
    pub fn swap_covariate(&mut self, out_j: usize, in_k: usize, data: &Dataset) -> Result<()> {
        if self.position_of(out_j).is_none() {
            return Err(Error::NotInModel { index: out_j });
        }
        if in_k >= self.p {
            return Err(Error::IndexOutOfRange {
                index: in_k,
                p: self.p,
            });
        }
        if self.contains(in_k) {
            return Err(Error::AlreadyInModel { index: in_k });
        }
        self.remove_covariate(out_j)?;
        self.add_covariate(in_k, data)
    }

    /// Posterior mean of the included coefficients, `A^-1 X'y`, aligned with
    /// the sorted subset returned by [`ModelWorkspace::subset`].
    pub fn posterior_mean_coefficients(&self) -> Vec<f64> {
        let u = self.chol.solve_lower(&self.bx);
        let beta = self.chol.solve_upper(&u);
        let mut order: Vec<usize> = (0..self.cols.len()).collect();
        order.sort_unstable_by_key(|&k| self.cols[k]);
        order.into_iter().map(|k| beta[k]).collect()
    }

    /// Largest relative deviation of `L L'` from a scratch recomputation of
    /// `(1/g) I + X'X`; test support for the factor invariant.
    pub fn max_reconstruction_error(&self, data: &Dataset) -> f64 {
        let rec = self.chol.reconstruct();
        let ridge = 1.0 / self.g;
        let mut worst = 0.0f64;
        for (i, &ci) in self.cols.iter().enumerate() {
            for (j, &cj) in self.cols.iter().enumerate().take(i + 1) {
                let mut a = data.col_dot_col(ci, cj);
                if i == j {
                    a += ridge;
                }
                let scale = a.abs().max(1.0);
                worst = worst.max((rec[i][j] - a).abs() / scale);
            }
        }
        worst
    }
}
