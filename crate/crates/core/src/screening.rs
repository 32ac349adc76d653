//! Step one of the two-step search: swap-based screening over all size-d
//! models, keeping a superset of the true support.
//!
//! Each pass visits the d slots of the current model. For a slot holding
//! column c, the workspace is downdated once to the (d-1)-column base, every
//! outside column is scored by a rank-one append against that base, and c is
//! replaced only when the best outside candidate scores strictly higher than
//! c scored the same way. Candidates are scored in parallel and reduced by a
//! (weight, lowest index) argmax, so the outcome does not depend on
//! evaluation order or worker count.

use rayon::prelude::*;

use crate::dataset::{Dataset, ModelSubset, PriorConfig};
use crate::error::{Error, Result};
use crate::marginal::ModelWorkspace;

/// Configuration of the screening step.
#[derive(Debug, Clone)]
pub struct ScreeningConfig {
    /// Target model size; defaults to floor(n/4) clamped to [1, min(n, p)].
    pub d: usize,
    /// Maximum number of evaluation passes.
    pub max_passes: usize,
    /// Slab scale for this step; `None` resolves to p^2/n.
    pub g_screen: Option<f64>,
    pub seed: u64,
    /// Start from a uniform random size-d model instead of the top-d columns
    /// by |x_j'y|.
    pub random_init: bool,
    /// Worker threads for candidate scans (0 = all available). Only used by
    /// entry points that build their own pool.
    pub parallel_workers: usize,
}

impl ScreeningConfig {
    /// Defaults for an (n, p) problem: d = floor(n/4), 30 passes, g = p^2/n.
    pub fn for_problem(n: usize, p: usize) -> Self {
        Self {
            d: default_d(n, p),
            max_passes: 30,
            g_screen: None,
            seed: 0,
            random_init: false,
            parallel_workers: 0,
        }
    }

    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        if self.d < 1 || self.d > n.min(p) {
            return Err(Error::InvalidConfig(format!(
                "screening size d={} must lie in [1, min(n, p)] = [1, {}]",
                self.d,
                n.min(p)
            )));
        }
        if self.max_passes < 1 {
            return Err(Error::InvalidConfig("max_passes must be >= 1".into()));
        }
        if let Some(g) = self.g_screen {
            if g.is_nan() || g <= 0.0 {
                return Err(Error::InvalidConfig(format!("g_screen={g} must be > 0")));
            }
        }
        Ok(())
    }

    /// Slab scale for this step, defaulting to p^2/n.
    pub fn effective_g(&self, n: usize, p: usize) -> f64 {
        self.g_screen
            .unwrap_or_else(|| (p as f64) * (p as f64) / n as f64)
    }
}

pub fn default_d(n: usize, p: usize) -> usize {
    (n / 4).clamp(1, n.min(p))
}

/// What one evaluation pass did.
#[derive(Debug, Clone, Copy, Default)]
pub struct PassOutcome {
    pub changed: bool,
    /// Number of outside candidates scored.
    pub candidate_evals: u64,
    pub swaps: u32,
}

/// Counters accumulated over a whole screening run.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScreeningDiagnostics {
    pub passes: usize,
    pub candidate_evals: u64,
    pub swaps: u64,
    /// Log weight of the final model under the screening prior.
    pub final_log_weight: f64,
}

/// Result of the screening step.
#[derive(Debug, Clone)]
pub struct ScreeningOutcome {
    pub subset: ModelSubset,
    pub diagnostics: ScreeningDiagnostics,
}

/// One pass over the model's slots in the given order (a permutation of
/// 0..d, indexing the slots as of the start of the pass).
///
/// Returns whether any slot was swapped. With no outside candidates
/// (d = p) the pass is a no-op.
pub fn evaluation_pass(
    ws: &mut ModelWorkspace,
    data: &Dataset,
    prior: &PriorConfig,
    order: &[usize],
) -> Result<PassOutcome> {
    let d = ws.len();
    let p = data.p();
    if order.len() != d {
        return Err(Error::InvalidConfig(format!(
            "pass order has {} entries for a model of size {d}",
            order.len()
        )));
    }
    let mut outcome = PassOutcome::default();
    if d == 0 || p == d {
        return Ok(outcome);
    }

    let incumbents: Vec<usize> = ws.columns().to_vec();
    for &slot in order {
        let out_col = incumbents[slot];
        // Downdate once to the (d-1)-column base, then score the incumbent
        // and every outside column through the identical append path.
        let base_eval = ws.eval_remove(out_col)?;
        ws.commit_remove(base_eval);
        let cache = ws.residual_cache();

        let incumbent_w = ws
            .eval_append(&cache, out_col, data)?
            .log_posterior_weight(prior)?;

        let in_model: Vec<bool> = {
            let mut mask = vec![false; p];
            for &c in ws.columns() {
                mask[c] = true;
            }
            mask[out_col] = true;
            mask
        };
        let candidates: Vec<usize> = (0..p).filter(|&j| !in_model[j]).collect();
        outcome.candidate_evals += candidates.len() as u64;

        let best = candidates
            .par_iter()
            .with_min_len(64)
            .map(|&j| -> Result<(f64, usize)> {
                let w = ws
                    .eval_append(&cache, j, data)?
                    .log_posterior_weight(prior)?;
                Ok((w, j))
            })
            .try_reduce(
                || (f64::NEG_INFINITY, usize::MAX),
                |a, b| Ok(if better(b, a) { b } else { a }),
            )?;

        let chosen = if best.0 > incumbent_w { best.1 } else { out_col };
        if chosen != out_col {
            outcome.swaps += 1;
            outcome.changed = true;
        }
        let eval = ws.eval_append(&cache, chosen, data)?;
        ws.commit_append(eval);
    }
    Ok(outcome)
}

/// Candidate ordering: higher weight wins, ties go to the lower column
/// index. Associative and commutative, so parallel reduction order is
/// irrelevant.
fn better(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Initial size-d model: the d columns with the largest |x_j'y|, ties to the
/// lower index.
pub fn marginal_init(data: &Dataset, d: usize) -> ModelSubset {
    let mut scored: Vec<(f64, usize)> = (0..data.p())
        .map(|j| (data.col_dot_y(j).abs(), j))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    ModelSubset::from_unsorted(scored.iter().take(d).map(|&(_, j)| j).collect(), data.p())
        .expect("top-d indices form a valid subset")
}

fn random_init(data: &Dataset, d: usize, seed: u64) -> ModelSubset {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, data.p(), d).into_vec();
    ModelSubset::from_unsorted(picked, data.p()).expect("sampled indices form a valid subset")
}

/// Runs up to `max_passes` evaluation passes, stopping early at the first
/// pass with no swap (a fixed point of the update map).
///
/// With `parallel_workers > 0` the candidate scans run on a dedicated pool
/// of that size; 0 uses the ambient rayon pool. The outcome is identical
/// either way.
pub fn run_screening(
    data: &Dataset,
    prior: &PriorConfig,
    cfg: &ScreeningConfig,
    init: Option<ModelSubset>,
) -> Result<ScreeningOutcome> {
    if cfg.parallel_workers > 0 {
        let pool = crate::make_pool(cfg.parallel_workers)?;
        return pool.install(|| run_screening_inner(data, prior, cfg, init));
    }
    run_screening_inner(data, prior, cfg, init)
}

fn run_screening_inner(
    data: &Dataset,
    prior: &PriorConfig,
    cfg: &ScreeningConfig,
    init: Option<ModelSubset>,
) -> Result<ScreeningOutcome> {
    cfg.validate(data.n(), data.p())?;
    let d = cfg.d;
    let subset = match init {
        Some(s) => {
            if s.len() != d {
                return Err(Error::InvalidConfig(format!(
                    "initial model has {} columns, screening expects d={d}",
                    s.len()
                )));
            }
            s
        }
        None if cfg.random_init => random_init(data, d, cfg.seed),
        None => marginal_init(data, d),
    };

    let mut diagnostics = ScreeningDiagnostics::default();
    let order: Vec<usize> = (0..d).collect();
    let mut current = subset;
    loop {
        // Re-factorize at each pass boundary: the scan cost dominates and a
        // fresh factor stops roundoff from accumulating across passes.
        let mut ws = ModelWorkspace::new(data, &current, prior)?;
        if diagnostics.passes >= cfg.max_passes {
            diagnostics.final_log_weight = ws.log_posterior_weight(prior)?;
            return Ok(ScreeningOutcome {
                subset: current,
                diagnostics,
            });
        }
        let pass = evaluation_pass(&mut ws, data, prior, &order)?;
        diagnostics.passes += 1;
        diagnostics.candidate_evals += pass.candidate_evals;
        diagnostics.swaps += pass.swaps as u64;
        current = ws.subset();
        if !pass.changed {
            diagnostics.final_log_weight = ws.log_posterior_weight(prior)?;
            return Ok(ScreeningOutcome {
                subset: current,
                diagnostics,
            });
        }
    }
}
