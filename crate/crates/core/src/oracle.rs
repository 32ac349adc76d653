//! Brute-force enumeration of all 2^p model weights for small p.
//!
//! Every subset is evaluated by an independent dense solve (nalgebra, no
//! incremental updates and no shared state across subsets): slow by design,
//! trustworthy by construction. This is the correctness reference for the
//! incremental workspace and for the two-step search.

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;

use crate::dataset::{Dataset, ModelSubset, PriorConfig, SigmaMode};
use crate::error::{Error, Result};

/// Hard cap on the enumeration size (2^22 subsets).
pub const ENUMERATION_CAP: usize = 22;
/// Full tables are kept up to this p; beyond it only the top entries.
pub const FULL_TABLE_P: usize = 20;
/// Table size kept when p exceeds `FULL_TABLE_P`.
pub const TOP_K: usize = 1024;

const CHUNK: u32 = 4096;

/// The enumerated model space: the argmax, the (possibly truncated) weight
/// table, and the log normalizing constant over all 2^p models.
#[derive(Debug, Clone)]
pub struct EnumerationResult {
    best_mask: u32,
    best_weight: f64,
    /// `(mask, log weight)` pairs: all 2^p of them for p <= 20 (ascending
    /// mask order), otherwise the TOP_K heaviest (descending weight).
    table: Vec<(u32, f64)>,
    log_normalizer: f64,
    p: usize,
    full_table: bool,
}

impl EnumerationResult {
    pub fn best(&self) -> ModelSubset {
        mask_to_subset(self.best_mask, self.p)
    }

    pub fn best_mask(&self) -> u32 {
        self.best_mask
    }

    pub fn best_weight(&self) -> f64 {
        self.best_weight
    }

    pub fn table(&self) -> &[(u32, f64)] {
        &self.table
    }

    pub fn is_full_table(&self) -> bool {
        self.full_table
    }

    /// Log of the sum of exp(weight) over every enumerated model.
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    /// Posterior probability of one table entry.
    pub fn normalized_probability(&self, weight: f64) -> f64 {
        (weight - self.log_normalizer).exp()
    }

    /// Argmax restricted to submodels of `allowed`, scanned from the stored
    /// table. Returns `None` when the table is truncated (use
    /// [`best_within_dense`] there, which recomputes instead of trusting the
    /// top-k cut).
    pub fn best_within(&self, allowed: &ModelSubset) -> Option<(ModelSubset, f64)> {
        if !self.full_table {
            return None;
        }
        let allowed_mask = subset_to_mask(allowed);
        let mut best: Option<(u32, f64)> = None;
        for &(mask, w) in &self.table {
            if mask & !allowed_mask != 0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((bm, bw)) => w > bw || (w == bw && lex_less(mask, bm, self.p)),
            };
            if better {
                best = Some((mask, w));
            }
        }
        best.map(|(m, w)| (mask_to_subset(m, self.p), w))
    }

    pub fn subset_of(&self, mask: u32) -> ModelSubset {
        mask_to_subset(mask, self.p)
    }
}

pub fn mask_to_subset(mask: u32, p: usize) -> ModelSubset {
    let indices: Vec<usize> = (0..p).filter(|&j| mask >> j & 1 == 1).collect();
    ModelSubset::new(indices, p).expect("mask yields a valid subset")
}

pub fn subset_to_mask(subset: &ModelSubset) -> u32 {
    subset.iter().fold(0u32, |m, &j| m | 1 << j)
}

/// Lexicographic order on the index sequences of two masks; used to break
/// exact weight ties deterministically.
fn lex_less(a: u32, b: u32, p: usize) -> bool {
    let va: Vec<usize> = (0..p).filter(|&j| a >> j & 1 == 1).collect();
    let vb: Vec<usize> = (0..p).filter(|&j| b >> j & 1 == 1).collect();
    va < vb
}

/// Dense, standalone evaluation of one model's log weight.
///
/// Forms `M = I + g X'X` explicitly, takes its Cholesky factor for the
/// determinant, and solves `M beta = g X'y` for the residual
/// `R*2 = y'y - b' beta`. Deliberately shares nothing with the incremental
/// workspace.
pub fn dense_log_weight(data: &Dataset, subset: &ModelSubset, prior: &PriorConfig) -> Result<f64> {
    let d = subset.len();
    let n = data.n() as f64;
    let yy = data.y_dot_y();
    let (logdet_ig, rss) = if d == 0 {
        (0.0, yy)
    } else {
        let mut m = DMatrix::<f64>::zeros(d, d);
        for (a, &ca) in subset.iter().enumerate() {
            for (b, &cb) in subset.iter().enumerate() {
                let mut v = prior.g * data.col_dot_col(ca, cb);
                if a == b {
                    v += 1.0;
                }
                m[(a, b)] = v;
            }
        }
        let b = DVector::from_iterator(d, subset.iter().map(|&j| data.col_dot_y(j)));
        let chol = Cholesky::new(m).ok_or_else(|| Error::NonFinite {
            what: "dense factorization of I + g X'X".into(),
        })?;
        let logdet: f64 = (0..d).map(|i| 2.0 * chol.l_dirty()[(i, i)].ln()).sum();
        let beta = chol.solve(&(&b * prior.g));
        (logdet, yy - b.dot(&beta))
    };
    let penalty = d as f64 * prior.log_prior_odds();
    match prior.sigma_mode {
        SigmaMode::Known(s2) => Ok(penalty - 0.5 * logdet_ig - rss / (2.0 * s2)),
        SigmaMode::Jeffreys => {
            if rss > 0.0 {
                Ok(penalty - 0.5 * logdet_ig - 0.5 * n * rss.ln())
            } else {
                Err(Error::DegenerateResponse)
            }
        }
    }
}

/// Argmax over the submodels of `allowed`, each weight computed by the dense
/// route. Exact for any |allowed| <= 22 regardless of table truncation.
pub fn best_within_dense(
    data: &Dataset,
    prior: &PriorConfig,
    allowed: &ModelSubset,
) -> Result<(ModelSubset, f64)> {
    let k = allowed.len();
    if k > ENUMERATION_CAP {
        return Err(Error::EnumerationTooLarge {
            p: k,
            cap: ENUMERATION_CAP,
        });
    }
    let cols: Vec<usize> = allowed.indices().to_vec();
    let mut best: Option<(ModelSubset, f64)> = None;
    for sub in 0u32..1 << k {
        let indices: Vec<usize> = (0..k).filter(|&t| sub >> t & 1 == 1).map(|t| cols[t]).collect();
        let subset = ModelSubset::new(indices, data.p())?;
        let w = dense_log_weight(data, &subset, prior)?;
        let better = match &best {
            None => true,
            Some((bs, bw)) => w > *bw || (w == *bw && subset.indices() < bs.indices()),
        };
        if better {
            best = Some((subset, w));
        }
    }
    best.ok_or(Error::EmptyScreenedSet)
}

struct ChunkPartial {
    best: (u32, f64),
    lse_max: f64,
    lse_sum: f64,
    entries: Vec<(u32, f64)>,
}

/// Enumerates the weights of every subset of the p columns (p <= p_cap <= 22)
/// and returns the argmax with a lowest-lexicographic tie-break.
///
/// Chunks of masks are evaluated in parallel but combined in a fixed order,
/// so the result is identical for any worker count.
pub fn enumerate_posteriors(
    data: &Dataset,
    prior: &PriorConfig,
    p_cap: usize,
) -> Result<EnumerationResult> {
    let p = data.p();
    let cap = p_cap.min(ENUMERATION_CAP);
    if p > cap {
        return Err(Error::EnumerationTooLarge { p, cap });
    }
    let total: u64 = 1u64 << p;
    let full_table = p <= FULL_TABLE_P;
    let chunk_starts: Vec<u32> = (0..total).step_by(CHUNK as usize).map(|s| s as u32).collect();

    let partials: Vec<Result<ChunkPartial>> = chunk_starts
        .par_iter()
        .map(|&start| {
            let end = (start as u64 + CHUNK as u64).min(total) as u32;
            let mut entries = Vec::with_capacity((end - start) as usize);
            let mut best: Option<(u32, f64)> = None;
            let mut lse_max = f64::NEG_INFINITY;
            for mask in start..end {
                let subset = mask_to_subset(mask, p);
                let w = dense_log_weight(data, &subset, prior)?;
                entries.push((mask, w));
                lse_max = lse_max.max(w);
                let better = match best {
                    None => true,
                    Some((bm, bw)) => w > bw || (w == bw && lex_less(mask, bm, p)),
                };
                if better {
                    best = Some((mask, w));
                }
            }
            let lse_sum: f64 = entries.iter().map(|&(_, w)| (w - lse_max).exp()).sum();
            if !full_table {
                entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                entries.truncate(TOP_K);
            }
            Ok(ChunkPartial {
                best: best.expect("chunk is non-empty"),
                lse_max,
                lse_sum,
                entries,
            })
        })
        .collect();

    let mut best: Option<(u32, f64)> = None;
    let mut table: Vec<(u32, f64)> = Vec::new();
    let mut global_max = f64::NEG_INFINITY;
    let mut parts = Vec::with_capacity(partials.len());
    for r in partials {
        let part = r?;
        global_max = global_max.max(part.lse_max);
        parts.push(part);
    }
    let mut lse_sum = 0.0;
    for part in &parts {
        lse_sum += part.lse_sum * (part.lse_max - global_max).exp();
        let (m, w) = part.best;
        let better = match best {
            None => true,
            Some((bm, bw)) => w > bw || (w == bw && lex_less(m, bm, p)),
        };
        if better {
            best = Some((m, w));
        }
        table.extend_from_slice(&part.entries);
    }
    if !full_table {
        table.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        table.truncate(TOP_K);
    }
    let (best_mask, best_weight) = best.expect("model space is non-empty");
    Ok(EnumerationResult {
        best_mask,
        best_weight,
        table,
        log_normalizer: global_max + lse_sum.ln(),
        p,
        full_table,
    })
}
