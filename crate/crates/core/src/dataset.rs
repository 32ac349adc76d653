//! Core domain types: the regression data, model subsets, and the prior.

use crate::error::{Error, Result};

/// A regression problem: response `y` of length `n` and an `n x p` design
/// matrix stored column-major so that individual covariate columns are
/// contiguous slices.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: Vec<f64>,
    /// Column-major design matrix: column `j` lives at `x[j*n..(j+1)*n]`.
    x: Vec<f64>,
    n: usize,
    p: usize,
}

impl Dataset {
    /// Builds a dataset from a response vector and covariate columns.
    pub fn from_columns(y: Vec<f64>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let n = y.len();
        let p = columns.len();
        if n == 0 {
            return Err(Error::DimensionMismatch {
                what: "empty response".into(),
            });
        }
        let mut x = Vec::with_capacity(n * p);
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::DimensionMismatch {
                    what: format!("column {j} has {} rows, expected {n}", col.len()),
                });
            }
            x.extend_from_slice(col);
        }
        Self::from_col_major(y, x, n, p)
    }

    /// Builds a dataset from an already column-major flat matrix.
    pub fn from_col_major(y: Vec<f64>, x: Vec<f64>, n: usize, p: usize) -> Result<Self> {
        if y.len() != n || x.len() != n * p {
            return Err(Error::DimensionMismatch {
                what: format!(
                    "y has {} entries and x has {} entries for n={n}, p={p}",
                    y.len(),
                    x.len()
                ),
            });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("y[{i}]"),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("x (row {}, column {})", i % n, i / n),
            });
        }
        Ok(Self { y, x, n, p })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Covariate column `j` as a contiguous slice.
    pub fn col(&self, j: usize) -> &[f64] {
        debug_assert!(j < self.p);
        &self.x[j * self.n..(j + 1) * self.n]
    }

    /// x_i' x_j
    pub fn col_dot_col(&self, i: usize, j: usize) -> f64 {
        dot(self.col(i), self.col(j))
    }

    /// x_j' y
    pub fn col_dot_y(&self, j: usize) -> f64 {
        dot(self.col(j), &self.y)
    }

    /// y' y
    pub fn y_dot_y(&self) -> f64 {
        dot(&self.y, &self.y)
    }

    /// Row `i` of the design matrix, gathered from the column-major storage.
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.p).map(|j| self.col(j)[i]).collect()
    }

    /// Copy of the dataset with row `i` removed; used by leave-one-out folds.
    pub fn without_row(&self, i: usize) -> Dataset {
        debug_assert!(i < self.n);
        let n = self.n - 1;
        let mut y = Vec::with_capacity(n);
        y.extend_from_slice(&self.y[..i]);
        y.extend_from_slice(&self.y[i + 1..]);
        let mut x = Vec::with_capacity(n * self.p);
        for j in 0..self.p {
            let col = self.col(j);
            x.extend_from_slice(&col[..i]);
            x.extend_from_slice(&col[i + 1..]);
        }
        Dataset {
            y,
            x,
            n,
            p: self.p,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// An ordered set of selected column indices, strictly increasing and all
/// below `p`. Model size may exceed `n`: the ridge term keeps the regularized
/// Gram matrix positive definite even for rank-deficient designs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelSubset {
    indices: Vec<usize>,
}

impl ModelSubset {
    pub fn new(indices: Vec<usize>, p: usize) -> Result<Self> {
        for (k, &j) in indices.iter().enumerate() {
            if j >= p {
                return Err(Error::IndexOutOfRange { index: j, p });
            }
            if k > 0 && indices[k - 1] >= j {
                return Err(Error::NotStrictlyIncreasing { index: j });
            }
        }
        Ok(Self { indices })
    }

    pub fn empty() -> Self {
        Self {
            indices: Vec::new(),
        }
    }

    /// Sorts and validates an unsorted index collection.
    pub fn from_unsorted(mut indices: Vec<usize>, p: usize) -> Result<Self> {
        indices.sort_unstable();
        Self::new(indices, p)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.indices.iter()
    }

    /// True when every index of `other` is also in `self`.
    pub fn is_superset_of(&self, other: &ModelSubset) -> bool {
        other.indices.iter().all(|&j| self.contains(j))
    }
}

/// How the error variance enters the model weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaMode {
    /// Error variance known; the weight carries exp(-R*^2 / (2 sigma^2)).
    Known(f64),
    /// Scale-invariant prior on the variance; the weight carries (R*^2)^(-n/2).
    Jeffreys,
}

/// Slab scale, inclusion prior, and variance mode for the model weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorConfig {
    /// Slab scale g of the Gaussian prior N(0, g sigma^2 I) on included
    /// coefficients.
    pub g: f64,
    /// Per-covariate inclusion probability of the Bernoulli model prior.
    /// With q = 1/p each included covariate pays a log(p-1) penalty.
    pub q: f64,
    pub sigma_mode: SigmaMode,
}

impl PriorConfig {
    pub fn new(g: f64, q: f64, sigma_mode: SigmaMode) -> Result<Self> {
        if !g.is_finite() || g <= 0.0 {
            return Err(Error::InvalidPrior(format!("g must be positive, got {g}")));
        }
        if q.is_nan() || q <= 0.0 || q >= 1.0 {
            return Err(Error::InvalidPrior(format!("q must be in (0,1), got {q}")));
        }
        if let SigmaMode::Known(s2) = sigma_mode {
            if !s2.is_finite() || s2 <= 0.0 {
                return Err(Error::InvalidPrior(format!(
                    "known sigma^2 must be positive, got {s2}"
                )));
            }
        }
        Ok(Self { g, q, sigma_mode })
    }

    /// Prior with the default inclusion probability q = 1/p. A single-column
    /// problem degenerates to q = 1/2 (both models equally likely a priori),
    /// since q = 1 would put no mass on the empty model.
    pub fn with_default_q(g: f64, p: usize, sigma_mode: SigmaMode) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidPrior("default q = 1/p needs p >= 1".into()));
        }
        let q = if p == 1 { 0.5 } else { 1.0 / p as f64 };
        Self::new(g, q, sigma_mode)
    }

    /// Log prior odds of inclusion, log(q / (1-q)). With q = 1/p this is
    /// exactly -log(p-1).
    pub fn log_prior_odds(&self) -> f64 {
        (self.q / (1.0 - self.q)).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_rejects_non_finite() {
        let err = Dataset::from_columns(vec![1.0, f64::NAN], vec![vec![0.0, 1.0]]);
        assert!(matches!(err, Err(Error::NonFinite { .. })));
        let err = Dataset::from_columns(vec![1.0, 2.0], vec![vec![0.0, f64::INFINITY]]);
        assert!(matches!(err, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn dataset_column_access_is_column_major() {
        let d = Dataset::from_columns(vec![1.0, 2.0], vec![vec![3.0, 4.0], vec![5.0, 6.0]])
            .unwrap();
        assert_eq!(d.col(0), &[3.0, 4.0]);
        assert_eq!(d.col(1), &[5.0, 6.0]);
        assert_eq!(d.row(1), vec![4.0, 6.0]);
        assert_eq!(d.col_dot_y(1), 5.0 + 12.0);
    }

    #[test]
    fn without_row_drops_exactly_one() {
        let d = Dataset::from_columns(
            vec![1.0, 2.0, 3.0],
            vec![vec![10.0, 20.0, 30.0], vec![4.0, 5.0, 6.0]],
        )
        .unwrap();
        let t = d.without_row(1);
        assert_eq!(t.n(), 2);
        assert_eq!(t.y(), &[1.0, 3.0]);
        assert_eq!(t.col(0), &[10.0, 30.0]);
        assert_eq!(t.col(1), &[4.0, 6.0]);
    }

    #[test]
    fn subset_validation() {
        assert!(ModelSubset::new(vec![0, 2, 5], 6).is_ok());
        assert!(matches!(
            ModelSubset::new(vec![0, 0], 6),
            Err(Error::NotStrictlyIncreasing { .. })
        ));
        assert!(matches!(
            ModelSubset::new(vec![2, 1], 6),
            Err(Error::NotStrictlyIncreasing { .. })
        ));
        assert!(matches!(
            ModelSubset::new(vec![6], 6),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn subset_superset_check() {
        let a = ModelSubset::new(vec![1, 3, 4], 10).unwrap();
        let b = ModelSubset::new(vec![1, 4], 10).unwrap();
        assert!(a.is_superset_of(&b));
        assert!(!b.is_superset_of(&a));
        assert!(a.is_superset_of(&ModelSubset::empty()));
    }

    #[test]
    fn prior_odds_match_penalty() {
        let prior = PriorConfig::with_default_q(1.0, 100, SigmaMode::Jeffreys).unwrap();
        let expected = -(99.0f64).ln();
        assert!((prior.log_prior_odds() - expected).abs() < 1e-12);
    }
}
