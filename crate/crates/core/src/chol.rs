//! Packed lower-triangular Cholesky factors with append and delete updates.
//!
//! Row `i` of the factor is stored at `data[i*(i+1)/2 ..= i*(i+1)/2 + i]`.
//! Appending a variable extends the factor by one row in O(d^2) given the
//! solved cross-product column; deleting a variable removes one row and
//! re-triangularizes the trailing block with Givens rotations in O(d^2).

/// Diagonal floor: the regularized Gram matrix is positive definite by
/// construction, so a non-positive pivot can only be roundoff from a
/// numerically rank-deficient subset. Clamping keeps the factor usable and
/// makes the degenerate direction pay an enormous determinant penalty.
const MIN_DIAG: f64 = 1e-150;

#[derive(Debug, Clone, Default)]
pub(crate) struct PackedChol {
    size: usize,
    data: Vec<f64>,
}

#[inline]
fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

impl PackedChol {
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[row_start(i)..row_start(i) + i + 1]
    }

    #[inline]
    pub fn diag(&self, i: usize) -> f64 {
        self.data[row_start(i) + i]
    }

    /// Factorizes a symmetric positive definite matrix given in packed
    /// lower-triangular form (same layout as the factor itself).
    pub fn factorize_packed(mut a: Vec<f64>, m: usize) -> Self {
        debug_assert_eq!(a.len(), row_start(m));
        for i in 0..m {
            for j in 0..=i {
                let mut s = a[row_start(i) + j];
                for k in 0..j {
                    s -= a[row_start(i) + k] * a[row_start(j) + k];
                }
                if j < i {
                    a[row_start(i) + j] = s / a[row_start(j) + j];
                } else {
                    a[row_start(i) + i] = if s > MIN_DIAG * MIN_DIAG {
                        s.sqrt()
                    } else {
                        MIN_DIAG
                    };
                }
            }
        }
        Self { size: m, data: a }
    }

    /// Forward substitution: solves L u = b.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.size);
        let mut u = b.to_vec();
        for i in 0..self.size {
            let row = self.row(i);
            let mut s = u[i];
            for k in 0..i {
                s -= row[k] * u[k];
            }
            u[i] = s / row[i];
        }
        u
    }

    /// Backward substitution: solves L' x = b.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.size);
        let mut x = b.to_vec();
        for i in (0..self.size).rev() {
            let mut s = x[i];
            for k in i + 1..self.size {
                s -= self.data[row_start(k) + i] * x[k];
            }
            x[i] = s / self.diag(i);
        }
        x
    }

    /// log |L L'| = 2 sum log L_ii
    pub fn ln_det(&self) -> f64 {
        (0..self.size).map(|i| 2.0 * self.diag(i).ln()).sum()
    }

    /// Extends the factor by one row `[v, diag]`.
    pub fn append_row(&mut self, v: &[f64], diag: f64) {
        debug_assert_eq!(v.len(), self.size);
        self.data.extend_from_slice(v);
        self.data.push(diag.max(MIN_DIAG));
        self.size += 1;
    }

    /// New pivot for an appended variable: sqrt(a_jj - v'v), clamped away
    /// from zero for numerically dependent columns.
    pub fn append_diag(a_jj: f64, v: &[f64]) -> f64 {
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let s = a_jj - vv;
        if s > MIN_DIAG * MIN_DIAG {
            s.sqrt()
        } else {
            MIN_DIAG
        }
    }

    /// Factor of the matrix with row and column `pos` deleted.
    ///
    /// Rows above `pos` are untouched. The trailing rows lose row `pos` and
    /// acquire one entry right of the diagonal each; a sweep of Givens
    /// rotations over adjacent column pairs restores triangularity.
    pub fn removed(&self, pos: usize) -> Self {
        let m = self.size;
        debug_assert!(pos < m);
        let new_m = m - 1;
        let mut data = Vec::with_capacity(row_start(new_m));
        data.extend_from_slice(&self.data[..row_start(pos)]);

        // Trailing block: old rows pos+1..m over columns pos..m, dense scratch.
        let rows = m - pos - 1;
        let width = m - pos;
        let mut w = vec![0.0; rows * width];
        for r in 0..rows {
            let old = self.row(pos + 1 + r);
            let take = (pos + 1 + r + 1) - pos; // entries in columns pos..=old_row
            w[r * width..r * width + take].copy_from_slice(&old[pos..pos + take]);
        }

        // Zero the superdiagonal entry of each row in turn.
        for j in 0..rows {
            let a = w[j * width + j];
            let b = w[j * width + j + 1];
            let r = a.hypot(b);
            let (c, s) = if r > 0.0 { (a / r, b / r) } else { (1.0, 0.0) };
            w[j * width + j] = r.max(MIN_DIAG);
            w[j * width + j + 1] = 0.0;
            for i in j + 1..rows {
                let t1 = w[i * width + j];
                let t2 = w[i * width + j + 1];
                w[i * width + j] = c * t1 + s * t2;
                w[i * width + j + 1] = -s * t1 + c * t2;
            }
        }

        for r in 0..rows {
            // New row pos+r spans columns 0..=pos+r: the untouched prefix of
            // the old row plus the rotated block.
            let old = self.row(pos + 1 + r);
            data.extend_from_slice(&old[..pos]);
            data.extend_from_slice(&w[r * width..r * width + r + 1]);
        }
        Self { size: new_m, data }
    }

    /// Reconstructs A = L L' densely; test support.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let m = self.size;
        let mut a = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..m {
                let lim = i.min(j) + 1;
                let (ri, rj) = (self.row(i), self.row(j));
                a[i][j] = (0..lim).map(|k| ri[k] * rj[k]).sum();
            }
        }
        a
    }
}
