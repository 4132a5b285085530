use super::SparseError;
use nalgebra::DMatrix;

/// Symmetric matrix stored as its lower triangle in compressed columns.
///
/// Row indices are sorted within each column and the diagonal, when present,
/// is the first entry of its column.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

/// General sparse matrix in compressed rows. Used for projections and for the
/// full (both-triangle) view of symmetric matrices during products.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds from triplets. Each off-diagonal pair must be given once, in
    /// either triangle; duplicates are summed and exact zeros dropped.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self, SparseError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(SparseError::OutOfBounds { row: i, col: j, n });
            }
            if !v.is_finite() {
                return Err(SparseError::NonFinite { row: i, col: j });
            }
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            entries.push((c, r, v));
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut cols = Vec::with_capacity(entries.len());
        let mut k = 0;
        while k < entries.len() {
            let (c, r, mut v) = entries[k];
            k += 1;
            while k < entries.len() && entries[k].0 == c && entries[k].1 == r {
                v += entries[k].2;
                k += 1;
            }
            if v != 0.0 {
                cols.push(c);
                row_idx.push(r);
                values.push(v);
            }
        }
        for &c in &cols {
            col_ptr[c + 1] += 1;
        }
        for j in 0..n {
            col_ptr[j + 1] += col_ptr[j];
        }
        Ok(Self {
            n,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self::from_triplets(diag.len(), diag.iter().enumerate().map(|(i, &v)| (i, i, v)))
            .expect("diagonal entries are in bounds")
    }

    /// Lower triangle of a dense symmetric matrix given row-major.
    pub fn from_dense(n: usize, dense: &[f64]) -> Result<Self, SparseError> {
        if dense.len() != n * n {
            return Err(SparseError::DimensionMismatch {
                expected: n * n,
                got: dense.len(),
            });
        }
        let trips = (0..n)
            .flat_map(|i| (0..=i).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, dense[i * n + j]));
        Self::from_triplets(n, trips)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Result<Self, SparseError> {
        let n = m.nrows();
        let trips: Vec<_> = (0..n)
            .flat_map(|i| (0..=i).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, m[(i, j)]))
            .collect();
        Self::from_triplets(n, trips)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored entries (lower triangle only).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates `(row, col, value)` over the lower triangle.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |j| {
            (self.col_ptr[j]..self.col_ptr[j + 1])
                .map(move |p| (self.row_idx[p], j, self.values[p]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let rows = &self.row_idx[self.col_ptr[c]..self.col_ptr[c + 1]];
        match rows.binary_search(&r) {
            Ok(p) => self.values[self.col_ptr[c] + p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.get(j, j)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "vector length must match matrix dimension");
        let mut y = vec![0.0; self.n];
        for (i, j, v) in self.iter() {
            y[i] += v * x[j];
            if i != j {
                y[j] += v * x[i];
            }
        }
        y
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, j, v) in self.iter() {
            let t = v * x[i] * x[j];
            s += if i == j { t } else { 2.0 * t };
        }
        s
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.mul_vec(&vec![1.0; self.n])
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// `a·self + b·other`.
    pub fn lincomb(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch in lincomb");
        let trips = self
            .iter()
            .map(|(i, j, v)| (i, j, a * v))
            .chain(other.iter().map(|(i, j, v)| (i, j, b * v)));
        Self::from_triplets(self.n, trips).expect("entries stay in bounds")
    }

    /// Principal submatrix on `keep` (in the given order).
    pub fn submatrix(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let trips = self
            .iter()
            .filter(|&(i, j, _)| map[i] != usize::MAX && map[j] != usize::MAX)
            .map(|(i, j, v)| (map[i], map[j], v));
        Self::from_triplets(keep.len(), trips).expect("entries stay in bounds")
    }

    /// Drops row and column `k`.
    pub fn remove_index(&self, k: usize) -> Self {
        let keep: Vec<usize> = (0..self.n).filter(|&i| i != k).collect();
        self.submatrix(&keep)
    }

    /// Block-diagonal assembly.
    pub fn block_diag(blocks: &[&Self]) -> Self {
        let n: usize = blocks.iter().map(|b| b.n).sum();
        let mut trips = Vec::with_capacity(blocks.iter().map(|b| b.nnz()).sum());
        let mut off = 0;
        for b in blocks {
            trips.extend(b.iter().map(|(i, j, v)| (i + off, j + off, v)));
            off += b.n;
        }
        Self::from_triplets(n, trips).expect("entries stay in bounds")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.iter() {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// Both triangles in compressed rows.
    pub fn to_full_csr(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.n + 1];
        for (i, j, _) in self.iter() {
            counts[i + 1] += 1;
            if i != j {
                counts[j + 1] += 1;
            }
        }
        for i in 0..self.n {
            counts[i + 1] += counts[i];
        }
        let nnz = counts[self.n];
        let mut next = counts.clone();
        let mut col_idx = vec![0; nnz];
        let mut values = vec![0.0; nnz];
        // Columns ascend inside each row because the lower-CSC walk visits
        // (row, col) with col ascending for the lower part and the mirrored
        // upper part in a second pass.
        for (i, j, v) in self.iter() {
            col_idx[next[i]] = j;
            values[next[i]] = v;
            next[i] += 1;
        }
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                if i != j {
                    col_idx[next[j]] = i;
                    values[next[j]] = self.values[p];
                    next[j] += 1;
                }
            }
        }
        CsrMatrix {
            nrows: self.n,
            ncols: self.n,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    /// Lower triangle of `self · diag(d) · other`. The caller guarantees that
    /// the product is symmetric, which holds for the operator products built
    /// from a shared diagonal mass matrix.
    pub fn product_through_diag(&self, d: &[f64], other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        assert_eq!(d.len(), self.n);
        let a = self.to_full_csr();
        let b = other.to_full_csr();
        let n = self.n;
        let mut acc = vec![0.0; n];
        let mut mark = vec![usize::MAX; n];
        let mut touched = Vec::new();
        let mut trips = Vec::new();
        for i in 0..n {
            touched.clear();
            for p in a.row_ptr[i]..a.row_ptr[i + 1] {
                let k = a.col_idx[p];
                let aik = a.values[p] * d[k];
                for q in b.row_ptr[k]..b.row_ptr[k + 1] {
                    let j = b.col_idx[q];
                    if j > i {
                        continue;
                    }
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += aik * b.values[q];
                }
            }
            for &j in &touched {
                trips.push((i, j, acc[j]));
            }
        }
        Self::from_triplets(n, trips).expect("entries stay in bounds")
    }

    /// `Bᵀ · self · B` for a general sparse `B` (n × p). Used to form
    /// `ĀᵀQ_εĀ` and similar.
    pub fn congruence(&self, b: &CsrMatrix) -> Self {
        assert_eq!(b.nrows, self.n);
        // (SB)_{ik} then Bᵀ(SB).
        let s = self.to_full_csr();
        let sb = s.matmul(b);
        let bt = b.transpose();
        let full = bt.matmul(&sb);
        let trips = full.iter().filter(|&(i, j, _)| i >= j);
        Self::from_triplets(full.nrows, trips.collect::<Vec<_>>()).expect("entries stay in bounds")
    }
}

impl CsrMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, mut trips: Vec<(usize, usize, f64)>) -> Self {
        trips.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(trips.len());
        let mut values: Vec<f64> = Vec::with_capacity(trips.len());
        let mut rows = Vec::with_capacity(trips.len());
        for (i, j, v) in trips {
            assert!(i < nrows && j < ncols, "triplet out of bounds");
            if let (Some(&li), Some(&lj)) = (rows.last(), col_idx.last()) {
                if li == i && lj == j {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(i);
            col_idx.push(j);
            values.push(v);
        }
        for &i in &rows {
            row_ptr[i + 1] += 1;
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(move |p| (i, self.col_idx[p], self.values[p]))
        })
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (self.col_idx[p], self.values[p]))
    }

    /// Dense copy of row `i`.
    pub fn row_dense(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (j, v) in self.row(i) {
            out[j] += v;
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, j, v) in self.iter() {
            y[j] += v * x[i];
        }
        y
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.iter().map(|(i, j, v)| (j, i, v)).collect(),
        )
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut touched = Vec::new();
        let mut trips = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            for &j in &touched {
                trips.push((i, j, acc[j]));
            }
        }
        Self::from_triplets(self.nrows, other.ncols, trips)
    }

    /// Horizontal concatenation `[self, self, …]` (`copies` times).
    pub fn repeat_columns(&self, copies: usize) -> Self {
        let mut trips = Vec::with_capacity(self.values.len() * copies);
        for b in 0..copies {
            trips.extend(self.iter().map(|(i, j, v)| (i, j + b * self.ncols, v)));
        }
        Self::from_triplets(self.nrows, self.ncols * copies, trips)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            m[(i, j)] += v;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path() -> SparseSymMatrix {
        SparseSymMatrix::from_dense(3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]).unwrap()
    }

    #[test]
    fn triplets_mirror_and_sum() {
        let a =
            SparseSymMatrix::from_triplets(2, [(0, 1, 1.0), (1, 0, 0.5), (0, 0, 2.0), (1, 1, 0.0)])
                .unwrap();
        assert_eq!(a.get(0, 1), 1.5);
        assert_eq!(a.get(1, 0), 1.5);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn rejects_out_of_bounds_and_nan() {
        assert!(SparseSymMatrix::from_triplets(2, [(2, 0, 1.0)]).is_err());
        assert!(SparseSymMatrix::from_triplets(2, [(0, 0, f64::NAN)]).is_err());
    }

    #[test]
    fn mul_vec_matches_dense() {
        let a = path();
        assert_eq!(a.mul_vec(&[1.0, 2.0, 3.0]), vec![-1.0, 0.0, 1.0]);
        assert_eq!(a.row_sums(), vec![0.0, 0.0, 0.0]);
        assert!((a.quad_form(&[1.0, 2.0, 4.0]) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn product_through_diag_matches_dense() {
        let g = SparseSymMatrix::from_dense(3, &[2.0, -2.0, 0.0, -2.0, 4.0, -2.0, 0.0, -2.0, 2.0])
            .unwrap();
        let cinv = [4.0, 2.0, 4.0];
        let p = g.product_through_diag(&cinv, &g);
        let gd = g.to_dense();
        let want = &gd * DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&cinv)) * &gd;
        assert!((p.to_dense() - want).abs().max() < 1e-13);
    }

    #[test]
    fn congruence_matches_dense() {
        let q = SparseSymMatrix::from_diagonal(&[2.0, 3.0]);
        let b = CsrMatrix::from_triplets(2, 3, vec![(0, 0, 0.5), (0, 1, 0.5), (1, 2, 1.0)]);
        let got = q.congruence(&b).to_dense();
        let bd = b.to_dense();
        let want = bd.transpose() * q.to_dense() * bd;
        assert!((got - want).abs().max() < 1e-15);
    }

    #[test]
    fn remove_index_pins() {
        let p = path().remove_index(1);
        assert_eq!(p.to_dense(), DMatrix::identity(2, 2));
    }
}
