use super::ordering::minimum_degree_graph;
use super::{SparseError, SparseSymMatrix};

/// Declared null space of a positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NullSpace {
    /// Full rank expected; vanishing pivots are still detected and reported.
    None,
    /// Null space spanned by the all-ones vector.
    Ones,
    /// `blocks` equal-sized blocks; null vectors are constant on each block
    /// with coefficients summing to zero (dimension `blocks − 1`).
    BlockConstant { blocks: usize },
}

#[derive(Debug, Clone)]
pub struct LdlOptions {
    /// Pivots with `|d| ≤ pivot_tol · max diag(A)` count as zero.
    pub pivot_tol: f64,
    /// Relative tolerance for checking that declared null vectors are
    /// annihilated.
    pub hint_tol: f64,
}

impl Default for LdlOptions {
    fn default() -> Self {
        Self {
            pivot_tol: 1e-13,
            hint_tol: 1e-8,
        }
    }
}

/// LDLᵀ factorization of `P K Pᵀ`, where `K` is either `A` or the bordered
/// matrix `[A N; Nᵀ 0]`.
#[derive(Debug, Clone)]
pub struct Factorization {
    n: usize,
    border: usize,
    hint: NullSpace,
    perm: Vec<usize>,
    pinv: Vec<usize>,
    l_colptr: Vec<usize>,
    l_rowidx: Vec<usize>,
    l_values: Vec<f64>,
    d: Vec<f64>,
    zero_pivots: usize,
    log_det_ntn: f64,
}

pub fn factor_ldl(a: &SparseSymMatrix, hint: NullSpace) -> Result<Factorization, SparseError> {
    factor_ldl_with(a, hint, &LdlOptions::default())
}

pub fn factor_ldl_with(
    a: &SparseSymMatrix,
    hint: NullSpace,
    opts: &LdlOptions,
) -> Result<Factorization, SparseError> {
    let n = a.n();
    let basis = null_basis(n, &hint)?;
    let border = basis.len();
    if border > 0 {
        check_hint(a, &basis, opts.hint_tol)?;
    }

    // Pinned set S: one coordinate per null vector with N_S invertible.
    let pinned: Vec<usize> = match &hint {
        NullSpace::None => Vec::new(),
        NullSpace::Ones => vec![n - 1],
        NullSpace::BlockConstant { blocks } => {
            let size = n / blocks;
            (0..blocks - 1).map(|b| b * size + size - 1).collect()
        }
    };

    let dim = n + border;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); dim];
    for (i, j, _) in a.iter() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for (b, v) in basis.iter().enumerate() {
        for &(i, _) in v {
            adj[i].push(n + b);
            adj[n + b].push(i);
        }
    }
    for nb in adj.iter_mut() {
        nb.sort_unstable();
        nb.dedup();
    }
    let mut last: Vec<usize> = (n..dim).collect();
    last.extend_from_slice(&pinned);
    let perm = minimum_degree_graph(adj, &last);
    let mut pinv = vec![0usize; dim];
    for (k, &i) in perm.iter().enumerate() {
        pinv[i] = k;
    }

    // Upper triangle of the permuted matrix, by columns.
    let mut trips: Vec<(usize, usize, f64)> = Vec::with_capacity(a.nnz() + n * border);
    for (i, j, v) in a.iter() {
        let (pi, pj) = (pinv[i], pinv[j]);
        trips.push((pi.min(pj), pi.max(pj), v));
    }
    // The border is scaled to the size of A so that its pivots are not
    // mistaken for vanishing ones.
    let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let border_scale = if scale > 0.0 { scale.sqrt() } else { 1.0 };
    for (b, v) in basis.iter().enumerate() {
        for &(i, val) in v {
            let (pi, pj) = (pinv[i], pinv[n + b]);
            trips.push((pi.min(pj), pi.max(pj), val * border_scale));
        }
    }
    trips.sort_by(|x, y| (x.1, x.0).cmp(&(y.1, y.0)));
    let mut ap = vec![0usize; dim + 1];
    let mut ai = Vec::with_capacity(trips.len());
    let mut ax = Vec::with_capacity(trips.len());
    for &(r, c, v) in &trips {
        ap[c + 1] += 1;
        ai.push(r);
        ax.push(v);
    }
    for k in 0..dim {
        ap[k + 1] += ap[k];
    }

    // Elimination tree and column counts.
    let mut parent = vec![usize::MAX; dim];
    let mut flag = vec![usize::MAX; dim];
    let mut lnz = vec![0usize; dim];
    for k in 0..dim {
        flag[k] = k;
        for p in ap[k]..ap[k + 1] {
            let mut i = ai[p];
            if i >= k {
                continue;
            }
            while flag[i] != k {
                if parent[i] == usize::MAX {
                    parent[i] = k;
                }
                lnz[i] += 1;
                flag[i] = k;
                i = parent[i];
            }
        }
    }
    let mut lp = vec![0usize; dim + 1];
    for k in 0..dim {
        lp[k + 1] = lp[k] + lnz[k];
    }
    let mut li = vec![0usize; lp[dim]];
    let mut lx = vec![0.0; lp[dim]];
    let mut d = vec![0.0; dim];

    let tol = opts.pivot_tol * if scale > 0.0 { scale } else { 1.0 };
    let border_start = dim - border - pinned.len();
    let border_end = dim - pinned.len();

    let mut y = vec![0.0; dim];
    let mut pattern = vec![0usize; dim];
    let mut fill = vec![0usize; dim];
    let mut zero_pivots = 0;
    for k in 0..dim {
        y[k] = 0.0;
        let mut top = dim;
        flag[k] = k;
        for p in ap[k]..ap[k + 1] {
            let mut i = ai[p];
            y[i] += ax[p];
            let mut len = 0;
            while flag[i] != k {
                pattern[len] = i;
                len += 1;
                flag[i] = k;
                i = parent[i];
            }
            while len > 0 {
                top -= 1;
                len -= 1;
                pattern[top] = pattern[len];
            }
        }
        let mut dk = y[k];
        y[k] = 0.0;
        while top < dim {
            let i = pattern[top];
            top += 1;
            let yi = y[i];
            y[i] = 0.0;
            let end = lp[i] + fill[i];
            for p in lp[i]..end {
                y[li[p]] -= lx[p] * yi;
            }
            let lki = if d[i] != 0.0 { yi / d[i] } else { 0.0 };
            dk -= lki * yi;
            li[end] = k;
            lx[end] = lki;
            fill[i] += 1;
        }
        let negative_expected = k >= border_start && k < border_end;
        if border == 0 {
            if dk.abs() <= tol {
                dk = 0.0;
                zero_pivots += 1;
            } else if dk < 0.0 {
                return Err(SparseError::Indefinite { step: k, value: dk });
            }
        } else if dk.abs() <= tol {
            return Err(SparseError::SingularBeyondHint { found: 1 });
        } else if (dk < 0.0) != negative_expected {
            return Err(SparseError::Indefinite { step: k, value: dk });
        }
        d[k] = dk;
    }

    let log_det_ntn = 2.0 * border as f64 * border_scale.ln()
        + match &hint {
            NullSpace::None => 0.0,
            NullSpace::Ones => (n as f64).ln(),
            NullSpace::BlockConstant { blocks } => {
                let size = (n / blocks) as f64;
                (*blocks as f64 - 1.0) * size.ln() + (*blocks as f64).ln()
            }
        };

    Ok(Factorization {
        n,
        border,
        hint,
        perm,
        pinv,
        l_colptr: lp,
        l_rowidx: li,
        l_values: lx,
        d,
        zero_pivots,
        log_det_ntn,
    })
}

fn null_basis(n: usize, hint: &NullSpace) -> Result<Vec<Vec<(usize, f64)>>, SparseError> {
    Ok(match hint {
        NullSpace::None => Vec::new(),
        NullSpace::Ones => {
            if n < 2 {
                return Err(SparseError::DimensionMismatch {
                    expected: 2,
                    got: n,
                });
            }
            vec![(0..n).map(|i| (i, 1.0)).collect()]
        }
        NullSpace::BlockConstant { blocks } => {
            let blocks = *blocks;
            if blocks == 0 || n % blocks != 0 || n / blocks < 2 {
                return Err(SparseError::DimensionMismatch {
                    expected: blocks.max(1) * 2,
                    got: n,
                });
            }
            let size = n / blocks;
            (0..blocks - 1)
                .map(|b| {
                    (b * size..(b + 1) * size)
                        .map(|i| (i, 1.0))
                        .chain(((blocks - 1) * size..n).map(|i| (i, -1.0)))
                        .collect()
                })
                .collect()
        }
    })
}

fn check_hint(
    a: &SparseSymMatrix,
    basis: &[Vec<(usize, f64)>],
    tol: f64,
) -> Result<(), SparseError> {
    let n = a.n();
    let mut row_abs = vec![0.0; n];
    for (i, j, v) in a.iter() {
        row_abs[i] += v.abs();
        if i != j {
            row_abs[j] += v.abs();
        }
    }
    let scale = row_abs
        .iter()
        .fold(0.0f64, |m, v| m.max(*v))
        .max(f64::MIN_POSITIVE);
    for v in basis {
        let mut x = vec![0.0; n];
        for &(i, val) in v {
            x[i] = val;
        }
        let r = a.mul_vec(&x).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if r > tol * scale {
            return Err(SparseError::HintViolated {
                residual: r / scale,
            });
        }
    }
    Ok(())
}

impl Factorization {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn hint(&self) -> &NullSpace {
        &self.hint
    }

    /// Numerical rank of `A`.
    pub fn rank(&self) -> usize {
        self.n - self.border - self.zero_pivots
    }

    pub fn null_dim(&self) -> usize {
        self.n - self.rank()
    }

    /// Elimination order over the (possibly bordered) system.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Pivots in elimination order.
    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    /// log |A|*, the log of the product of nonzero eigenvalues. Exact for
    /// full-rank input and for hinted factorizations. Without a hint on a
    /// singular matrix this is the sum of logs of the nonzero pivots, which is
    /// the log-determinant of a pinned principal submatrix.
    pub fn gen_logdet(&self) -> f64 {
        let s: f64 = self
            .d
            .iter()
            .filter(|v| **v != 0.0)
            .map(|v| v.abs().ln())
            .sum();
        s - self.log_det_ntn
    }

    /// Solves `A x = b` for full-rank `A`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SparseError> {
        self.check_len(b)?;
        if self.rank() < self.n {
            return Err(SparseError::RankDeficient {
                rank: self.rank(),
                n: self.n,
            });
        }
        Ok(self.solve_system(b))
    }

    /// Minimum-norm solution `A⁺ b`; `b` need not lie in the range.
    pub fn pseudo_solve(&self, b: &[f64]) -> Result<Vec<f64>, SparseError> {
        self.check_len(b)?;
        if self.zero_pivots > 0 {
            return Err(SparseError::UnknownNullSpace);
        }
        Ok(self.solve_system(b))
    }

    /// Diagonal of `A⁻¹` by one solve per unit vector.
    pub fn inverse_diagonal(&self) -> Result<Vec<f64>, SparseError> {
        if self.rank() < self.n {
            return Err(SparseError::RankDeficient {
                rank: self.rank(),
                n: self.n,
            });
        }
        let mut e = vec![0.0; self.n];
        let mut out = Vec::with_capacity(self.n);
        for i in 0..self.n {
            e[i] = 1.0;
            out.push(self.solve_system(&e)[i]);
            e[i] = 0.0;
        }
        Ok(out)
    }

    /// Diagonal of `A⁺` by one pseudo-solve per unit vector.
    pub fn pseudo_inverse_diagonal(&self) -> Result<Vec<f64>, SparseError> {
        if self.zero_pivots > 0 {
            return Err(SparseError::UnknownNullSpace);
        }
        let mut e = vec![0.0; self.n];
        let mut out = Vec::with_capacity(self.n);
        for i in 0..self.n {
            e[i] = 1.0;
            out.push(self.solve_system(&e)[i]);
            e[i] = 0.0;
        }
        Ok(out)
    }

    /// Diagonal of `A⁻¹` by the Takahashi recurrences on the factor pattern.
    pub fn inverse_diagonal_takahashi(&self) -> Result<Vec<f64>, SparseError> {
        if self.rank() < self.n || self.border > 0 {
            return Err(SparseError::RankDeficient {
                rank: self.rank(),
                n: self.n,
            });
        }
        let dim = self.d.len();
        let (lp, li, lx) = (&self.l_colptr, &self.l_rowidx, &self.l_values);
        let mut z = vec![0.0; li.len()];
        let mut zdiag = vec![0.0; dim];
        let lookup = |z: &[f64], zdiag: &[f64], i: usize, k: usize| -> f64 {
            if i == k {
                return zdiag[i];
            }
            let (r, c) = if i > k { (i, k) } else { (k, i) };
            let rows = &li[lp[c]..lp[c + 1]];
            match rows.binary_search(&r) {
                Ok(p) => z[lp[c] + p],
                Err(_) => 0.0,
            }
        };
        for j in (0..dim).rev() {
            let range = lp[j]..lp[j + 1];
            for p in range.clone() {
                let i = li[p];
                let mut s = 0.0;
                for q in range.clone() {
                    s -= lx[q] * lookup(&z, &zdiag, i, li[q]);
                }
                z[p] = s;
            }
            let mut s = 1.0 / self.d[j];
            for p in range {
                s -= lx[p] * z[p];
            }
            zdiag[j] = s;
        }
        Ok((0..self.n).map(|i| zdiag[self.pinv[i]]).collect())
    }

    /// Maps standard normals `z` to a draw with covariance `A⁻¹`.
    pub fn sample_from_normals(&self, z: &[f64]) -> Result<Vec<f64>, SparseError> {
        self.check_len(z)?;
        if self.rank() < self.n || self.border > 0 {
            return Err(SparseError::RankDeficient {
                rank: self.rank(),
                n: self.n,
            });
        }
        let mut x: Vec<f64> = z
            .iter()
            .zip(&self.d)
            .map(|(zi, di)| zi / di.sqrt())
            .collect();
        self.lt_solve(&mut x);
        let mut out = vec![0.0; self.n];
        for k in 0..self.n {
            out[self.perm[k]] = x[k];
        }
        Ok(out)
    }

    fn check_len(&self, b: &[f64]) -> Result<(), SparseError> {
        if b.len() != self.n {
            return Err(SparseError::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        Ok(())
    }

    fn solve_system(&self, b: &[f64]) -> Vec<f64> {
        let dim = self.d.len();
        let mut x = vec![0.0; dim];
        for i in 0..self.n {
            x[self.pinv[i]] = b[i];
        }
        // L y = Pb
        for j in 0..dim {
            let xj = x[j];
            if xj != 0.0 {
                for p in self.l_colptr[j]..self.l_colptr[j + 1] {
                    x[self.l_rowidx[p]] -= self.l_values[p] * xj;
                }
            }
        }
        for j in 0..dim {
            x[j] = if self.d[j] != 0.0 {
                x[j] / self.d[j]
            } else {
                0.0
            };
        }
        self.lt_solve(&mut x);
        (0..self.n).map(|i| x[self.pinv[i]]).collect()
    }

    fn lt_solve(&self, x: &mut [f64]) {
        for j in (0..x.len()).rev() {
            let mut s = x[j];
            for p in self.l_colptr[j]..self.l_colptr[j + 1] {
                s -= self.l_values[p] * x[self.l_rowidx[p]];
            }
            x[j] = s;
        }
    }
}
