//! Hüsler–Reiss and Brown–Resnick models generated by intrinsic fields.
//!
//! A Hüsler–Reiss law on `k` sites is parameterized by a first-order
//! intrinsic precision `Θ` (zero row sums, rank `k − 1`). Its variogram
//! `Γ_ij = Var(W_i − W_j)` follows from any pinned inverse. Values live on
//! the Gumbel scale: a Pareto row is `E + V` with `E` standard exponential.

mod pareto;
mod simulate;

pub use pareto::{
    fem_variogram_column, fit_pareto, pareto_density, surrogate_loglik, ExceedanceData,
    RiskFunctional,
};
pub use simulate::{
    chi, chi_empirical, chi_from_pareto, conditional_simulate, simulate_max_stable,
    simulate_pareto, ChiEstimate, ParetoSampler,
};

use crate::igmrf::{check_intrinsic, density_intrinsic, IgmrfError};
use crate::inference::InferenceError;
use crate::sparse_core::{factor_ldl, Factorization, NullSpace, SparseError, SparseSymMatrix};
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExtremesError {
    #[error(transparent)]
    Model(#[from] IgmrfError),

    #[error(transparent)]
    Inference(#[from] InferenceError),

    #[error(transparent)]
    Sparse(#[from] SparseError),

    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },

    #[error("index {index} out of range for {k} sites")]
    Index { index: usize, k: usize },

    #[error("need at least two sites (got {0})")]
    TooFewSites(usize),

    #[error("index set is empty or covers every site")]
    Partition,

    #[error("point lies outside the support: risk {0} is not positive")]
    Support(f64),

    #[error("need at least {min} rows (got {got})")]
    TooFewRows { min: usize, got: usize },

    #[error("threshold quantile {0} must lie in (0.8, 1)")]
    Quantile(f64),
}

/// A Hüsler–Reiss law given by its precision.
#[derive(Debug, Clone)]
pub struct HuslerReiss {
    theta: SparseSymMatrix,
    factor: Factorization,
}

impl HuslerReiss {
    pub fn new(theta: SparseSymMatrix) -> Result<Self, ExtremesError> {
        if theta.n() < 2 {
            return Err(ExtremesError::TooFewSites(theta.n()));
        }
        check_intrinsic(&theta)?;
        let factor = factor_ldl(&theta, NullSpace::Ones)?;
        Ok(HuslerReiss { theta, factor })
    }

    pub fn from_dense(theta: &DMatrix<f64>) -> Result<Self, ExtremesError> {
        Self::new(SparseSymMatrix::from_nalgebra(theta)?)
    }

    /// `Θ = (−½ Π Γ Π)⁺` with `Π = I − 11ᵀ/k`.
    pub fn from_variogram(gamma: &DMatrix<f64>) -> Result<Self, ExtremesError> {
        let k = gamma.nrows();
        if gamma.ncols() != k {
            return Err(ExtremesError::Length { expected: k, got: gamma.ncols() });
        }
        if k < 2 {
            return Err(ExtremesError::TooFewSites(k));
        }
        let pi = DMatrix::identity(k, k) - DMatrix::from_element(k, k, 1.0 / k as f64);
        let sigma = &pi * gamma * &pi * -0.5;
        // Σ has null vector 1; adding J makes it invertible with the same
        // inverse on the contrast space.
        let j = DMatrix::from_element(k, k, 1.0 / k as f64);
        let inv = (sigma + &j)
            .try_inverse()
            .ok_or(SparseError::RankDeficient { rank: k - 1, n: k })?;
        let mut theta = inv - j;
        theta = (&theta + theta.transpose()) * 0.5;
        // Exact zero row sums.
        for i in 0..k {
            let s: f64 = theta.row(i).sum();
            theta[(i, i)] -= s;
        }
        Self::from_dense(&theta)
    }

    pub fn k(&self) -> usize {
        self.theta.n()
    }

    pub fn precision(&self) -> &SparseSymMatrix {
        &self.theta
    }

    fn check_index(&self, i: usize) -> Result<(), ExtremesError> {
        if i >= self.k() {
            return Err(ExtremesError::Index { index: i, k: self.k() });
        }
        Ok(())
    }

    fn check_len(&self, got: usize, expected: usize) -> Result<(), ExtremesError> {
        if got != expected {
            return Err(ExtremesError::Length { expected, got });
        }
        Ok(())
    }

    /// Dense variogram matrix from `Θ⁺`.
    pub fn variogram(&self) -> Result<DMatrix<f64>, ExtremesError> {
        let k = self.k();
        let mut cov = DMatrix::zeros(k, k);
        let mut e = vec![0.0; k];
        for j in 0..k {
            e[j] = 1.0;
            let col = self.factor.pseudo_solve(&centered(&e))?;
            e[j] = 0.0;
            for i in 0..k {
                cov[(i, j)] = col[i];
            }
        }
        Ok(DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                0.0
            } else {
                cov[(i, i)] + cov[(j, j)] - 2.0 * cov[(i, j)]
            }
        }))
    }

    /// `Γ_{·,m}` from the diagonal of `(Θ^{(m)})⁻¹`.
    pub fn variogram_column(&self, m: usize) -> Result<Vec<f64>, ExtremesError> {
        self.check_index(m)?;
        let pinned = self.theta.remove_index(m);
        let diag = factor_ldl(&pinned, NullSpace::None)?.inverse_diagonal_takahashi()?;
        let mut col = diag;
        col.insert(m, 0.0);
        Ok(col)
    }

    /// `diag(Θ⁺)` from the pinned inverse `Σ = (Θ^{(p)})⁻¹` (zero row and
    /// column at `p`): `Θ⁺ = ΠΣΠ`.
    pub fn pseudo_inverse_diagonal(&self) -> Result<Vec<f64>, ExtremesError> {
        let k = self.k();
        let p = k - 1;
        let pinned = self.theta.remove_index(p);
        let f = factor_ldl(&pinned, NullSpace::None)?;
        let mut diag = f.inverse_diagonal_takahashi()?;
        let mut row_sums = f.solve(&vec![1.0; k - 1])?;
        diag.push(0.0);
        row_sums.push(0.0);
        let kf = k as f64;
        let total: f64 = row_sums.iter().sum();
        Ok(diag
            .iter()
            .zip(&row_sums)
            .map(|(d, s)| d - 2.0 * s / kf + total / (kf * kf))
            .collect())
    }

    /// Resistance curvature `v = Θ diag(Θ⁺)/2 + 1/k`; its entries sum to 1.
    pub fn resistance_curvature(&self) -> Result<Vec<f64>, ExtremesError> {
        let k = self.k() as f64;
        let d = self.pseudo_inverse_diagonal()?;
        Ok(self.theta.mul_vec(&d).iter().map(|x| 0.5 * x + 1.0 / k).collect())
    }

    /// `log λ(y) = −y_m − ½ log k + log f(y + Γ_{·,m}/2; Θ)` for the pivot `m`.
    pub fn log_exponent_density_at(&self, y: &[f64], m: usize) -> Result<f64, ExtremesError> {
        self.check_len(y.len(), self.k())?;
        let col = self.variogram_column(m)?;
        let w: Vec<f64> = y.iter().zip(&col).map(|(a, g)| a + 0.5 * g).collect();
        Ok(-y[m] - 0.5 * (self.k() as f64).ln() + density_intrinsic(&self.theta, &w)?)
    }

    pub fn log_exponent_density(&self, y: &[f64]) -> Result<f64, ExtremesError> {
        self.log_exponent_density_at(y, 0)
    }

    /// Edges `(i, j)`, `i < j`, with `|Θ_ij| > tolerance · max|Θ|`.
    pub fn graph(&self, tolerance: f64) -> Vec<(usize, usize)> {
        let cut = tolerance * self.theta.max_abs();
        let mut edges: Vec<(usize, usize)> = self
            .theta
            .iter()
            .filter(|&(i, j, v)| i != j && v.abs() > cut)
            .map(|(i, j, _)| (j.min(i), j.max(i)))
            .collect();
        edges.sort_unstable();
        edges
    }

    /// Law of the sites in `keep` (in that order): the Schur complement
    /// `Θ_OO − Θ_OU Θ_UU⁻¹ Θ_UO`.
    pub fn marginal(&self, keep: &[usize]) -> Result<HuslerReiss, ExtremesError> {
        let (observed, hidden) = self.partition(keep)?;
        if hidden.is_empty() {
            return HuslerReiss::new(self.theta.submatrix(&observed));
        }
        let f = factor_ldl(&self.theta.submatrix(&hidden), NullSpace::None)?;
        let full = self.theta.to_full_csr();
        let o = observed.len();
        let mut position = vec![usize::MAX; self.k()];
        for (p, &h) in hidden.iter().enumerate() {
            position[h] = p;
        }
        let coupling: Vec<Vec<f64>> = observed
            .iter()
            .map(|&i| {
                let mut c = vec![0.0; hidden.len()];
                for (j, v) in full.row(i) {
                    if position[j] != usize::MAX {
                        c[position[j]] = v;
                    }
                }
                c
            })
            .collect();
        let solved = coupling
            .iter()
            .map(|c| f.solve(c))
            .collect::<Result<Vec<_>, _>>()?;
        let mut out = DMatrix::zeros(o, o);
        for a in 0..o {
            for b in 0..=a {
                let corr: f64 = coupling[a].iter().zip(&solved[b]).map(|(x, y)| x * y).sum();
                let v = self.theta.get(observed[a], observed[b]) - corr;
                out[(a, b)] = v;
                out[(b, a)] = v;
            }
        }
        for a in 0..o {
            let s: f64 = out.row(a).sum();
            out[(a, a)] -= s;
        }
        HuslerReiss::from_dense(&out)
    }

    /// Observed indices in the given order, and the sorted remainder.
    fn partition(&self, observed: &[usize]) -> Result<(Vec<usize>, Vec<usize>), ExtremesError> {
        let k = self.k();
        let mut seen = vec![false; k];
        for &i in observed {
            self.check_index(i)?;
            if seen[i] {
                return Err(ExtremesError::Partition);
            }
            seen[i] = true;
        }
        if observed.is_empty() {
            return Err(ExtremesError::Partition);
        }
        let hidden = (0..k).filter(|&i| !seen[i]).collect();
        Ok((observed.to_vec(), hidden))
    }

    /// Gaussian law of the unobserved sites given `y` on `observed`:
    /// mean `−Θ_UU⁻¹(Θ_UO y_O + v_U)` and precision `Θ_UU`.
    pub fn conditional_law(
        &self,
        observed: &[usize],
        values: &[f64],
    ) -> Result<ConditionalLaw, ExtremesError> {
        self.check_len(values.len(), observed.len())?;
        let (observed, hidden) = self.partition(observed)?;
        if hidden.is_empty() {
            return Err(ExtremesError::Partition);
        }
        let mut padded = vec![0.0; self.k()];
        for (&i, &y) in observed.iter().zip(values) {
            padded[i] = y;
        }
        let pushed = self.theta.mul_vec(&padded);
        let v = self.resistance_curvature()?;
        let rhs: Vec<f64> = hidden.iter().map(|&u| -(pushed[u] + v[u])).collect();
        let precision = self.theta.submatrix(&hidden);
        let factor = factor_ldl(&precision, NullSpace::None)?;
        let mean = factor.solve(&rhs)?;
        Ok(ConditionalLaw {
            unobserved: hidden,
            mean,
            precision,
            factor,
        })
    }

    /// Extremal kriging at one site from all the others (in index order):
    /// `(−Σ Θ_0i y_i − v_0)/Θ_00` and precision `Θ_00`.
    pub fn extremal_krige(&self, target: usize, values: &[f64]) -> Result<(f64, f64), ExtremesError> {
        self.check_index(target)?;
        let observed: Vec<usize> = (0..self.k()).filter(|&i| i != target).collect();
        let law = self.conditional_law(&observed, values)?;
        Ok((law.mean[0], self.theta.get(target, target)))
    }
}

/// `x − mean(x)`.
fn centered(x: &[f64]) -> Vec<f64> {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - m).collect()
}

#[derive(Debug, Clone)]
pub struct ConditionalLaw {
    pub unobserved: Vec<usize>,
    pub mean: Vec<f64>,
    pub precision: SparseSymMatrix,
    factor: Factorization,
}

impl ConditionalLaw {
    pub(crate) fn factor(&self) -> &Factorization {
        &self.factor
    }
}
