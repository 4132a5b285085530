//! The multi-block intrinsic GMRF approximation of the fractional field.

use crate::fem::{self, FemError, FemOperators};
use crate::mesh::{Mesh, MeshError};
use crate::rational::{self, RationalError};
use crate::sparse_core::{
    factor_ldl, CsrMatrix, Factorization, NullSpace, SparseError, SparseSymMatrix,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("dimension must be 1 or 2 (got {0})")]
    Dimension(usize),

    #[error("τ must be positive (got {0})")]
    Tau(f64),

    #[error("κ must be non-negative, and positive when α > 0 (got κ={kappa}, α={alpha})")]
    Kappa { kappa: f64, alpha: f64 },

    #[error("α must be non-negative (got {0})")]
    Alpha(f64),

    #[error("β must lie in [0, 2] (got {0})")]
    Beta(f64),

    #[error("nugget variance must be non-negative (got {0})")]
    Nugget(f64),

    #[error("α + β = {sum} must exceed d/2 = {half}")]
    Regime { sum: f64, half: f64 },
}

/// Parameters of the intrinsic Whittle–Matérn model with nugget.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelParams {
    pub tau: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub nugget: f64,
    pub dim: usize,
}

impl ModelParams {
    pub fn new(
        tau: f64,
        kappa: f64,
        alpha: f64,
        beta: f64,
        nugget: f64,
        dim: usize,
    ) -> Result<Self, ParamError> {
        let p = ModelParams {
            tau,
            kappa,
            alpha,
            beta,
            nugget,
            dim,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(1..=2).contains(&self.dim) {
            return Err(ParamError::Dimension(self.dim));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(ParamError::Tau(self.tau));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(ParamError::Alpha(self.alpha));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) || (self.alpha > 0.0 && self.kappa == 0.0)
        {
            return Err(ParamError::Kappa {
                kappa: self.kappa,
                alpha: self.alpha,
            });
        }
        // β = 2 is kept for the integer model G C⁻¹ G on bounded domains.
        if !(0.0..=2.0).contains(&self.beta) {
            return Err(ParamError::Beta(self.beta));
        }
        if !(self.nugget >= 0.0 && self.nugget.is_finite()) {
            return Err(ParamError::Nugget(self.nugget));
        }
        let half = self.dim as f64 / 2.0;
        if self.alpha + self.beta <= half {
            return Err(ParamError::Regime {
                sum: self.alpha + self.beta,
                half,
            });
        }
        Ok(())
    }

    /// Whether the field is intrinsic (has a non-trivial null space).
    pub fn is_intrinsic(&self) -> bool {
        self.beta > 0.0
    }
}

/// Power iterations used for the spectral normalization constants.
const POWER_ITERATIONS: usize = 30;
/// Inflation applied to the power-method estimate.
const POWER_INFLATION: f64 = 1.01;
/// Slack `ε` used when the rational orders are chosen from the mesh width.
pub const AUTO_ORDER_SLACK: f64 = 0.1;

#[derive(Debug, Error)]
pub enum IgmrfError {
    #[error(transparent)]
    Params(#[from] ParamError),

    #[error(transparent)]
    Fem(#[from] FemError),

    #[error(transparent)]
    Mesh(#[from] MeshError),

    #[error(transparent)]
    Sparse(#[from] SparseError),

    #[error(transparent)]
    Rational(#[from] RationalError),

    #[error("mesh dimension {mesh} does not match model dimension {model}")]
    MeshDimension { mesh: usize, model: usize },

    #[error("precision is not first-order intrinsic: relative row-sum residual {residual:.3e}")]
    NotIntrinsic { residual: f64 },

    #[error("pinning vector must have a nonzero sum")]
    InvalidPin,

    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
}

/// Rational orders `(m, m̃)` for the fractional parts of `α` and `β`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orders {
    /// Chosen from the mesh width.
    #[default]
    Auto,
    Fixed(usize, usize),
}

/// One term of the expansion: covariance `Q⁻¹` with `Q` the stored precision.
#[derive(Debug, Clone)]
pub struct Block {
    /// Product of the rational coefficients and normalization factors; the
    /// precision has already been divided by it.
    pub weight: f64,
    pub precision: SparseSymMatrix,
}

/// Sum of independent GMRF blocks approximating the fractional field.
#[derive(Debug, Clone)]
pub struct IntrinsicGmrf {
    params: ModelParams,
    mesh: Mesh,
    ops: FemOperators,
    orders: (usize, usize),
    blocks: Vec<Block>,
    project_mean: bool,
    intrinsic_blocks: bool,
    scales: (f64, f64),
}

impl IntrinsicGmrf {
    pub fn build(mesh: &Mesh, params: ModelParams, orders: Orders) -> Result<Self, IgmrfError> {
        params.validate()?;
        if mesh.dim() != params.dim {
            return Err(IgmrfError::MeshDimension {
                mesh: mesh.dim(),
                model: params.dim,
            });
        }
        let ops = fem::assemble(mesh)?;
        let (alpha_int, alpha_frac) = split(params.alpha);
        let (beta_int, beta_frac) = split(params.beta);
        let (mut m, mut mt) = match orders {
            Orders::Auto => {
                let width = mesh.quality()?.width / mesh.domain_diameter();
                rational::select_orders(
                    params.alpha,
                    params.beta,
                    params.dim,
                    width.min(0.5),
                    AUTO_ORDER_SLACK,
                )
            }
            Orders::Fixed(m, mt) => (
                if alpha_frac > 0.0 { m.max(1) } else { 0 },
                if beta_frac > 0.0 { mt.max(1) } else { 0 },
            ),
        };
        let k2 = params.kappa * params.kappa;

        // Each entry: (coefficient, optional shift q with factor (L − q) or (L̃ − q)).
        let mut scale_l = 1.0;
        let mut l_terms = vec![(1.0, None)];
        if alpha_frac > 0.0 {
            let r = rational::best_rational(alpha_frac, m)?;
            m = r.order;
            let kfac = factor_ldl(&ops.shifted(k2), NullSpace::None)?;
            scale_l = POWER_INFLATION
                * power_method(
                    &ops,
                    |v| kfac.solve(&mul_diag(ops.mass(), v)).expect("full rank"),
                    false,
                );
            l_terms = rational_terms(&r, scale_l);
        }
        let mut scale_lt = 1.0;
        let mut lt_terms = vec![(1.0, None)];
        if beta_frac > 0.0 {
            let r = rational::best_rational(beta_frac, mt)?;
            mt = r.order;
            let gfac = factor_ldl(ops.stiffness(), NullSpace::Ones)?;
            scale_lt = POWER_INFLATION
                * power_method(
                    &ops,
                    |v| gfac.pseudo_solve(&mul_diag(ops.mass(), v)).expect("hinted"),
                    true,
                );
            lt_terms = rational_terms(&r, scale_lt);
        }
        let prefactor = scale_l.powf(alpha_frac) * scale_lt.powf(beta_frac);
        let tau2 = params.tau * params.tau;

        let mut base = vec![ops.stiffness().clone(); beta_int];
        if alpha_int > 0 {
            base.extend(std::iter::repeat_n(ops.shifted(k2), alpha_int));
        }
        let mut blocks = Vec::with_capacity(l_terms.len() * lt_terms.len());
        for &(ct, qt) in &lt_terms {
            for &(c, q) in &l_terms {
                let mut factors = base.clone();
                if let Some(qt) = qt {
                    factors.push(ops.shifted(-qt));
                }
                if let Some(q) = q {
                    factors.push(ops.shifted(k2 - q));
                }
                let weight = prefactor * ct * c;
                let precision = ops.chain(&factors).scaled(tau2 / weight);
                blocks.push(Block { weight, precision });
            }
        }
        Ok(IntrinsicGmrf {
            params,
            mesh: mesh.clone(),
            ops,
            orders: (m, mt),
            blocks,
            project_mean: beta_int == 0 && beta_frac > 0.0,
            intrinsic_blocks: beta_int >= 1,
            scales: (scale_l, scale_lt),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn operators(&self) -> &FemOperators {
        &self.ops
    }

    /// Rational orders `(m, m̃)` actually used.
    pub fn orders(&self) -> (usize, usize) {
        self.orders
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Nodes per block.
    pub fn n(&self) -> usize {
        self.ops.n()
    }

    /// Whether samples are projected to `Σ C_ii W_i = 0`.
    pub fn projects_mean(&self) -> bool {
        self.project_mean
    }

    /// Whether every block has the constants as null space.
    pub fn has_intrinsic_blocks(&self) -> bool {
        self.intrinsic_blocks
    }

    /// The shared field is intrinsic in the sense that only contrasts are
    /// identified: true for any `β > 0`.
    pub fn is_intrinsic(&self) -> bool {
        self.params.is_intrinsic()
    }

    /// Normalization constants for `L` and `L̃` (bounds on the largest
    /// eigenvalue of their inverses); 1 when unused.
    pub fn spectral_scales(&self) -> (f64, f64) {
        self.scales
    }

    pub fn block_hint(&self) -> NullSpace {
        if self.intrinsic_blocks {
            NullSpace::Ones
        } else {
            NullSpace::None
        }
    }

    /// Block-diagonal precision of the stacked blocks.
    pub fn stacked_precision(&self) -> SparseSymMatrix {
        let refs: Vec<&SparseSymMatrix> = self.blocks.iter().map(|b| &b.precision).collect();
        SparseSymMatrix::block_diag(&refs)
    }

    pub fn factor_blocks(&self) -> Result<Vec<Factorization>, IgmrfError> {
        self.blocks
            .iter()
            .map(|b| factor_ldl(&b.precision, self.block_hint()).map_err(Into::into))
            .collect()
    }

    pub fn projection(&self, sites: &[Vec<f64>]) -> Result<CsrMatrix, IgmrfError> {
        Ok(fem::projection(&self.mesh, sites)?)
    }

    pub fn sampler(&self) -> Result<Sampler, IgmrfError> {
        let n = self.n();
        let factors = self
            .blocks
            .iter()
            .map(|b| {
                let q = if self.intrinsic_blocks {
                    b.precision.remove_index(n - 1)
                } else {
                    b.precision.clone()
                };
                factor_ldl(&q, NullSpace::None)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Sampler {
            n,
            project: self.project_mean,
            mass: self.ops.mass().to_vec(),
            factors,
        })
    }

    pub fn sample(&self, seed: u64) -> Result<Vec<f64>, IgmrfError> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        self.sampler()?.draw(&mut rng)
    }

    /// Variogram matrix of `A W + ε` at the rows of `A`, including the nugget
    /// off the diagonal.
    pub fn fem_variogram(&self, a: &CsrMatrix) -> Result<DMatrix<f64>, IgmrfError> {
        let k = a.nrows;
        let cols: Vec<Vec<f64>> = (0..k).map(|i| a.row_dense(i)).collect();
        let mut cov = DMatrix::<f64>::zeros(k, k);
        for f in self.factor_blocks()? {
            let solved = cols
                .iter()
                .map(|c| f.pseudo_solve(c))
                .collect::<Result<Vec<_>, _>>()?;
            for i in 0..k {
                for j in 0..=i {
                    let v: f64 = a.row(j).map(|(c, x)| x * solved[i][c]).sum();
                    cov[(i, j)] += v;
                }
            }
        }
        let mut gamma = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..i {
                let g = cov[(i, i)] + cov[(j, j)] - 2.0 * cov[(i, j)] + self.params.nugget;
                gamma[(i, j)] = g;
                gamma[(j, i)] = g;
            }
        }
        Ok(gamma)
    }
}

/// Pre-factored block draws.
#[derive(Debug, Clone)]
pub struct Sampler {
    n: usize,
    project: bool,
    mass: Vec<f64>,
    factors: Vec<Factorization>,
}

impl Sampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>, IgmrfError> {
        let mut out = vec![0.0; self.n];
        for f in &self.factors {
            let z: Vec<f64> = (0..f.n()).map(|_| rng.sample(StandardNormal)).collect();
            let x = f.sample_from_normals(&z)?;
            for (o, v) in out.iter_mut().zip(&x) {
                *o += v;
            }
        }
        if self.project {
            let total: f64 = self.mass.iter().sum();
            let mean = self.mass.iter().zip(&out).map(|(c, w)| c * w).sum::<f64>() / total;
            out.iter_mut().for_each(|w| *w -= mean);
        }
        Ok(out)
    }
}

fn split(x: f64) -> (usize, f64) {
    let i = x.floor();
    let f = x - i;
    if f < 1e-12 {
        (i as usize, 0.0)
    } else if 1.0 - f < 1e-12 {
        (i as usize + 1, 0.0)
    } else {
        (i as usize, f)
    }
}

fn mul_diag(d: &[f64], v: &[f64]) -> Vec<f64> {
    d.iter().zip(v).map(|(a, b)| a * b).collect()
}

/// Partial-fraction terms of `T^{−s} ≈ y_s^s (k + Σ (c_i/y_s)(T − p_i/y_s)⁻¹)`
/// without the `y_s^s` prefactor.
fn rational_terms(r: &rational::RationalApprox, scale: f64) -> Vec<(f64, Option<f64>)> {
    let mut terms = vec![(r.constant, None)];
    terms.extend(
        r.residues
            .iter()
            .zip(&r.poles)
            .map(|(c, p)| (c / scale, Some(p / scale))),
    );
    terms
}

/// Largest eigenvalue of a C-self-adjoint operator by power iteration in the
/// C-inner product. With `centered`, iterates stay C-orthogonal to constants.
fn power_method<F: Fn(&[f64]) -> Vec<f64>>(ops: &FemOperators, apply: F, centered: bool) -> f64 {
    let c = ops.mass();
    let n = c.len();
    let total: f64 = c.iter().sum();
    let center = |v: &mut Vec<f64>| {
        if centered {
            let m = c.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>() / total;
            v.iter_mut().for_each(|x| *x -= m);
        }
    };
    let cnorm = |v: &[f64]| c.iter().zip(v).map(|(a, b)| a * b * b).sum::<f64>().sqrt();
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.5).collect();
    center(&mut v);
    let s = cnorm(&v);
    v.iter_mut().for_each(|x| *x /= s);
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let mut w = apply(&v);
        center(&mut w);
        lambda = c
            .iter()
            .zip(&v)
            .zip(&w)
            .map(|((a, x), y)| a * x * y)
            .sum::<f64>();
        let s = cnorm(&w);
        v = w.into_iter().map(|x| x / s).collect();
    }
    lambda
}

/// Log-density of a first-order intrinsic Gaussian with precision `Θ`.
pub fn density_intrinsic(theta: &SparseSymMatrix, w: &[f64]) -> Result<f64, IgmrfError> {
    let k = theta.n();
    if w.len() != k {
        return Err(IgmrfError::Length {
            expected: k,
            got: w.len(),
        });
    }
    check_intrinsic(theta)?;
    let f = factor_ldl(theta, NullSpace::Ones)?;
    Ok(
        -0.5 * (k as f64 - 1.0) * (2.0 * std::f64::consts::PI).ln() + 0.5 * f.gen_logdet()
            - 0.5 * theta.quad_form(w),
    )
}

pub(crate) fn check_intrinsic(theta: &SparseSymMatrix) -> Result<(), IgmrfError> {
    let scale = theta.max_abs().max(f64::MIN_POSITIVE);
    let residual = theta.row_sums().iter().fold(0.0f64, |m, r| m.max(r.abs())) / scale;
    if residual > 1e-8 {
        return Err(IgmrfError::NotIntrinsic { residual });
    }
    Ok(())
}

/// A representative of an intrinsic field fixed by `hᵀW = 0`.
#[derive(Debug, Clone)]
pub enum Pinned {
    /// `h = δ_k`: precision of the remaining coordinates.
    Precision {
        dropped: usize,
        precision: SparseSymMatrix,
    },
    /// General `h`: dense covariance of `W − 1 hᵀW/(hᵀ1)`.
    Covariance(DMatrix<f64>),
}

pub fn pin(theta: &SparseSymMatrix, h: &[f64]) -> Result<Pinned, IgmrfError> {
    let k = theta.n();
    if h.len() != k {
        return Err(IgmrfError::Length {
            expected: k,
            got: h.len(),
        });
    }
    check_intrinsic(theta)?;
    let sum: f64 = h.iter().sum();
    if sum.abs() <= 1e-14 * h.iter().map(|x| x.abs()).sum::<f64>() || sum == 0.0 {
        return Err(IgmrfError::InvalidPin);
    }
    let nonzero: Vec<usize> = (0..k).filter(|&i| h[i] != 0.0).collect();
    if let [only] = nonzero[..] {
        return Ok(Pinned::Precision {
            dropped: only,
            precision: theta.remove_index(only),
        });
    }
    // Θ⁺ from the spectral decomposition, then the oblique projection.
    let eig = theta.to_dense().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut plus = DMatrix::zeros(k, k);
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 1e-12 * top {
            let e = eig.eigenvectors.column(j);
            plus += e * e.transpose() / l;
        }
    }
    let hv = nalgebra::DVector::from_column_slice(h) / sum;
    let p = DMatrix::identity(k, k) - DMatrix::from_element(k, 1, 1.0) * hv.transpose();
    Ok(Pinned::Covariance(&p * plus * p.transpose()))
}
