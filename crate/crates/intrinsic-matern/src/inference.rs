//! Likelihood of noisy observations of the block model, posterior mean of the
//! latent blocks, and maximum-likelihood fitting.

use crate::igmrf::{IgmrfError, IntrinsicGmrf, ModelParams, Orders, ParamError};
use crate::mesh::Mesh;
use crate::rational;
use crate::sparse_core::{factor_ldl, CsrMatrix, Factorization, NullSpace, SparseError, SparseSymMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error(transparent)]
    Model(#[from] IgmrfError),

    #[error(transparent)]
    Sparse(#[from] SparseError),

    #[error(transparent)]
    Params(#[from] ParamError),

    #[error("need at least 2 observations (got {0})")]
    TooFewObservations(usize),

    #[error("{sites} sites but {values} values")]
    Length { sites: usize, values: usize },

    #[error("noise precision has size {got}, expected {expected}")]
    NoiseSize { expected: usize, got: usize },

    #[error("the nugget variance must be positive when it defines the noise precision")]
    NoiseFree,

    #[error("no finite log-likelihood at the initial parameters")]
    InfeasibleStart,
}

/// Precision of the observation noise.
#[derive(Debug, Clone, Default)]
pub enum NoiseModel {
    /// `(2/σ²) I` with `σ²` the model nugget, so that variograms of the
    /// observations gain exactly `σ²`.
    #[default]
    Nugget,
    Precision(SparseSymMatrix),
}

#[derive(Debug, Clone)]
pub struct ObservationSet {
    pub sites: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub noise: NoiseModel,
}

impl ObservationSet {
    pub fn new(sites: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self, InferenceError> {
        let obs = ObservationSet { sites, values, noise: NoiseModel::Nugget };
        obs.check()?;
        Ok(obs)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check(&self) -> Result<(), InferenceError> {
        if self.sites.len() != self.values.len() {
            return Err(InferenceError::Length { sites: self.sites.len(), values: self.values.len() });
        }
        if self.values.len() < 2 {
            return Err(InferenceError::TooFewObservations(self.values.len()));
        }
        Ok(())
    }

    fn noise_precision(&self, nugget: f64) -> Result<(SparseSymMatrix, f64), InferenceError> {
        let k = self.len();
        match &self.noise {
            NoiseModel::Nugget => {
                if !(nugget > 0.0) {
                    return Err(InferenceError::NoiseFree);
                }
                let p = 2.0 / nugget;
                Ok((SparseSymMatrix::from_diagonal(&vec![p; k]), k as f64 * p.ln()))
            }
            NoiseModel::Precision(q) => {
                if q.n() != k {
                    return Err(InferenceError::NoiseSize { expected: k, got: q.n() });
                }
                let f = factor_ldl(q, NullSpace::None)?;
                if f.rank() < k {
                    return Err(SparseError::RankDeficient { rank: f.rank(), n: k }.into());
                }
                Ok((q.clone(), f.gen_logdet()))
            }
        }
    }
}

/// How the shared constant of the field is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Regime {
    /// Every block annihilates constants.
    IntrinsicBlocks,
    /// Full-rank blocks with the mean projected out; an unknown constant is
    /// integrated against a flat prior.
    Projected,
    Proper,
}

fn regime(model: &IntrinsicGmrf, contrasts: bool) -> Regime {
    if model.has_intrinsic_blocks() {
        Regime::IntrinsicBlocks
    } else if model.projects_mean() || contrasts {
        Regime::Projected
    } else {
        Regime::Proper
    }
}

/// The sparse pieces shared by the likelihood and the posterior.
struct Assembled {
    regime: Regime,
    blocks: usize,
    abar: CsrMatrix,
    qeps: SparseSymMatrix,
    logdet_qeps: f64,
    precision: SparseSymMatrix,
    factor: Factorization,
}

fn assemble(model: &IntrinsicGmrf, obs: &ObservationSet, contrasts: bool) -> Result<Assembled, InferenceError> {
    obs.check()?;
    let m = model.n_blocks();
    let a = model.projection(&obs.sites)?;
    let abar = a.repeat_columns(m);
    let (qeps, logdet_qeps) = obs.noise_precision(model.params().nugget)?;
    let precision = model.stacked_precision().lincomb(1.0, &qeps.congruence(&abar), 1.0);
    let regime = regime(model, contrasts);
    let hint = if regime == Regime::IntrinsicBlocks && m > 1 {
        NullSpace::BlockConstant { blocks: m }
    } else {
        NullSpace::None
    };
    let factor = factor_ldl(&precision, hint)?;
    Ok(Assembled { regime, blocks: m, abar, qeps, logdet_qeps, precision, factor })
}

impl Assembled {
    /// Minimizer `(x, c)` of `xᵀQx + (y − Āx − c1)ᵀQ_ε(y − Āx − c1)` and the
    /// minimum. The constant `c` is free only in the projected regime. The
    /// minimum is evaluated in this residual form, where errors in `x` enter
    /// only quadratically.
    fn profile(&self, q: &SparseSymMatrix, y: &[f64]) -> Result<(Vec<f64>, f64, f64), InferenceError> {
        let (x, c) = match self.regime {
            Regime::IntrinsicBlocks => (self.factor.pseudo_solve(&self.rhs_for(y))?, 0.0),
            Regime::Proper => (self.factor.solve(&self.rhs_for(y))?, 0.0),
            Regime::Projected => {
                let ones = vec![1.0; y.len()];
                let x0 = self.factor.solve(&self.rhs_for(y))?;
                let v = self.factor.solve(&self.rhs_for(&ones))?;
                let s = self.residual_form(q, &v, &ones, 0.0);
                let r0: Vec<f64> = y.iter().zip(self.abar.mul_vec(&x0)).map(|(a, b)| a - b).collect();
                let c = dot(&ones, &self.qeps.mul_vec(&r0)) / s;
                (x0.iter().zip(&v).map(|(a, b)| a - c * b).collect(), c)
            }
        };
        let value = self.residual_form(q, &x, y, c);
        Ok((x, c, value))
    }

    fn rhs_for(&self, y: &[f64]) -> Vec<f64> {
        self.abar.transpose_mul_vec(&self.qeps.mul_vec(y))
    }

    fn residual_form(&self, q: &SparseSymMatrix, x: &[f64], y: &[f64], c: f64) -> f64 {
        let r: Vec<f64> = y.iter().zip(self.abar.mul_vec(x)).map(|(a, b)| a - b - c).collect();
        let prior = if self.regime == Regime::IntrinsicBlocks {
            // Q kills per-block constants; removing them avoids cancellation.
            let n = q.n() / self.blocks;
            let mut centered = x.to_vec();
            for blk in centered.chunks_mut(n) {
                let mean = blk.iter().sum::<f64>() / n as f64;
                blk.iter_mut().for_each(|v| *v -= mean);
            }
            q.quad_form(&centered)
        } else {
            q.quad_form(x)
        };
        prior + self.qeps.quad_form(&r)
    }

    /// `1ᵀS⁻¹1` for the marginal covariance `S = ĀQ⁻¹Āᵀ + Q_ε⁻¹`.
    fn constant_precision(&self, q: &SparseSymMatrix) -> Result<f64, InferenceError> {
        let ones = vec![1.0; self.qeps.n()];
        let v = self.factor.solve(&self.rhs_for(&ones))?;
        Ok(self.residual_form(q, &v, &ones, 0.0))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Log-likelihood of the observations. For intrinsic models this is the
/// first-order intrinsic density of the observations (invariant to adding a
/// constant); for `β = 0` it is the ordinary Gaussian marginal likelihood.
pub fn loglik(model: &IntrinsicGmrf, obs: &ObservationSet) -> Result<f64, InferenceError> {
    Ok(batch_loglik(model, obs, &[&obs.values], false)?[0])
}

/// First-order intrinsic log-density of each vector in `batch`, observed at
/// the sites of `obs` (whose own values are ignored). For `β = 0` this is the
/// density of the contrasts, i.e. of the intrinsic model with the same
/// variogram. The factorization is shared across the batch.
pub fn contrast_loglik(
    model: &IntrinsicGmrf,
    obs: &ObservationSet,
    batch: &[&[f64]],
) -> Result<Vec<f64>, InferenceError> {
    batch_loglik(model, obs, batch, true)
}

fn batch_loglik(
    model: &IntrinsicGmrf,
    obs: &ObservationSet,
    batch: &[&[f64]],
    contrasts: bool,
) -> Result<Vec<f64>, InferenceError> {
    let asm = assemble(model, obs, contrasts)?;
    let q = model.stacked_precision();
    let k = obs.len() as f64;
    let mut logdet_q = 0.0;
    for f in model.factor_blocks()? {
        logdet_q += f.gen_logdet();
    }
    let logdets = logdet_q + asm.logdet_qeps - asm.factor.gen_logdet();
    let ln2pi = (2.0 * PI).ln();
    let constant = match asm.regime {
        Regime::IntrinsicBlocks => {
            let m = model.n_blocks() as f64;
            let n = model.n() as f64;
            -(k - 1.0) * ln2pi + logdets + (m * k / n).ln()
        }
        Regime::Projected => {
            let s = asm.constant_precision(&q)?;
            -(k - 1.0) * ln2pi + logdets + k.ln() - s.ln()
        }
        Regime::Proper => -k * ln2pi + logdets,
    };
    batch
        .iter()
        .map(|y| {
            if y.len() != obs.len() {
                return Err(InferenceError::Length { sites: obs.len(), values: y.len() });
            }
            let (_, _, quad) = asm.profile(&q, y)?;
            Ok(0.5 * (constant - quad))
        })
        .collect()
}

/// Posterior of the stacked blocks given the observations.
#[derive(Debug, Clone)]
pub struct PosteriorState {
    precision: SparseSymMatrix,
    mean: Vec<f64>,
    offset: f64,
    n: usize,
    blocks: usize,
    factor: Factorization,
    /// For a free constant: `P⁻¹ĀᵀQ_ε1` and its Schur complement.
    constant: Option<(Vec<f64>, f64)>,
}

impl PosteriorState {
    /// Posterior precision of the stacked blocks.
    pub fn precision(&self) -> &SparseSymMatrix {
        &self.precision
    }

    /// Posterior mean of the stacked blocks (minimum-norm representative).
    pub fn block_mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factor
    }

    /// Estimated constant added to the blocks; nonzero only for full-rank
    /// blocks with a projected mean.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Posterior mean of the field at the mesh nodes.
    pub fn field_mean(&self) -> Vec<f64> {
        let mut out = vec![self.offset; self.n];
        for b in 0..self.blocks {
            for (o, v) in out.iter_mut().zip(&self.mean[b * self.n..(b + 1) * self.n]) {
                *o += v;
            }
        }
        out
    }

    /// Posterior mean at the rows of a projection matrix over the mesh nodes.
    pub fn predict(&self, a: &CsrMatrix) -> Vec<f64> {
        a.mul_vec(&self.field_mean())
    }

    /// Posterior variance of the field (without noise) at the rows of `a`.
    /// A free constant contributes `(1 − āᵀv)²/s`.
    pub fn predictive_variance(&self, a: &CsrMatrix) -> Result<Vec<f64>, InferenceError> {
        let stacked = a.repeat_columns(self.blocks);
        (0..a.nrows)
            .map(|i| {
                let g = stacked.row_dense(i);
                let x = self.factor.pseudo_solve(&g)?;
                let mut var = dot(&g, &x);
                if let Some((v, s)) = &self.constant {
                    var += (1.0 - dot(&g, v)).powi(2) / s;
                }
                Ok(var)
            })
            .collect()
    }
}

pub fn posterior(model: &IntrinsicGmrf, obs: &ObservationSet) -> Result<PosteriorState, InferenceError> {
    let asm = assemble(model, obs, false)?;
    let q = model.stacked_precision();
    let (mean, offset, _) = asm.profile(&q, &obs.values)?;
    let constant = if asm.regime == Regime::Projected {
        let v = asm.factor.solve(&asm.rhs_for(&vec![1.0; obs.len()]))?;
        Some((v, asm.constant_precision(&q)?))
    } else {
        None
    };
    Ok(PosteriorState {
        constant,
        precision: asm.precision,
        mean,
        offset,
        n: model.n(),
        blocks: model.n_blocks(),
        factor: asm.factor,
    })
}

/// Parameters held fixed during fitting (`true` = fixed).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitMask {
    #[serde(default)]
    pub tau: bool,
    #[serde(default)]
    pub kappa: bool,
    #[serde(default)]
    pub alpha: bool,
    #[serde(default)]
    pub beta: bool,
    #[serde(default)]
    pub nugget: bool,
}

impl FitMask {
    pub fn all_fixed() -> Self {
        FitMask { tau: true, kappa: true, alpha: true, beta: true, nugget: true }
    }

    /// `α` and `β` fixed, the rest free.
    pub fn smoothness_fixed() -> Self {
        FitMask { alpha: true, beta: true, ..Default::default() }
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Nelder–Mead runs; the first starts at the initial point, later ones
    /// from jittered copies of the best point so far.
    pub restarts: usize,
    pub max_evaluations: usize,
    /// Stop when the spread of objective values over the simplex falls below this.
    pub tolerance: f64,
    pub seed: u64,
    /// `Auto` re-selects orders on a 0.05 grid of `(α, β)`.
    pub orders: Orders,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { restarts: 3, max_evaluations: 2000, tolerance: 1e-7, seed: 0, orders: Orders::Auto }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderReport {
    pub m: usize,
    pub m_tilde: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: ModelParams,
    pub loglik: f64,
    pub initial_loglik: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub orders: OrderReport,
}

const SMOOTHNESS_MARGIN: f64 = 1e-3;
const ORDER_GRID: f64 = 0.05;

/// Maps between free coordinates and parameters.
struct Transform {
    init: ModelParams,
    mask: FitMask,
    kappa_floor: f64,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 { x } else { x.exp().ln_1p() }
}

fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 { y } else { y.exp_m1().ln() }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Transform {
    fn free_count(&self) -> usize {
        let m = self.mask;
        [m.tau, m.kappa, m.alpha, m.beta, m.nugget].iter().filter(|f| !**f).count()
    }

    fn half_dim(&self) -> f64 {
        self.init.dim as f64 / 2.0 + SMOOTHNESS_MARGIN
    }

    fn beta_bounds(&self, alpha_fixed: Option<f64>) -> (f64, f64) {
        let lo = alpha_fixed.map_or(0.0, |a| (self.half_dim() - a).max(0.0));
        (lo, 2.0)
    }

    fn to_free(&self, p: &ModelParams) -> Vec<f64> {
        let mut x = Vec::new();
        if !self.mask.tau {
            x.push(p.tau.ln());
        }
        if !self.mask.kappa {
            x.push((p.kappa - self.kappa_floor).max(self.kappa_floor).ln());
        }
        if !self.mask.nugget {
            x.push(p.nugget.max(1e-12).ln());
        }
        if !self.mask.beta {
            let (lo, hi) = self.beta_bounds(self.mask.alpha.then_some(p.alpha));
            let u = ((p.beta - lo) / (hi - lo)).clamp(1e-4, 1.0 - 1e-4);
            x.push((u / (1.0 - u)).ln());
        }
        if !self.mask.alpha {
            let lo = (self.half_dim() - p.beta).max(0.0);
            x.push(softplus_inv((p.alpha - lo).max(1e-4)));
        }
        x
    }

    fn to_params(&self, x: &[f64]) -> ModelParams {
        let mut p = self.init;
        let mut it = x.iter().copied();
        if !self.mask.tau {
            p.tau = it.next().unwrap().exp();
        }
        if !self.mask.kappa {
            p.kappa = self.kappa_floor + it.next().unwrap().exp();
        }
        if !self.mask.nugget {
            p.nugget = it.next().unwrap().exp();
        }
        if !self.mask.beta {
            let (lo, hi) = self.beta_bounds(self.mask.alpha.then_some(p.alpha));
            p.beta = lo + (hi - lo) * sigmoid(it.next().unwrap()).min(1.0 - 1e-9);
        }
        if !self.mask.alpha {
            let lo = (self.half_dim() - p.beta).max(0.0);
            p.alpha = lo + softplus(it.next().unwrap());
        }
        p
    }
}

/// Orders for fitting: chosen at `(α, β)` rounded to the order grid, so that
/// they change only when a grid line is crossed.
fn fitting_orders(mesh: &Mesh, p: &ModelParams, requested: Orders) -> Result<Orders, InferenceError> {
    Ok(match requested {
        Orders::Fixed(..) => requested,
        Orders::Auto => {
            let grid = |x: f64| (x / ORDER_GRID).round() * ORDER_GRID;
            let frac = |x: f64| x - x.floor();
            let snap = |x: f64| {
                let g = grid(x);
                if frac(x) > 1e-12 && frac(g) < 1e-12 {
                    // Keep a fractional exponent fractional.
                    if x > g { g + ORDER_GRID } else { g - ORDER_GRID }
                } else {
                    g
                }
            };
            let width = (mesh.quality().map_err(IgmrfError::from)?.width / mesh.domain_diameter()).min(0.5);
            let (m, mt) = rational::select_orders(snap(p.alpha), snap(p.beta), p.dim, width, crate::igmrf::AUTO_ORDER_SLACK);
            Orders::Fixed(m, mt)
        }
    })
}

fn evaluate(
    mesh: &Mesh,
    p: &ModelParams,
    orders: Orders,
    score: &dyn Fn(&IntrinsicGmrf) -> Option<f64>,
) -> Option<(f64, (usize, usize))> {
    let orders = fitting_orders(mesh, p, orders).ok()?;
    let model = IntrinsicGmrf::build(mesh, *p, orders).ok()?;
    let ll = score(&model)?;
    ll.is_finite().then_some((ll, model.orders()))
}

pub fn fit(
    mesh: &Mesh,
    obs: &ObservationSet,
    init: ModelParams,
    mask: FitMask,
    options: &FitOptions,
) -> Result<FitReport, InferenceError> {
    obs.check()?;
    maximize(mesh, init, mask, options, &|model| loglik(model, obs).ok())
}

/// Maximizes `score` over the parameters left free by `mask`, starting at
/// `init`. `None` from `score` marks an infeasible point.
pub fn maximize(
    mesh: &Mesh,
    init: ModelParams,
    mask: FitMask,
    options: &FitOptions,
    score: &dyn Fn(&IntrinsicGmrf) -> Option<f64>,
) -> Result<FitReport, InferenceError> {
    init.validate()?;
    let transform = Transform { init, mask, kappa_floor: 1e-6 / mesh.domain_diameter() };
    let (initial_loglik, init_orders) =
        evaluate(mesh, &init, options.orders, score).ok_or(InferenceError::InfeasibleStart)?;
    let free = transform.free_count();
    let mut best = FitReport {
        params: init,
        loglik: initial_loglik,
        initial_loglik,
        iterations: 0,
        evaluations: 1,
        converged: true,
        orders: OrderReport { m: init_orders.0, m_tilde: init_orders.1 },
    };
    if free == 0 {
        return Ok(best);
    }
    let objective = |x: &[f64]| -> f64 {
        let p = transform.to_params(x);
        match evaluate(mesh, &p, options.orders, score) {
            Some((ll, _)) => -ll,
            None => f64::INFINITY,
        }
    };
    let mut rng = ChaCha20Rng::seed_from_u64(options.seed);
    let mut start = transform.to_free(&init);
    let mut best_x = start.clone();
    let mut best_f = -initial_loglik;
    let mut converged = false;
    for run in 0..options.restarts.max(1) {
        if run > 0 {
            start = best_x.iter().map(|v| v + 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
        }
        let r = nelder_mead(&objective, &start, 0.5, options.max_evaluations, options.tolerance);
        best.iterations += r.iterations;
        best.evaluations += r.evaluations;
        if r.value <= best_f {
            best_f = r.value;
            best_x = r.point;
            converged = r.converged;
        }
    }
    let params = transform.to_params(&best_x);
    let (loglik, orders) =
        evaluate(mesh, &params, options.orders, score).ok_or(InferenceError::InfeasibleStart)?;
    best.params = params;
    best.loglik = loglik;
    best.converged = converged;
    best.orders = OrderReport { m: orders.0, m_tilde: orders.1 };
    Ok(best)
}

struct Minimum {
    point: Vec<f64>,
    value: f64,
    iterations: usize,
    evaluations: usize,
    converged: bool,
}

/// Nelder–Mead with the standard coefficients (1, 2, ½, ½).
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_evals: usize, tol: f64) -> Minimum {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = f(&x);
        simplex.push((x, v));
    }
    let mut evals = n + 1;
    let mut iterations = 0;
    let mut converged = false;
    let by_value = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)| a.1.total_cmp(&b.1);
    while evals < max_evals {
        simplex.sort_by(by_value);
        let (lo, hi) = (simplex[0].1, simplex[n].1);
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if hi.is_finite() && hi - lo <= tol * (1.0 + lo.abs()) && size < 1e-5 {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect()
        };
        let xr = along(1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let x = along(0.5);
            let v = f(&x);
            (x, v)
        } else {
            let x = along(-0.5);
            let v = f(&x);
            (x, v)
        };
        evals += 1;
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for s in simplex.iter_mut().skip(1) {
            s.0 = s.0.iter().zip(&best).map(|(x, b)| b + 0.5 * (x - b)).collect();
            s.1 = f(&s.0);
        }
        evals += n;
    }
    simplex.sort_by(by_value);
    let (point, value) = simplex.swap_remove(0);
    Minimum { point, value, iterations, evaluations: evals, converged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn line(n: usize) -> Mesh {
        Mesh::build_uniform(1, &[(0.0, 1.0)], &[n]).unwrap()
    }

    fn model(mesh: &Mesh, alpha: f64, beta: f64, nugget: f64, orders: Orders) -> IntrinsicGmrf {
        let p = ModelParams::new(1.4, 2.5, alpha, beta, nugget, mesh.dim()).unwrap();
        IntrinsicGmrf::build(mesh, p, orders).unwrap()
    }

    fn observations(sites: &[f64], values: &[f64]) -> ObservationSet {
        ObservationSet::new(sites.iter().map(|&s| vec![s]).collect(), values.to_vec()).unwrap()
    }

    fn pinv(q: &DMatrix<f64>) -> DMatrix<f64> {
        let eig = q.clone().symmetric_eigen();
        let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut out = DMatrix::zeros(q.nrows(), q.ncols());
        for (j, &l) in eig.eigenvalues.iter().enumerate() {
            if l > 1e-11 * top {
                let e = eig.eigenvectors.column(j);
                out += e * e.transpose() / l;
            }
        }
        out
    }

    /// Dense covariance of `A W` over the given projection, summing dense
    /// (pseudo-)inverses of the block precisions.
    fn dense_latent_cov(model: &IntrinsicGmrf, a: &CsrMatrix) -> DMatrix<f64> {
        let ad = a.to_dense();
        let mut sigma = DMatrix::zeros(model.n(), model.n());
        for b in model.blocks() {
            sigma += pinv(&b.precision.to_dense());
        }
        &ad * sigma * ad.transpose()
    }

    fn variogram_of(cov: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(cov.nrows(), cov.ncols(), |i, j| cov[(i, i)] + cov[(j, j)] - 2.0 * cov[(i, j)])
    }

    fn mvn_logpdf(cov: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
        let chol = cov.clone().cholesky().unwrap();
        let logdet: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let sol = chol.solve(x);
        -0.5 * (x.len() as f64 * (2.0 * PI).ln() + logdet + x.dot(&sol))
    }

    /// Dense oracle: intrinsic density of the observations from their
    /// variogram, through differences pinned at the last site.
    fn dense_intrinsic_loglik(model: &IntrinsicGmrf, obs: &ObservationSet) -> f64 {
        let a = model.projection(&obs.sites).unwrap();
        let k = obs.len();
        let mut gamma = variogram_of(&dense_latent_cov(model, &a));
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    gamma[(i, j)] += model.params().nugget;
                }
            }
        }
        let last = k - 1;
        let cz = DMatrix::from_fn(last, last, |i, j| 0.5 * (gamma[(i, last)] + gamma[(j, last)] - gamma[(i, j)]));
        let z = DVector::from_fn(last, |i, _| obs.values[i] - obs.values[last]);
        mvn_logpdf(&cz, &z) + 0.5 * (k as f64).ln()
    }

    const SITES: [f64; 6] = [0.07, 0.23, 0.41, 0.58, 0.77, 0.96];
    const VALUES: [f64; 6] = [0.4, -0.3, 1.1, 0.9, -0.2, 0.5];

    #[test]
    fn likelihood_matches_dense_oracles() {
        let mesh = line(25);
        for (alpha, beta) in [(1.0, 1.0), (2.0, 0.0), (0.0, 2.0), (0.5, 1.0), (1.3, 0.4), (0.0, 1.5)] {
            for k in [4, 6] {
                let md = model(&mesh, alpha, beta, 0.05, Orders::Fixed(2, 2));
                let obs = observations(&SITES[..k], &VALUES[..k]);
                let got = loglik(&md, &obs).unwrap();
                let want = if beta == 0.0 {
                    let a = md.projection(&obs.sites).unwrap();
                    let cov = dense_latent_cov(&md, &a) + DMatrix::identity(k, k) * 0.025;
                    mvn_logpdf(&cov, &DVector::from_column_slice(&obs.values))
                } else {
                    dense_intrinsic_loglik(&md, &obs)
                };
                assert!((got - want).abs() < 1e-8, "α={alpha} β={beta} k={k}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn contrast_likelihood_matches_dense_oracle_for_every_regime() {
        let mesh = line(25);
        let shifted: Vec<f64> = VALUES.iter().map(|v| v - 2.5).collect();
        for (alpha, beta) in [(2.0, 0.0), (1.3, 0.4), (1.0, 1.0)] {
            let md = model(&mesh, alpha, beta, 0.05, Orders::Fixed(2, 2));
            let obs = observations(&SITES, &VALUES);
            let got = contrast_loglik(&md, &obs, &[&VALUES, &shifted]).unwrap();
            let want = dense_intrinsic_loglik(&md, &obs);
            assert!((got[0] - want).abs() < 1e-8, "α={alpha} β={beta}: {} vs {want}", got[0]);
            assert!((got[1] - want).abs() < 1e-8);
        }
    }

    #[test]
    fn fractional_stiffness_model_matches_dense_oracle() {
        let mesh = line(20);
        let md = model(&mesh, 0.0, 1.5, 0.02, Orders::Fixed(0, 3));
        let obs = observations(&SITES[..5], &VALUES[..5]);
        let got = loglik(&md, &obs).unwrap();
        assert!((got - dense_intrinsic_loglik(&md, &obs)).abs() < 1e-8);
    }

    #[test]
    fn likelihood_is_shift_and_order_invariant() {
        let mesh = line(30);
        for (alpha, beta) in [(1.0, 1.0), (0.5, 1.0), (1.3, 0.4)] {
            let md = model(&mesh, alpha, beta, 0.1, Orders::Fixed(2, 2));
            let obs = observations(&SITES, &VALUES);
            let base = loglik(&md, &obs).unwrap();
            for c in [-3.0, 1.0, 10.0] {
                let shifted: Vec<f64> = VALUES.iter().map(|v| v + c).collect();
                let l = loglik(&md, &observations(&SITES, &shifted)).unwrap();
                assert!((l - base).abs() < 1e-9, "α={alpha} β={beta} c={c}: {l} vs {base}");
            }
            let order = [3, 0, 5, 1, 4, 2];
            let s: Vec<f64> = order.iter().map(|&i| SITES[i]).collect();
            let v: Vec<f64> = order.iter().map(|&i| VALUES[i]).collect();
            assert!((loglik(&md, &observations(&s, &v)).unwrap() - base).abs() < 1e-9);
        }
        let proper = model(&mesh, 2.0, 0.0, 0.1, Orders::Auto);
        let base = loglik(&proper, &observations(&SITES, &VALUES)).unwrap();
        let shifted: Vec<f64> = VALUES.iter().map(|v| v + 1.0).collect();
        assert!((loglik(&proper, &observations(&SITES, &shifted)).unwrap() - base).abs() > 1e-3);
    }

    #[test]
    fn posterior_rank_and_null_space() {
        let mesh = line(20);
        let obs = observations(&SITES, &VALUES);
        let single = posterior(&model(&mesh, 1.0, 1.0, 0.1, Orders::Auto), &obs).unwrap();
        assert_eq!(single.factorization().rank(), 20);
        let multi_model = model(&mesh, 0.5, 1.0, 0.1, Orders::Fixed(2, 0));
        let multi = posterior(&multi_model, &obs).unwrap();
        assert_eq!(multi_model.n_blocks(), 3);
        assert_eq!(multi.factorization().null_dim(), 2);
        let ev = multi.precision().to_dense().symmetric_eigen().eigenvalues;
        let top = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert_eq!(ev.iter().filter(|v| v.abs() < 1e-10 * top).count(), 2);
    }

    /// Dense ordinary kriging of the latent field from noisy observations.
    /// Ordinary kriging from the dense variogram: `(prediction, variance)`
    /// with variance `½(λᵀγ₀ + μ)`.
    fn dense_ordinary_kriging(
        model: &IntrinsicGmrf,
        obs: &ObservationSet,
        targets: &[Vec<f64>],
    ) -> Vec<(f64, f64)> {
        let k = obs.len();
        let mut all = obs.sites.clone();
        all.extend_from_slice(targets);
        let gamma = variogram_of(&dense_latent_cov(model, &model.projection(&all).unwrap()));
        let nug = model.params().nugget;
        let mut sys = DMatrix::zeros(k + 1, k + 1);
        for i in 0..k {
            for j in 0..k {
                sys[(i, j)] = if i == j { 0.0 } else { gamma[(i, j)] + nug };
            }
            sys[(i, k)] = 1.0;
            sys[(k, i)] = 1.0;
        }
        let lu = sys.lu();
        (0..targets.len())
            .map(|t| {
                let mut rhs = DVector::zeros(k + 1);
                for i in 0..k {
                    rhs[i] = gamma[(k + t, i)] + nug / 2.0;
                }
                rhs[k] = 1.0;
                let lam = lu.solve(&rhs).unwrap();
                let mean = (0..k).map(|i| lam[i] * obs.values[i]).sum();
                (mean, 0.5 * lam.dot(&rhs))
            })
            .collect()
    }

    #[test]
    fn posterior_mean_matches_dense_kriging() {
        let mesh = line(20);
        let targets: Vec<Vec<f64>> = [0.02, 0.3, 0.5, 0.66, 0.99].iter().map(|&x| vec![x]).collect();
        let obs = observations(&SITES[..4], &VALUES[..4]);
        for (alpha, beta) in [(1.0, 1.0), (0.5, 1.0), (1.3, 0.4)] {
            let md = model(&mesh, alpha, beta, 0.05, Orders::Fixed(2, 2));
            let post = posterior(&md, &obs).unwrap();
            let a = md.projection(&targets).unwrap();
            let got = post.predict(&a);
            let var = post.predictive_variance(&a).unwrap();
            let want = dense_ordinary_kriging(&md, &obs, &targets);
            for ((g, v), (w, wv)) in got.iter().zip(&var).zip(&want) {
                assert!((g - w).abs() < 1e-6, "α={alpha} β={beta}: {g} vs {w}");
                assert!((v - wv).abs() < 1e-6 * wv, "α={alpha} β={beta}: {v} vs {wv}");
            }
        }
        // Proper case: simple kriging with zero mean.
        let md = model(&mesh, 2.0, 0.0, 0.05, Orders::Auto);
        let post = posterior(&md, &obs).unwrap();
        let mut all = obs.sites.clone();
        all.extend_from_slice(&targets);
        let cov = dense_latent_cov(&md, &md.projection(&all).unwrap());
        let syy = cov.view((0, 0), (4, 4)) + DMatrix::identity(4, 4) * 0.025;
        let s0y = cov.view((4, 0), (5, 4)).into_owned();
        let lu = syy.lu();
        let want = &s0y * lu.solve(&DVector::from_column_slice(&obs.values)).unwrap();
        let want_var = cov.view((4, 4), (5, 5)) - &s0y * lu.solve(&s0y.transpose()).unwrap();
        let a = md.projection(&targets).unwrap();
        let got = post.predict(&a);
        let var = post.predictive_variance(&a).unwrap();
        for (i, (g, w)) in got.iter().zip(want.iter()).enumerate() {
            assert!((g - w).abs() < 1e-6);
            assert!((var[i] - want_var[(i, i)]).abs() < 1e-6 * want_var[(i, i)]);
        }
    }

    #[test]
    fn posterior_interpolates_as_noise_vanishes() {
        let mesh = line(60);
        let obs = observations(&SITES, &VALUES);
        for (alpha, beta) in [(1.0, 1.0), (0.5, 1.0), (1.3, 0.4)] {
            let md = model(&mesh, alpha, beta, 1e-8, Orders::Fixed(2, 2));
            let post = posterior(&md, &obs).unwrap();
            let fitted = post.predict(&md.projection(&obs.sites).unwrap());
            let dev = fitted.iter().zip(&VALUES).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(dev < 1e-3, "α={alpha} β={beta}: {dev}");
        }
    }

    #[test]
    fn conditional_means_of_proper_models() {
        let mesh = line(15);
        let md = model(&mesh, 2.0, 0.0, 0.1, Orders::Auto);
        let q = md.blocks()[0].precision.to_dense();
        let sigma = q.clone().try_inverse().unwrap();
        let w = DVector::from_fn(15, |i, _| ((i * 7 % 5) as f64 - 2.0) * 0.3);
        for i in [0, 6, 14] {
            let rest: Vec<usize> = (0..15).filter(|&j| j != i).collect();
            let s_ir = DMatrix::from_fn(1, 14, |_, b| sigma[(i, rest[b])]);
            let s_rr = DMatrix::from_fn(14, 14, |a, b| sigma[(rest[a], rest[b])]);
            let w_r = DVector::from_fn(14, |a, _| w[rest[a]]);
            let cond = (s_ir * s_rr.lu().solve(&w_r).unwrap())[(0, 0)];
            let local = -rest.iter().map(|&j| q[(i, j)] * w[j]).sum::<f64>() / q[(i, i)];
            assert!((cond - local).abs() < 1e-9 * w.amax());
        }
        // The posterior mean solves the posterior system row by row.
        let obs = observations(&SITES, &VALUES);
        let post = posterior(&md, &obs).unwrap();
        let p = post.precision().to_dense();
        let mu = post.block_mean();
        let a = md.projection(&obs.sites).unwrap();
        let b = a.transpose_mul_vec(&VALUES.iter().map(|v| v * 20.0).collect::<Vec<_>>());
        for i in 0..15 {
            let off: f64 = (0..15).filter(|&j| j != i).map(|j| p[(i, j)] * mu[j]).sum();
            assert!(((b[i] - off) / p[(i, i)] - mu[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn general_noise_precision() {
        let mesh = line(20);
        let md = model(&mesh, 1.0, 1.0, 0.0, Orders::Auto);
        let mut obs = observations(&SITES[..4], &VALUES[..4]);
        assert!(matches!(loglik(&md, &obs), Err(InferenceError::NoiseFree)));
        obs.noise = NoiseModel::Precision(SparseSymMatrix::from_diagonal(&[40.0; 4]));
        let got = loglik(&md, &obs).unwrap();
        let nugget = model(&mesh, 1.0, 1.0, 0.05, Orders::Auto);
        let want = loglik(&nugget, &observations(&SITES[..4], &VALUES[..4])).unwrap();
        assert!((got - want).abs() < 1e-10);
        obs.noise = NoiseModel::Precision(SparseSymMatrix::from_diagonal(&[40.0; 3]));
        assert!(matches!(loglik(&md, &obs), Err(InferenceError::NoiseSize { .. })));
    }

    #[test]
    fn fixed_mask_returns_init() {
        let mesh = line(20);
        let obs = observations(&SITES, &VALUES);
        let init = ModelParams::new(1.0, 2.0, 1.0, 1.0, 0.1, 1).unwrap();
        let r = fit(&mesh, &obs, init, FitMask::all_fixed(), &FitOptions::default()).unwrap();
        assert_eq!(r.params, init);
        let md = IntrinsicGmrf::build(&mesh, init, Orders::Auto).unwrap();
        assert_eq!(r.loglik, loglik(&md, &obs).unwrap());
        assert_eq!(r.evaluations, 1);
    }

    #[test]
    fn fit_does_not_decrease_likelihood() {
        let mesh = line(30);
        let obs = observations(&SITES, &VALUES);
        let init = ModelParams::new(1.0, 2.0, 0.7, 1.0, 0.1, 1).unwrap();
        let opts = FitOptions { restarts: 0, max_evaluations: 150, ..Default::default() };
        let mask = FitMask { beta: true, ..Default::default() };
        let r = fit(&mesh, &obs, init, mask, &opts).unwrap();
        assert!(r.loglik >= r.initial_loglik);
        assert_eq!(r.params.beta, 1.0);
        assert!(r.params.alpha + r.params.beta > 0.5);
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["orders"]["m_tilde"].is_u64());
    }

    #[test]
    fn transform_round_trips_and_respects_constraints() {
        let init = ModelParams::new(0.7, 3.0, 0.4, 1.3, 0.2, 2).unwrap();
        let t = Transform { init, mask: FitMask::default(), kappa_floor: 1e-7 };
        let x = t.to_free(&init);
        let back = t.to_params(&x);
        for (a, b) in [(back.tau, 0.7), (back.kappa, 3.0), (back.alpha, 0.4), (back.beta, 1.3), (back.nugget, 0.2)] {
            assert!((a - b).abs() < 1e-9);
        }
        for v in [-40.0, -3.0, 0.0, 5.0, 40.0] {
            let p = t.to_params(&[v, v, v, v, v]);
            assert!(p.validate().is_ok(), "{p:?}");
            assert!(p.alpha + p.beta >= 1.0 + SMOOTHNESS_MARGIN - 1e-12);
        }
    }
}
