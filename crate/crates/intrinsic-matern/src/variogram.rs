//! Exact variograms of the intrinsic Whittle–Matérn field.
//!
//! Three evaluation routes are provided: the Neumann eigen-expansion on a box
//! `[0, L]^d`, the stationary isotropic variogram on `R^d` as a radial
//! integral over frequencies, and closed forms for a few special cases. The
//! asymptotic regime (local roughness and growth at infinity) is available
//! from [`regimes`].
//!
//! With `Λ₁ = cos`, `Λ₂ = J₀`, the stationary variogram is
//!
//! ```text
//! γ(h) = c_d τ⁻² ∫₀^∞ (1 − Λ_d(hr)) r^{d−1−2β} (κ² + r²)^{−α} dr,
//! c₁ = 2/π,  c₂ = 1/π.
//! ```

use crate::igmrf::{ModelParams, ParamError};
use crate::quad::{integrate, Wynn};
use crate::special::{bessel_j0, bessel_k0, gamma, one_minus_j0, EULER_GAMMA};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VariogramError {
    #[error(transparent)]
    Params(#[from] ParamError),

    #[error("parameters outside the validity range: {0}")]
    OutOfRegime(String),

    #[error("quadrature did not converge (achieved relative accuracy {achieved:.2e})")]
    Quadrature { achieved: f64 },

    #[error("point has {got} coordinates, expected {dim}")]
    Dimension { got: usize, dim: usize },

    #[error("box side must be positive (got {0})")]
    Side(f64),
}

/// How a variogram is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    /// Neumann eigen-expansion on `[0, side]^d`; `terms` fixes the per-axis
    /// truncation, otherwise it is chosen from the tail estimate.
    BoxSeries {
        side: f64,
        terms: Option<usize>,
    },
    Quadrature,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariogramSpec {
    pub params: ModelParams,
    pub backend: Backend,
}

impl VariogramSpec {
    /// `γ(s, t)`. The stationary backends depend on `‖s − t‖` only.
    pub fn evaluate(&self, s: &[f64], t: &[f64]) -> Result<f64, VariogramError> {
        let d = self.params.dim;
        for p in [s, t] {
            if p.len() != d {
                return Err(VariogramError::Dimension {
                    got: p.len(),
                    dim: d,
                });
            }
        }
        let h = s
            .iter()
            .zip(t)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        match self.backend {
            Backend::BoxSeries { side, terms } => {
                Ok(box_series(&self.params, side, terms, s, t)?.value)
            }
            Backend::Quadrature => stationary(&self.params, h),
            Backend::ClosedForm => closed_form(&self.params, h),
        }
    }
}

/// Neumann Laplacian eigenpair on `[0, side]^d` for a multi-index.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxEigenpair {
    pub eigenvalue: f64,
    index: Vec<usize>,
    side: f64,
}

impl BoxEigenpair {
    /// `e_j(s) = Π_i (√2)^{[j_i>0]} L^{−1/2} cos(j_i π s_i / L)`.
    pub fn eval(&self, s: &[f64]) -> f64 {
        self.index
            .iter()
            .zip(s)
            .map(|(&j, &x)| {
                let norm = if j > 0 {
                    (2.0 / self.side).sqrt()
                } else {
                    self.side.sqrt().recip()
                };
                norm * (j as f64 * PI * x / self.side).cos()
            })
            .product()
    }
}

pub fn box_eigenpair(side: f64, index: &[usize]) -> BoxEigenpair {
    let sq: f64 = index.iter().map(|&j| (j * j) as f64).sum();
    BoxEigenpair {
        eigenvalue: sq * PI * PI / (side * side),
        index: index.to_vec(),
        side,
    }
}

/// Truncated eigen-expansion value with its estimated tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    /// Estimated contribution of the omitted terms.
    pub tail_bound: f64,
    /// Per-axis truncation used.
    pub terms: usize,
    /// Set when the tail exceeds `1e−6` of the value.
    pub truncated: bool,
}

const SERIES_TARGET: f64 = 1e-8;
const SERIES_WARN: f64 = 1e-6;

/// Spectral density factor `λ^{−β}(κ² + λ)^{−α}`.
fn spectral(p: &ModelParams, lambda: f64) -> f64 {
    let mut v = 1.0;
    if p.beta != 0.0 {
        v *= lambda.powf(-p.beta);
    }
    if p.alpha != 0.0 {
        v *= (p.kappa * p.kappa + lambda).powf(-p.alpha);
    }
    v
}

/// Estimate of `τ⁻² Σ_{j beyond J} λ_j^{−β}(κ²+λ_j)^{−α} · mean (e_j(s)−e_j(t))²`,
/// bounding the spectral factor by `λ^{−(α+β)}` and the sum by an integral.
fn series_tail(p: &ModelParams, side: f64, terms: usize) -> f64 {
    let s = p.alpha + p.beta;
    let j = terms as f64 + 0.5;
    let scale = (side / PI).powf(2.0 * s);
    let integral = match p.dim {
        1 => scale * j.powf(1.0 - 2.0 * s) / (2.0 * s - 1.0),
        _ => 0.5 * PI * scale * j.powf(2.0 - 2.0 * s) / (2.0 * s - 2.0),
    };
    2.0 / side.powi(p.dim as i32) * integral / (p.tau * p.tau)
}

/// Eigen-expansion of the variogram on the box `[0, side]^d`.
pub fn box_series(
    p: &ModelParams,
    side: f64,
    terms: Option<usize>,
    s: &[f64],
    t: &[f64],
) -> Result<SeriesValue, VariogramError> {
    p.validate()?;
    if !(side > 0.0) {
        return Err(VariogramError::Side(side));
    }
    let d = p.dim;
    for q in [s, t] {
        if q.len() != d {
            return Err(VariogramError::Dimension {
                got: q.len(),
                dim: d,
            });
        }
    }
    if s == t {
        return Ok(SeriesValue {
            value: 0.0,
            tail_bound: 0.0,
            terms: 0,
            truncated: false,
        });
    }
    let max_terms = if d == 1 { 20_000_000 } else { 4000 };
    let j = match terms {
        Some(j) => j.max(1),
        None => {
            let pilot = series_sum(p, side, 64, s, t);
            let mut j = 64usize;
            while j < max_terms && series_tail(p, side, j) > SERIES_TARGET * pilot {
                j = (j * 2).min(max_terms);
            }
            j
        }
    };
    let value = series_sum(p, side, j, s, t);
    let tail_bound = series_tail(p, side, j);
    Ok(SeriesValue {
        value,
        tail_bound,
        terms: j,
        truncated: tail_bound > SERIES_WARN * value,
    })
}

/// `cos(kθ)` for `k = 0..=n` by rotation, resynchronized periodically.
fn cos_table(theta: f64, n: usize) -> Vec<f64> {
    let (sn, cs) = theta.sin_cos();
    let mut out = Vec::with_capacity(n + 1);
    let (mut c, mut s) = (1.0f64, 0.0f64);
    for k in 0..=n {
        if k % 512 == 0 {
            (s, c) = (k as f64 * theta).sin_cos();
        }
        out.push(c);
        (c, s) = (c * cs - s * sn, s * cs + c * sn);
    }
    out
}

fn series_sum(p: &ModelParams, side: f64, j: usize, s: &[f64], t: &[f64]) -> f64 {
    let w = PI / side;
    let norm = |k: usize| {
        if k > 0 {
            (2.0 / side).sqrt()
        } else {
            side.sqrt().recip()
        }
    };
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..p.dim)
        .map(|i| {
            let cs = cos_table(w * s[i], j);
            let ct = cos_table(w * t[i], j);
            let ns = cs.iter().enumerate().map(|(k, c)| norm(k) * c).collect();
            let nt = ct.iter().enumerate().map(|(k, c)| norm(k) * c).collect();
            (ns, nt)
        })
        .collect();
    let mut sum = 0.0;
    match p.dim {
        1 => {
            let (es, et) = &axes[0];
            for k in 1..=j {
                let lambda = (k * k) as f64 * w * w;
                sum += spectral(p, lambda) * (es[k] - et[k]).powi(2);
            }
        }
        _ => {
            let (xs, xt) = &axes[0];
            let (ys, yt) = &axes[1];
            for k1 in 0..=j {
                for k2 in 0..=j {
                    if k1 == 0 && k2 == 0 {
                        continue;
                    }
                    let lambda = ((k1 * k1 + k2 * k2) as f64) * w * w;
                    let diff = xs[k1] * ys[k2] - xt[k1] * yt[k2];
                    sum += spectral(p, lambda) * diff * diff;
                }
            }
        }
    }
    sum / (p.tau * p.tau)
}

fn radial_constant(d: usize) -> f64 {
    match d {
        1 => 2.0 / PI,
        _ => 1.0 / PI,
    }
}

/// The `k`-th positive zero of `Λ_d` (exact for `cos`, McMahon's expansion
/// for `J₀`; the breakpoints only need to track the oscillation).
fn lambda_zero(d: usize, k: usize) -> f64 {
    match d {
        1 => (k as f64 + 0.5) * PI,
        _ => {
            let b = (k as f64 + 0.75) * PI;
            b + 1.0 / (8.0 * b) - 31.0 / (384.0 * b.powi(3)) + 3779.0 / (15360.0 * b.powi(5))
        }
    }
}

fn lambda(d: usize, u: f64) -> f64 {
    match d {
        1 => u.cos(),
        _ => bessel_j0(u),
    }
}

fn one_minus_lambda(d: usize, u: f64) -> f64 {
    match d {
        1 => 2.0 * (0.5 * u).sin().powi(2),
        _ => one_minus_j0(u),
    }
}

const MAX_TAIL_INTERVALS: usize = 200;
const QUAD_TOL: f64 = 1e-13;

/// Integral over `[0, b]` of an integrand behaving like `u^e` at 0, after
/// the substitution `u = b·t^q` that removes an integrable singularity.
fn integrate_from_zero(f: &dyn Fn(f64) -> f64, breaks: &[f64], e: f64) -> crate::quad::Integral {
    let b = *breaks.last().expect("non-empty");
    let q = if e < 0.0 { 1.0 / (e + 1.0) } else { 1.0 };
    let g = |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        let u = b * t.powf(q);
        f(u) * b * q * t.powf(q - 1.0)
    };
    let tb: Vec<f64> = breaks.iter().map(|&u| (u / b).powf(1.0 / q)).collect();
    integrate(&g, &tb, 0.0, QUAD_TOL, 50_000)
}

/// Stationary isotropic variogram on `R^d`.
pub fn stationary(p: &ModelParams, h: f64) -> Result<f64, VariogramError> {
    p.validate()?;
    let d = p.dim;
    let half = d as f64 / 2.0;
    if p.beta >= 1.0 + half {
        return Err(VariogramError::OutOfRegime(format!(
            "β = {} must be below 1 + d/2 on R^d",
            p.beta
        )));
    }
    if !(h >= 0.0) {
        return Err(VariogramError::OutOfRegime(format!(
            "distance {h} must be non-negative"
        )));
    }
    if h == 0.0 {
        return Ok(0.0);
    }
    let a = p.kappa * h;
    let pw = d as f64 - 1.0 - 2.0 * p.beta;
    let weight = |u: f64| {
        let mut v = u.powf(pw);
        if p.alpha != 0.0 {
            v *= (a * a + u * u).powf(-p.alpha);
        }
        v
    };
    // Split point: a zero of Λ beyond the oscillation and κ-transition scales.
    let mut k0 = 0;
    while lambda_zero(d, k0) < (4.0 * PI).max(2.0 * a) {
        k0 += 1;
    }
    let split = lambda_zero(d, k0);
    let mut breaks = vec![0.0];
    breaks.extend((0..k0).map(|k| lambda_zero(d, k)));
    if a > 0.0 && a < split {
        breaks.push(a);
    }
    breaks.push(split);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    // Near 0 the integrand behaves like u^{pw+2}.
    let head = integrate_from_zero(&|u| one_minus_lambda(d, u) * weight(u), &breaks, pw + 2.0);
    // Non-oscillatory tail ∫_split^∞ w(u) du with u = split/t; the integrand
    // behaves like t^{2α+2β−d−1} at t = 0.
    let e = 2.0 * (p.alpha + p.beta) - d as f64 - 1.0;
    let smooth = integrate_from_zero(&|t| weight(split / t) * split / (t * t), &[0.0, 1.0], e);
    let mut total = head.value + smooth.value;
    let mut achieved = (head.error + smooth.error) / total.abs();
    if !head.converged || !smooth.converged {
        return Err(VariogramError::Quadrature { achieved });
    }

    // Oscillatory tail between consecutive zeros, extrapolated.
    let mut wynn = Wynn::default();
    let mut partial = 0.0;
    let mut osc = f64::NAN;
    let mut converged = false;
    let mut lo = split;
    for k in 1..=MAX_TAIL_INTERVALS {
        let hi = lambda_zero(d, k0 + k);
        let piece = integrate(&|u| lambda(d, u) * weight(u), &[lo, hi], 0.0, QUAD_TOL, 200);
        partial += piece.value;
        let (est, change) = wynn.push(partial);
        osc = est;
        achieved = change / (total - est).abs();
        if k >= 6 && achieved < 1e-12 {
            converged = true;
            break;
        }
        lo = hi;
    }
    if !converged {
        return Err(VariogramError::Quadrature { achieved });
    }
    total -= osc;
    let scale = radial_constant(d) / (p.tau * p.tau) * h.powf(2.0 * (p.alpha + p.beta) - d as f64);
    Ok(scale * total)
}

/// Power-law variogram of the pure fractional case `α = 0`:
/// `γ(h) = h^{2β−d} / (c_d τ²)` with `c₁ = Γ(2β)cos(π(β+1))`,
/// `c₂ = 2^{2β−1}Γ(β)² sin(π(β+1))`.
pub fn closed_fractional(p: &ModelParams, h: f64) -> Result<f64, VariogramError> {
    p.validate()?;
    let half = p.dim as f64 / 2.0;
    if p.alpha != 0.0 || !(p.beta > half && p.beta < 1.0 + half) {
        return Err(VariogramError::OutOfRegime(format!(
            "power law needs α = 0 and d/2 < β < 1 + d/2 (α={}, β={})",
            p.alpha, p.beta
        )));
    }
    Ok(h.powf(2.0 * p.beta - p.dim as f64) / (fractional_constant(p) * p.tau * p.tau))
}

fn fractional_constant(p: &ModelParams) -> f64 {
    let b = p.beta;
    match p.dim {
        1 => gamma(2.0 * b) * (PI * (b + 1.0)).cos(),
        _ => 2f64.powf(2.0 * b - 1.0) * gamma(b).powi(2) * (PI * (b + 1.0)).sin(),
    }
}

/// `d = 2`, `α = β = 1`: `(πκ²τ²)⁻¹ [K₀(κh) + ln(κh/2) + γ_E]`.
pub fn closed_alpha1_beta1(kappa: f64, tau: f64, h: f64) -> f64 {
    let z = kappa * h;
    if z == 0.0 {
        return 0.0;
    }
    let bracket = if z < 1e-4 {
        // K₀(z) + ln(z/2) + γ_E = (z²/4)(1 − ln(z/2) − γ_E) + O(z⁴ ln z)
        let l = (z / 2.0).ln() + EULER_GAMMA;
        z * z / 4.0 * (1.0 - l) + z.powi(4) / 128.0 * (3.0 - 2.0 * l)
    } else {
        bessel_k0(z) + (z / 2.0).ln() + EULER_GAMMA
    };
    bracket / (PI * kappa * kappa * tau * tau)
}

/// Closed forms, where one is known:
/// - `α = 0`, power law;
/// - `d = 2`, `α = β = 1`;
/// - `d = 1`, `α = β = 1`: `(κ²τ²)⁻¹ [h − (1 − e^{−κh})/κ]`;
/// - `d = 1`, `α = 1`, `β = 0`: `(1 − e^{−κh})/(κτ²)`.
pub fn closed_form(p: &ModelParams, h: f64) -> Result<f64, VariogramError> {
    p.validate()?;
    let (k, t2) = (p.kappa, p.tau * p.tau);
    if p.alpha == 0.0 {
        return closed_fractional(p, h);
    }
    match (p.dim, p.alpha, p.beta) {
        (2, a, b) if a == 1.0 && b == 1.0 => Ok(closed_alpha1_beta1(k, p.tau, h)),
        (1, a, b) if a == 1.0 && b == 1.0 => Ok((h + (-k * h).exp_m1() / k) / (k * k * t2)),
        (1, a, b) if a == 1.0 && b == 0.0 => Ok(-(-k * h).exp_m1() / (k * t2)),
        _ => Err(VariogramError::OutOfRegime(format!(
            "no closed form for d={}, α={}, β={}",
            p.dim, p.alpha, p.beta
        ))),
    }
}

/// Growth class of `γ(h)` as `h → ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GlobalClass {
    Bounded,
    /// `γ(h) ∼ constant · ln h`.
    Log {
        constant: f64,
    },
    /// `γ(h) ∼ constant · h^{exponent}`.
    Power {
        constant: f64,
        exponent: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticRegime {
    /// `γ(h) ≍ h^{local_exponent}` as `h → 0`.
    pub local_exponent: f64,
    pub global: GlobalClass,
}

const REGIME_TOL: f64 = 1e-9;

pub fn regimes(p: &ModelParams) -> Result<AsymptoticRegime, VariogramError> {
    p.validate()?;
    let d = p.dim as f64;
    if p.beta >= 1.0 + d / 2.0 {
        return Err(VariogramError::OutOfRegime(format!(
            "β = {} must be below 1 + d/2 on R^d",
            p.beta
        )));
    }
    let local_exponent = (2.0 * (p.alpha + p.beta) - d).min(2.0);
    let global = if (p.beta - d / 2.0).abs() <= REGIME_TOL {
        // Low frequencies dominate: c_d τ⁻² κ^{−2α} ∫_{1/h} r^{−1} dr.
        GlobalClass::Log {
            constant: radial_constant(p.dim) / (p.tau * p.tau * p.kappa.powf(2.0 * p.alpha)),
        }
    } else if p.beta < d / 2.0 {
        GlobalClass::Bounded
    } else {
        // At low frequencies (κ² + r²)^{−α} ≈ κ^{−2α}: the pure power law.
        GlobalClass::Power {
            constant: 1.0
                / (fractional_constant(p) * p.tau * p.tau * p.kappa.powf(2.0 * p.alpha)),
            exponent: 2.0 * p.beta - d,
        }
    };
    Ok(AsymptoticRegime {
        local_exponent,
        global,
    })
}
