//! Ordinary kriging from variogram matrices and from intrinsic precisions,
//! plus the large-distance behaviour of the predictor.
//!
//! Variogram matrices hold `Var(u(s_i) − u(s_j))`, not semivariograms.

use crate::igmrf::ModelParams;
use crate::variogram::{regimes, GlobalClass, VariogramError};
use nalgebra::{DMatrix, DVector, FullPivLU};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KrigingError {
    #[error("no observations")]
    Empty,

    #[error("expected length {expected}, got {got}")]
    Length { expected: usize, got: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("system is numerically singular")]
    Singular,

    #[error("target diagonal entry of the precision is {0}")]
    ZeroDiagonal(f64),

    #[error("direction must have unit length (got {0})")]
    NotUnit(f64),

    #[error(transparent)]
    Variogram(#[from] VariogramError),
}

/// Above this many observations the dense bordered system is no longer the
/// right tool; predictions should come from the sparse posterior instead.
pub const DENSE_LIMIT: usize = 2000;

/// Relative pivot size below which a dense system counts as singular.
const PIVOT_TOL: f64 = 1e-13;

/// `|c|` below this is reported as no first-order drift.
pub const DRIFT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Kriged {
    pub prediction: f64,
    /// `Var(u(s₀) − û(s₀))`.
    pub variance: f64,
    pub weights: DVector<f64>,
}

fn square(m: &DMatrix<f64>) -> Result<usize, KrigingError> {
    if m.nrows() != m.ncols() {
        return Err(KrigingError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(KrigingError::Empty);
    }
    Ok(m.nrows())
}

fn length(got: usize, expected: usize) -> Result<(), KrigingError> {
    if got != expected {
        return Err(KrigingError::Length { expected, got });
    }
    Ok(())
}

fn checked_lu(m: DMatrix<f64>) -> Result<FullPivLU<f64, nalgebra::Dyn, nalgebra::Dyn>, KrigingError> {
    let lu = m.full_piv_lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) || diag.iter().any(|&d| d <= PIVOT_TOL * max) {
        return Err(KrigingError::Singular);
    }
    Ok(lu)
}

/// Factored Lagrange system `[Γ 1; 1ᵀ 0]`, reusable across targets.
#[derive(Debug, Clone)]
pub struct VariogramKriging {
    k: usize,
    border: DMatrix<f64>,
    lu: FullPivLU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl VariogramKriging {
    pub fn new(gamma: &DMatrix<f64>) -> Result<Self, KrigingError> {
        let k = square(gamma)?;
        let mut border = DMatrix::zeros(k + 1, k + 1);
        border.view_mut((0, 0), (k, k)).copy_from(gamma);
        for i in 0..k {
            border[(i, k)] = 1.0;
            border[(k, i)] = 1.0;
        }
        Ok(VariogramKriging {
            k,
            lu: checked_lu(border.clone())?,
            border,
        })
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    /// `target[i] = Var(u(s₀) − u(s_i))`.
    pub fn predict(&self, target: &[f64], values: &[f64]) -> Result<Kriged, KrigingError> {
        let k = self.k;
        length(target.len(), k)?;
        length(values.len(), k)?;
        let mut rhs = DVector::zeros(k + 1);
        rhs.rows_mut(0, k).copy_from_slice(target);
        rhs[k] = 1.0;
        let mut sol = self.lu.solve(&rhs).ok_or(KrigingError::Singular)?;
        // One refinement step: far targets put entries of very different
        // size in the system, and the unbiasedness row suffers first.
        let residual = &rhs - &self.border * &sol;
        sol += self.lu.solve(&residual).ok_or(KrigingError::Singular)?;
        let weights = sol.rows(0, k).into_owned();
        let lagrange = sol[k];
        let prediction = weights.iter().zip(values).map(|(w, y)| w * y).sum();
        // Semivariogram form λᵀγ₀/2 + m/2 with the multiplier of the full
        // variogram system equal to 2m.
        let variance = 0.5 * (weights.dot(&DVector::from_column_slice(target)) + lagrange);
        Ok(Kriged {
            prediction,
            variance,
            weights,
        })
    }
}

pub fn krige_variogram(
    gamma: &DMatrix<f64>,
    target: &[f64],
    values: &[f64],
) -> Result<Kriged, KrigingError> {
    VariogramKriging::new(gamma)?.predict(target, values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntrinsicPrediction {
    pub prediction: f64,
    /// `1/Θ₀₀`, the conditional variance of the target.
    pub variance: f64,
    pub weights: Vec<f64>,
}

/// Conditional mean of the target (row and column 0 of `theta`) given the
/// remaining coordinates, for a precision with `Θ1 = 0`.
pub fn krige_intrinsic(
    theta: &DMatrix<f64>,
    values: &[f64],
) -> Result<IntrinsicPrediction, KrigingError> {
    let n = square(theta)?;
    length(values.len(), n - 1)?;
    let t00 = theta[(0, 0)];
    let scale = theta.diagonal().amax();
    if !(t00 > PIVOT_TOL * scale) {
        return Err(KrigingError::ZeroDiagonal(t00));
    }
    let weights: Vec<f64> = (1..n).map(|i| -theta[(0, i)] / t00).collect();
    let prediction = weights.iter().zip(values).map(|(w, y)| w * y).sum();
    Ok(IntrinsicPrediction {
        prediction,
        variance: 1.0 / t00,
        weights,
    })
}

/// First-order intrinsic precision with the same variogram as `N(0, Q⁻¹)`:
/// `Θ = Q − Q11ᵀQ/(1ᵀQ1)`.
pub fn proper_to_intrinsic(q: &DMatrix<f64>) -> Result<DMatrix<f64>, KrigingError> {
    square(q)?;
    let q1: DVector<f64> = q.column_sum();
    let total = q1.sum();
    if !(total > 0.0) {
        return Err(KrigingError::Singular);
    }
    Ok(q - &q1 * q1.transpose() / total)
}

/// `Γ⁻¹1` and `Γ⁻¹u`, the two solves shared by the large-distance formulas.
fn solve_pair(
    gamma: &DMatrix<f64>,
    values: &[f64],
) -> Result<(DVector<f64>, DVector<f64>), KrigingError> {
    let k = square(gamma)?;
    length(values.len(), k)?;
    let lu = checked_lu(gamma.clone())?;
    let ones = lu
        .solve(&DVector::from_element(k, 1.0))
        .ok_or(KrigingError::Singular)?;
    let u = lu
        .solve(&DVector::from_column_slice(values))
        .ok_or(KrigingError::Singular)?;
    Ok((ones, u))
}

/// Limit of the conditional mean of the field averaged over a growing ball,
/// `1ᵀΓ⁻¹u / 1ᵀΓ⁻¹1`.
pub fn asymptotic_mean(gamma: &DMatrix<f64>, values: &[f64]) -> Result<f64, KrigingError> {
    let (ones, u) = solve_pair(gamma, values)?;
    let denom = ones.sum();
    if denom == 0.0 {
        return Err(KrigingError::Singular);
    }
    Ok(u.sum() / denom)
}

fn projections(sites: &[Vec<f64>], direction: &[f64]) -> Result<Vec<f64>, KrigingError> {
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(KrigingError::NotUnit(norm));
    }
    sites
        .iter()
        .map(|s| {
            length(s.len(), direction.len())?;
            Ok(s.iter().zip(direction).map(|(a, b)| a * b).sum())
        })
        .collect()
}

/// Leading drift coefficient `c` in `û(Lv) − û̄ ∼ c ℓ(L) L^{b−1}` for
/// `γ(h) = ℓ(h) h^b`:
/// `c = −b pᵀ(I − 11ᵀΓ⁻¹/(1ᵀΓ⁻¹1))ᵀΓ⁻¹u` with `p_i = vᵀs_i`.
///
/// The factor `−b` comes from `‖Lv − s‖^b = L^b − b L^{b−1} vᵀs + …`.
pub fn extrapolation_constant(
    sites: &[Vec<f64>],
    values: &[f64],
    direction: &[f64],
    gamma: &DMatrix<f64>,
    exponent: f64,
) -> Result<f64, KrigingError> {
    let p = projections(sites, direction)?;
    let (ones, u) = solve_pair(gamma, values)?;
    // (I − 11ᵀΓ⁻¹/a)ᵀ Γ⁻¹u = Γ⁻¹u − Γ⁻¹1 (1ᵀΓ⁻¹u)/a
    let a = ones.sum();
    if a == 0.0 {
        return Err(KrigingError::Singular);
    }
    let centered = &u - &ones * (u.sum() / a);
    Ok(-exponent * p.iter().zip(centered.iter()).map(|(x, y)| x * y).sum::<f64>())
}

/// `γ(h) ∼ constant · h^exponent` for large `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub constant: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolationDiagnostic {
    pub asymptotic_mean: f64,
    /// `None` without a power law, or when `|c|` is below [`DRIFT_TOL`] and
    /// the leading order says nothing.
    pub drift: Option<f64>,
    /// `None` for bounded or logarithmic variograms.
    pub law: Option<PowerLaw>,
}

impl ExtrapolationDiagnostic {
    /// Leading-order `û(Lv) − û̄`.
    pub fn offset(&self, distance: f64) -> Option<f64> {
        let law = self.law?;
        Some(self.drift? * law.constant * distance.powf(law.exponent - 1.0))
    }

    /// Leading-order `Var(u(Lv) − û(Lv))`.
    pub fn variance(&self, distance: f64) -> Option<f64> {
        let law = self.law?;
        Some(law.constant * distance.powf(law.exponent))
    }
}

/// Growth law of the stationary variogram of a model on `R^d`.
pub fn power_law(params: &ModelParams) -> Result<Option<PowerLaw>, KrigingError> {
    Ok(match regimes(params)?.global {
        GlobalClass::Power { constant, exponent } if exponent < 2.0 => Some(PowerLaw {
            constant,
            exponent,
        }),
        _ => None,
    })
}

pub fn extrapolation(
    sites: &[Vec<f64>],
    values: &[f64],
    direction: &[f64],
    gamma: &DMatrix<f64>,
    params: &ModelParams,
) -> Result<ExtrapolationDiagnostic, KrigingError> {
    let law = power_law(params)?;
    let drift = match law {
        Some(l) => {
            let c = extrapolation_constant(sites, values, direction, gamma, l.exponent)?;
            (c.abs() >= DRIFT_TOL).then_some(c)
        }
        None => None,
    };
    Ok(ExtrapolationDiagnostic {
        asymptotic_mean: asymptotic_mean(gamma, values)?,
        drift,
        law,
    })
}
