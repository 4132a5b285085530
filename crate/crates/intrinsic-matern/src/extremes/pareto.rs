//! r-Pareto densities and the sparse surrogate likelihood of FEM models.

use super::{ExtremesError, HuslerReiss};
use crate::igmrf::{IntrinsicGmrf, ModelParams};
use crate::inference::{contrast_loglik, maximize, FitMask, FitOptions, FitReport, ObservationSet};
use crate::mesh::Mesh;
use crate::sparse_core::{factor_ldl, CsrMatrix, NullSpace};

/// Risk functionals whose Pareto normalizing constant does not depend on
/// the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskFunctional {
    Site(usize),
    LogSumExp,
}

impl RiskFunctional {
    pub fn eval(&self, y: &[f64]) -> f64 {
        match *self {
            RiskFunctional::Site(i) => y[i],
            RiskFunctional::LogSumExp => {
                let top = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                top + y.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
            }
        }
    }

    /// Exponent measure of `{r > 0}`. Gumbel margins give `Λ{y_i > 0} = 1`;
    /// for log-sum-exp, `Λ{r > 0} = Σ_i E e^{V_i} = k`.
    pub fn normalizing_constant(&self, k: usize) -> f64 {
        match self {
            RiskFunctional::Site(_) => 1.0,
            RiskFunctional::LogSumExp => k as f64,
        }
    }
}

/// `log λ(y) − log C_r` on `{r(y) > 0}`.
pub fn pareto_density(model: &HuslerReiss, y: &[f64], risk: RiskFunctional) -> Result<f64, ExtremesError> {
    if y.len() != model.k() {
        return Err(ExtremesError::Length { expected: model.k(), got: y.len() });
    }
    if let RiskFunctional::Site(i) = risk {
        model.check_index(i)?;
    }
    let r = risk.eval(y);
    if !(r > 0.0) {
        return Err(ExtremesError::Support(r));
    }
    Ok(model.log_exponent_density(y)? - risk.normalizing_constant(model.k()).ln())
}

/// Threshold exceedances on the Gumbel scale, one row per event.
#[derive(Debug, Clone)]
pub struct ExceedanceData {
    pub sites: Vec<Vec<f64>>,
    pub rows: Vec<Vec<f64>>,
}

/// The single nonzero of a projection row, if it has weight one.
fn node_of(a: &CsrMatrix, i: usize) -> Option<usize> {
    let mut it = a.row(i);
    match (it.next(), it.next()) {
        (Some((j, w)), None) if (w - 1.0).abs() < 1e-12 => Some(j),
        _ => None,
    }
}

/// Column `j0` of the variogram of `A W + ε`, nugget included.
///
/// With a single intrinsic block and every site on a node, the column is the
/// diagonal of the inverse of the precision pinned at the node of `j0`.
/// Otherwise each entry costs one solve per block.
pub fn fem_variogram_column(model: &IntrinsicGmrf, a: &CsrMatrix, j0: usize) -> Result<Vec<f64>, ExtremesError> {
    let k = a.nrows;
    if j0 >= k {
        return Err(ExtremesError::Index { index: j0, k });
    }
    let nugget = model.params().nugget;
    let nodes: Option<Vec<usize>> = (0..k).map(|i| node_of(a, i)).collect();
    let mut col = vec![0.0; k];
    match nodes {
        Some(nodes) if model.n_blocks() == 1 && model.has_intrinsic_blocks() => {
            let anchor = nodes[j0];
            let pinned = model.blocks()[0].precision.remove_index(anchor);
            let mut diag = factor_ldl(&pinned, NullSpace::None)?.inverse_diagonal_takahashi()?;
            diag.insert(anchor, 0.0);
            for (i, &node) in nodes.iter().enumerate() {
                col[i] = diag[node];
            }
        }
        _ => {
            let base = a.row_dense(j0);
            let diffs: Vec<Vec<f64>> = (0..k)
                .map(|i| a.row_dense(i).iter().zip(&base).map(|(x, y)| x - y).collect())
                .collect();
            for f in model.factor_blocks()? {
                for (i, d) in diffs.iter().enumerate() {
                    if i != j0 {
                        let x = f.pseudo_solve(d)?;
                        col[i] += d.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>();
                    }
                }
            }
        }
    }
    for (i, c) in col.iter_mut().enumerate() {
        if i != j0 {
            *c += nugget;
        }
    }
    Ok(col)
}

/// `Σ_i [log f(y_i + Γ_{·,j0}/2) − y_{i,j0}]` with `f` the intrinsic Gaussian
/// density of the model at the sites. The subtracted term is free of the
/// parameters and makes the value independent of `j0`: it equals
/// `Σ log λ(y_i) + (n/2) log k`.
pub fn surrogate_loglik(
    model: &IntrinsicGmrf,
    sites: &[Vec<f64>],
    rows: &[Vec<f64>],
    j0: usize,
) -> Result<f64, ExtremesError> {
    let k = sites.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != k) {
        return Err(ExtremesError::Length { expected: k, got: bad.len() });
    }
    let obs = ObservationSet::new(sites.to_vec(), vec![0.0; k])?;
    let a = model.projection(sites)?;
    let col = fem_variogram_column(model, &a, j0)?;
    let shifted: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&col).map(|(y, g)| y + 0.5 * g).collect())
        .collect();
    let batch: Vec<&[f64]> = shifted.iter().map(Vec::as_slice).collect();
    let anchor_sum: f64 = rows.iter().map(|r| r[j0]).sum();
    Ok(contrast_loglik(model, &obs, &batch)?.iter().sum::<f64>() - anchor_sum)
}

/// Maximizes the surrogate likelihood over the free parameters.
pub fn fit_pareto(
    mesh: &Mesh,
    data: &ExceedanceData,
    j0: usize,
    init: ModelParams,
    mask: FitMask,
    options: &FitOptions,
) -> Result<FitReport, ExtremesError> {
    let k = data.sites.len();
    if k < 2 {
        return Err(ExtremesError::TooFewSites(k));
    }
    if j0 >= k {
        return Err(ExtremesError::Index { index: j0, k });
    }
    if data.rows.is_empty() {
        return Err(ExtremesError::TooFewRows { min: 1, got: 0 });
    }
    Ok(maximize(mesh, init, mask, options, &|model| {
        surrogate_loglik(model, &data.sites, &data.rows, j0).ok()
    })?)
}
