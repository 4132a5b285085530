//! Variogram error of the discretization under uniform mesh refinement.

use crate::igmrf::{IgmrfError, IntrinsicGmrf, ModelParams, Orders};
use crate::mesh::{Mesh, MeshError};
use crate::variogram::{box_series, VariogramError};
use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConvergenceError {
    #[error(transparent)]
    Model(#[from] IgmrfError),

    #[error(transparent)]
    Mesh(#[from] MeshError),

    #[error(transparent)]
    Variogram(#[from] VariogramError),

    #[error("need between 2 and {MAX_LEVELS} levels (got {0})")]
    Levels(usize),

    #[error("need at least 2 nodes per axis on the coarsest mesh (got {0})")]
    BaseNodes(usize),
}

pub const MAX_LEVELS: usize = 6;

/// Evaluation points per axis. With `10·2^l` cells per axis they sit a
/// third of the way into a cell at every level, so the interpolation error
/// scales the same way across the ladder.
const POINTS_PER_AXIS: usize = 10;
const POINT_OFFSET: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceLevel {
    pub delta: f64,
    pub error: f64,
    pub m: usize,
    pub m_tilde: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub levels: Vec<ConvergenceLevel>,
    /// Least-squares slope of log error against log δ.
    pub slope: f64,
}

fn evaluation_points(dim: usize, side: f64) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..POINTS_PER_AXIS)
        .map(|i| (i as f64 + POINT_OFFSET) * side / POINTS_PER_AXIS as f64)
        .collect();
    match dim {
        1 => axis.iter().map(|&x| vec![x]).collect(),
        _ => axis
            .iter()
            .flat_map(|&y| axis.iter().map(move |&x| vec![x, y]))
            .collect(),
    }
}

/// Root-mean-square variogram error over all pairs of evaluation points on
/// `[0, side]^d`, against the Neumann eigen-series of the same box. Level `l`
/// has `(base_nodes − 1)·2^l + 1` nodes per axis. The nugget is ignored.
pub fn variogram_convergence(
    params: &ModelParams,
    side: f64,
    base_nodes: usize,
    levels: usize,
    orders: Orders,
) -> Result<ConvergenceStudy, ConvergenceError> {
    if !(2..=MAX_LEVELS).contains(&levels) {
        return Err(ConvergenceError::Levels(levels));
    }
    if base_nodes < 2 {
        return Err(ConvergenceError::BaseNodes(base_nodes));
    }
    let params = ModelParams { nugget: 0.0, ..*params };
    let d = params.dim;
    let points = evaluation_points(d, side);
    let k = points.len();
    let mut exact = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..i {
            exact[(i, j)] = box_series(&params, side, None, &points[i], &points[j])?.value;
        }
    }
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        let nodes = (base_nodes - 1) * (1 << level) + 1;
        let mesh = Mesh::build_uniform(d, &vec![(0.0, side); d], &vec![nodes; d])?;
        let model = IntrinsicGmrf::build(&mesh, params, orders)?;
        let approx = model.fem_variogram(&model.projection(&points)?)?;
        let mut sum = 0.0;
        for i in 0..k {
            for j in 0..i {
                sum += (approx[(i, j)] - exact[(i, j)]).powi(2);
            }
        }
        let (m, m_tilde) = model.orders();
        out.push(ConvergenceLevel {
            delta: side / (nodes - 1) as f64,
            error: (sum / (k * (k - 1) / 2) as f64).sqrt(),
            m,
            m_tilde,
        });
    }
    let slope = log_log_slope(&out);
    Ok(ConvergenceStudy { levels: out, slope })
}

fn log_log_slope(levels: &[ConvergenceLevel]) -> f64 {
    let n = levels.len() as f64;
    let xs: Vec<f64> = levels.iter().map(|l| l.delta.ln()).collect();
    let ys: Vec<f64> = levels.iter().map(|l| l.error.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let levels: Vec<ConvergenceLevel> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&d: &f64| ConvergenceLevel { delta: d, error: 3.0 * d.powf(1.7), m: 0, m_tilde: 0 })
            .collect();
        assert!((log_log_slope(&levels) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn points_avoid_nodes() {
        for cells in [10.0, 20.0, 40.0, 80.0, 160.0, 320.0] {
            for p in evaluation_points(1, 10.0) {
                let scaled = p[0] / 10.0 * cells;
                assert!(((scaled - scaled.round()).abs() - 1.0 / 3.0).abs() < 1e-9);
            }
        }
        assert_eq!(evaluation_points(2, 1.0).len(), POINTS_PER_AXIS * POINTS_PER_AXIS);
    }

    #[test]
    fn integer_model_converges() {
        let p = ModelParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 1).unwrap();
        let study = variogram_convergence(&p, 10.0, 11, 3, Orders::Auto).unwrap();
        let errs: Vec<f64> = study.levels.iter().map(|l| l.error).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(study.slope > 1.0, "{}", study.slope);
    }

    #[test]
    fn rejects_bad_ladders() {
        let p = ModelParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 1).unwrap();
        assert!(matches!(variogram_convergence(&p, 1.0, 5, 7, Orders::Auto), Err(ConvergenceError::Levels(7))));
        assert!(matches!(variogram_convergence(&p, 1.0, 1, 3, Orders::Auto), Err(ConvergenceError::BaseNodes(1))));
    }
}
