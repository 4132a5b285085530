//! Shared scenarios for the integration and acceptance targets.
#![allow(dead_code)]

use intrinsic_matern::igmrf::ModelParams;
use intrinsic_matern::kriging::{asymptotic_mean, VariogramKriging};
use intrinsic_matern::variogram::stationary;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Ten noisy observations of a rising trend on `[0, 10]`, kriged on the line
/// under five stationary variograms rescaled so that `γ(3) = 5`.
pub struct ToyExtrapolation {
    pub sites: Vec<f64>,
    pub values: Vec<f64>,
}

/// `(α, β)` of the five toy models: two proper, one with linear growth and
/// two growing faster than linearly (`b = 1.5` and `b = 1.9`).
pub const TOY_MODELS: [(f64, f64); 5] = [(1.0, 0.0), (2.0, 0.0), (1.0, 1.0), (1.0, 1.25), (1.0, 1.45)];
pub const TOY_KAPPA: f64 = 0.5;
/// Observation noise variance; the nugget on the variogram is twice this.
pub const TOY_NOISE: f64 = 1.0;

pub struct ToyFit {
    pub params: ModelParams,
    pub asymptotic_mean: f64,
    pub kriging: VariogramKriging,
}

impl ToyExtrapolation {
    pub fn new() -> Self {
        Self::with_seed(3)
    }

    pub fn with_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, TOY_NOISE.sqrt()).unwrap();
        let sites: Vec<f64> = (0..10).map(|i| 0.5 + i as f64).collect();
        let values = sites
            .iter()
            .map(|s| 2.5 + 0.15 * (s - 5.0) + noise.sample(&mut rng))
            .collect();
        ToyExtrapolation { sites, values }
    }

    pub fn fit(&self, alpha: f64, beta: f64) -> ToyFit {
        let base = ModelParams::new(1.0, TOY_KAPPA, alpha, beta, 0.0, 1).unwrap();
        let tau = (stationary(&base, 3.0).unwrap() / 5.0).sqrt();
        let params = ModelParams { tau, ..base };
        let k = self.sites.len();
        let mut gamma = nalgebra::DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..i {
                let g = stationary(&params, (self.sites[i] - self.sites[j]).abs()).unwrap()
                    + 2.0 * TOY_NOISE;
                gamma[(i, j)] = g;
                gamma[(j, i)] = g;
            }
        }
        ToyFit {
            params,
            asymptotic_mean: asymptotic_mean(&gamma, &self.values).unwrap(),
            kriging: VariogramKriging::new(&gamma).unwrap(),
        }
    }

    /// `û(s) − û̄` for the latent field at `s`.
    pub fn offset(&self, fit: &ToyFit, s: f64) -> f64 {
        let target: Vec<f64> = self
            .sites
            .iter()
            .map(|t| stationary(&fit.params, (s - t).abs()).unwrap() + TOY_NOISE)
            .collect();
        fit.kriging.predict(&target, &self.values).unwrap().prediction - fit.asymptotic_mean
    }
}

/// Pairs of distinct vertices joined by a path of at most two mesh edges.
pub fn two_ring(mesh: &intrinsic_matern::mesh::Mesh) -> Vec<(usize, usize)> {
    let n = mesh.n_vertices();
    let mut adj = vec![vec![]; n];
    for (i, j) in mesh.edges() {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut out = Vec::new();
    for i in 0..n {
        let mut near: Vec<usize> = adj[i].clone();
        for &j in &adj[i] {
            near.extend(&adj[j]);
        }
        out.extend(near.into_iter().filter(|&j| j > i).map(|j| (i, j)));
    }
    out.sort_unstable();
    out.dedup();
    out
}
