//! Simulation of Pareto and max-stable processes, and extremal correlation.

use super::{fem_variogram_column, ExtremesError, HuslerReiss};
use crate::igmrf::{IntrinsicGmrf, Sampler};
use crate::sparse_core::{factor_ldl, CsrMatrix, Factorization, NullSpace};
use crate::special::norm_cdf;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Exp1, StandardNormal};

/// Generator for row `i` of a simulation with master seed `seed`.
fn row_rng(seed: u64, row: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(row as u64);
    rng
}

/// `χ = 2Φ(−√γ/2)`, the extremal correlation at variogram value `γ`.
pub fn chi(gamma: f64) -> f64 {
    2.0 * norm_cdf(-gamma.max(0.0).sqrt() / 2.0)
}

/// Draws `E + V` with `V = X − X_{anchor} − Γ_{·,anchor}/2`, where `X` is the
/// field plus nugget noise at the sites and `E` is standard exponential.
#[derive(Debug, Clone)]
pub struct ParetoSampler {
    sampler: Sampler,
    projection: CsrMatrix,
    column: Vec<f64>,
    anchor: usize,
    noise_sd: f64,
}

impl ParetoSampler {
    pub fn new(model: &IntrinsicGmrf, sites: &[Vec<f64>], anchor: usize) -> Result<Self, ExtremesError> {
        let projection = model.projection(sites)?;
        let column = fem_variogram_column(model, &projection, anchor)?;
        Ok(ParetoSampler {
            sampler: model.sampler()?,
            projection,
            column,
            anchor,
            noise_sd: (model.params().nugget / 2.0).sqrt(),
        })
    }

    /// Variogram column at the anchor, nugget included.
    pub fn column(&self) -> &[f64] {
        &self.column
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>, ExtremesError> {
        let field = self.sampler.draw(rng)?;
        let mut x = self.projection.mul_vec(&field);
        if self.noise_sd > 0.0 {
            for v in &mut x {
                *v += self.noise_sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let e: f64 = rng.sample(Exp1);
        let base = x[self.anchor];
        Ok(x.iter()
            .zip(&self.column)
            .enumerate()
            .map(|(i, (v, g))| if i == self.anchor { e } else { e + v - base - 0.5 * g })
            .collect())
    }
}

/// `n` Pareto rows for the single-site risk at `anchor`.
pub fn simulate_pareto(
    model: &IntrinsicGmrf,
    sites: &[Vec<f64>],
    anchor: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, ExtremesError> {
    let sampler = ParetoSampler::new(model, sites, anchor)?;
    (0..n).map(|i| sampler.draw(&mut row_rng(seed, i))).collect()
}

/// Draws from the Gaussian conditional law of the unobserved sites.
pub fn conditional_simulate(
    model: &HuslerReiss,
    observed: &[usize],
    values: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, ExtremesError> {
    let law = model.conditional_law(observed, values)?;
    let u = law.unobserved.len();
    (0..n)
        .map(|i| {
            let mut rng = row_rng(seed, i);
            let z: Vec<f64> = (0..u).map(|_| rng.sample(StandardNormal)).collect();
            let x = law.factor().sample_from_normals(&z)?;
            Ok(x.iter().zip(&law.mean).map(|(a, m)| a + m).collect())
        })
        .collect()
}

/// Gaussian vectors with variogram `Γ`, pinned to zero at the last site.
struct PinnedGaussian {
    factor: Factorization,
}

impl PinnedGaussian {
    fn new(model: &HuslerReiss) -> Result<Self, ExtremesError> {
        let pinned = model.precision().remove_index(model.k() - 1);
        Ok(PinnedGaussian { factor: factor_ldl(&pinned, NullSpace::None)? })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>, ExtremesError> {
        let z: Vec<f64> = (0..self.factor.n()).map(|_| rng.sample(StandardNormal)).collect();
        let mut w = self.factor.sample_from_normals(&z)?;
        w.push(0.0);
        Ok(w)
    }
}

/// Max-stable Brown–Resnick rows with standard Gumbel margins.
///
/// Exact sampler: spectral functions are normalized to sum to `k` with a
/// uniformly chosen anchor, so the Poisson series can stop as soon as the
/// current arrival times `k` falls below the running minimum.
pub fn simulate_max_stable(model: &HuslerReiss, n: usize, seed: u64) -> Result<Vec<Vec<f64>>, ExtremesError> {
    let k = model.k();
    let gamma = model.variogram()?;
    let gaussian = PinnedGaussian::new(model)?;
    let kf = k as f64;
    (0..n)
        .map(|row| {
            let mut rng = row_rng(seed, row);
            let mut z = vec![0.0f64; k];
            let mut arrival = 0.0;
            loop {
                arrival += rng.sample::<f64, _>(Exp1);
                let zeta = 1.0 / arrival;
                let floor = z.iter().cloned().fold(f64::INFINITY, f64::min);
                if zeta * kf <= floor {
                    break;
                }
                let anchor = rng.random_range(0..k);
                let w = gaussian.draw(&mut rng)?;
                let v: Vec<f64> = (0..k).map(|i| w[i] - w[anchor] - 0.5 * gamma[(i, anchor)]).collect();
                let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let total: f64 = v.iter().map(|x| (x - top).exp()).sum();
                for (zi, vi) in z.iter_mut().zip(&v) {
                    *zi = zi.max(zeta * kf * (vi - top).exp() / total);
                }
            }
            Ok(z.iter().map(|x| x.ln()).collect())
        })
        .collect()
}

/// Empirical extremal correlation of a pair of columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiEstimate {
    pub value: f64,
    pub joint: usize,
    pub marginal: usize,
    /// Fewer than 10 joint exceedances make the estimate unreliable.
    pub reliable: bool,
}

/// Ranks `1..=n`, ties broken by position.
fn ranks(column: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..column.len()).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
    let mut r = vec![0; column.len()];
    for (pos, &i) in order.iter().enumerate() {
        r[i] = pos + 1;
    }
    r
}

/// Fraction of rank exceedances of `q` at site `i` that also exceed at `j`.
pub fn chi_empirical(rows: &[Vec<f64>], i: usize, j: usize, q: f64) -> Result<ChiEstimate, ExtremesError> {
    let n = rows.len();
    if n < 50 {
        return Err(ExtremesError::TooFewRows { min: 50, got: n });
    }
    if !(q > 0.8 && q < 1.0) {
        return Err(ExtremesError::Quantile(q));
    }
    let k = rows[0].len();
    for &s in &[i, j] {
        if s >= k {
            return Err(ExtremesError::Index { index: s, k });
        }
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != k) {
        return Err(ExtremesError::Length { expected: k, got: bad.len() });
    }
    let ri = ranks(&rows.iter().map(|r| r[i]).collect::<Vec<_>>());
    let rj = ranks(&rows.iter().map(|r| r[j]).collect::<Vec<_>>());
    let cut = q * n as f64;
    let over = |r: usize| r as f64 > cut;
    let marginal = ri.iter().filter(|&&r| over(r)).count();
    let joint = ri.iter().zip(&rj).filter(|&(&a, &b)| over(a) && over(b)).count();
    Ok(ChiEstimate {
        value: if marginal == 0 { 0.0 } else { joint as f64 / marginal as f64 },
        joint,
        marginal,
        reliable: joint >= 10,
    })
}

/// `χ` between the anchor and `site` from Pareto rows of the single-site
/// risk: the fraction of rows positive at `site`, with its binomial standard
/// error.
pub fn chi_from_pareto(rows: &[Vec<f64>], site: usize) -> (f64, f64) {
    let n = rows.len() as f64;
    let p = rows.iter().filter(|r| r[site] > 0.0).count() as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}
