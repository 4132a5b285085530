//! Linear finite elements: lumped mass, stiffness, point projection and the
//! integer-order precision products `Q = G (C⁻¹G)^{β−1} C⁻¹ K (C⁻¹K)^{α−1}`
//! with `K = κ²C + G`.

use crate::mesh::{Mesh, MeshError};
use crate::sparse_core::{CsrMatrix, SparseSymMatrix};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("site {index} lies outside the mesh")]
    SiteOutside { index: usize },

    #[error("site {index} has {got} coordinates, mesh dimension is {dim}")]
    SiteDimension {
        index: usize,
        got: usize,
        dim: usize,
    },

    #[error("invalid exponents: α + β must be at least 1")]
    InvalidExponent,

    #[error("κ must be positive when α > 0 (got {0})")]
    InvalidRange(f64),

    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Lumped mass (diagonal) and stiffness matrices of a mesh.
#[derive(Debug, Clone)]
pub struct FemOperators {
    mass: Vec<f64>,
    stiffness: SparseSymMatrix,
}

impl FemOperators {
    pub fn n(&self) -> usize {
        self.mass.len()
    }

    /// Diagonal of the lumped mass matrix `C`.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass_matrix(&self) -> SparseSymMatrix {
        SparseSymMatrix::from_diagonal(&self.mass)
    }

    pub fn mass_inverse(&self) -> Vec<f64> {
        self.mass.iter().map(|c| 1.0 / c).collect()
    }

    /// Stiffness matrix `G`.
    pub fn stiffness(&self) -> &SparseSymMatrix {
        &self.stiffness
    }

    /// `a·C + G`.
    pub fn shifted(&self, a: f64) -> SparseSymMatrix {
        let c: Vec<f64> = self.mass.iter().map(|c| a * c).collect();
        self.stiffness
            .lincomb(1.0, &SparseSymMatrix::from_diagonal(&c), 1.0)
    }

    /// `F₁ C⁻¹ F₂ C⁻¹ ⋯ Fₙ`, evaluated left to right. An empty list gives `C`.
    pub fn chain(&self, factors: &[SparseSymMatrix]) -> SparseSymMatrix {
        let Some((first, rest)) = factors.split_first() else {
            return self.mass_matrix();
        };
        let cinv = self.mass_inverse();
        rest.iter()
            .fold(first.clone(), |acc, f| acc.product_through_diag(&cinv, f))
    }
}

pub fn assemble(mesh: &Mesh) -> Result<FemOperators, FemError> {
    let n = mesh.n_vertices();
    let mut mass = vec![0.0; n];
    let mut trips = Vec::with_capacity(mesh.n_simplices() * 6);
    for t in 0..mesh.n_simplices() {
        let s = mesh.simplex(t);
        let vol = mesh.volume(t);
        if vol <= 0.0 {
            return Err(MeshError::Degenerate(t).into());
        }
        match mesh.dim() {
            1 => {
                let g = 1.0 / vol;
                mass[s[0]] += 0.5 * vol;
                mass[s[1]] += 0.5 * vol;
                trips.extend_from_slice(&[(s[0], s[0], g), (s[1], s[1], g), (s[1], s[0], -g)]);
            }
            _ => {
                let grads = triangle_gradients(mesh, t);
                for a in 0..3 {
                    mass[s[a]] += vol / 3.0;
                    for b in 0..=a {
                        let v = vol * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                        trips.push((s[a], s[b], v));
                    }
                }
            }
        }
    }
    let stiffness = SparseSymMatrix::from_triplets(n, trips).expect("mesh indices are in range");
    Ok(FemOperators { mass, stiffness })
}

/// Consistent (non-lumped) mass matrix, for comparisons against lumping.
pub fn consistent_mass(mesh: &Mesh) -> SparseSymMatrix {
    let mut trips = Vec::new();
    for t in 0..mesh.n_simplices() {
        let s = mesh.simplex(t);
        let vol = mesh.volume(t);
        let (diag, off) = match mesh.dim() {
            1 => (vol / 3.0, vol / 6.0),
            _ => (vol / 6.0, vol / 12.0),
        };
        for a in 0..s.len() {
            trips.push((s[a], s[a], diag));
            for b in 0..a {
                trips.push((s[a], s[b], off));
            }
        }
    }
    SparseSymMatrix::from_triplets(mesh.n_vertices(), trips).expect("mesh indices are in range")
}

fn triangle_gradients(mesh: &Mesh, t: usize) -> [[f64; 2]; 3] {
    let s = mesh.simplex(t);
    let (a, b, c) = (mesh.vertex(s[0]), mesh.vertex(s[1]), mesh.vertex(s[2]));
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    [
        [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
        [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
        [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
    ]
}

/// Projection `A` with `A_{ij} = φ_j(s_i)`.
pub fn projection(mesh: &Mesh, sites: &[Vec<f64>]) -> Result<CsrMatrix, FemError> {
    let mut trips = Vec::with_capacity(sites.len() * (mesh.dim() + 1));
    for (i, p) in sites.iter().enumerate() {
        if p.len() != mesh.dim() {
            return Err(FemError::SiteDimension {
                index: i,
                got: p.len(),
                dim: mesh.dim(),
            });
        }
        let (t, w) = mesh
            .locate(p)
            .map_err(|_| FemError::SiteOutside { index: i })?;
        for (&v, &wv) in mesh.simplex(t).iter().zip(&w) {
            if wv != 0.0 {
                trips.push((i, v, wv));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(
        sites.len(),
        mesh.n_vertices(),
        trips,
    ))
}

/// Integer-order precision `Q_{κ,α,β}`.
pub fn integer_precision(
    ops: &FemOperators,
    kappa: f64,
    alpha: u32,
    beta: u32,
) -> Result<SparseSymMatrix, FemError> {
    if alpha + beta == 0 {
        return Err(FemError::InvalidExponent);
    }
    if alpha > 0 && !(kappa > 0.0) {
        return Err(FemError::InvalidRange(kappa));
    }
    let mut factors = vec![ops.stiffness().clone(); beta as usize];
    if alpha > 0 {
        let k = ops.shifted(kappa * kappa);
        factors.extend(std::iter::repeat_n(k, alpha as usize));
    }
    Ok(ops.chain(&factors))
}
