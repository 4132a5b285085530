//! Simplicial meshes: uniform interval meshes and structured triangulations,
//! a plain-text import/export format, refinement and point location.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("unsupported dimension {0} (expected 1 or 2)")]
    Dimension(usize),

    #[error("invalid extent [{lo}, {hi}] on axis {axis}")]
    InvalidExtent { axis: usize, lo: f64, hi: f64 },

    #[error("resolution must be at least 2 nodes per axis, got {0}")]
    InvalidResolution(usize),

    #[error("simplex {0} is degenerate")]
    Degenerate(usize),

    #[error("simplex {simplex} references vertex {vertex} (only {n} vertices)")]
    BadIndex {
        simplex: usize,
        vertex: usize,
        n: usize,
    },

    #[error("vertex {0} belongs to no simplex")]
    UnusedVertex(usize),

    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonConforming(usize, usize),

    #[error("point {0:?} lies outside the mesh")]
    OutOfDomain(Vec<f64>),

    #[error("mesh file line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A conforming simplicial mesh in one or two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    coords: Vec<f64>,
    simplices: Vec<usize>,
    boundary: Vec<bool>,
}

/// Mesh width and shape regularity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    /// Largest simplex diameter.
    pub width: f64,
    /// Smallest ratio of inscribed radius to diameter.
    pub shape_ratio: f64,
}

impl Mesh {
    /// Validates and builds a mesh from flat coordinates (`dim` per vertex)
    /// and flat 0-based simplex tuples (`dim + 1` per simplex).
    pub fn new(dim: usize, coords: Vec<f64>, simplices: Vec<usize>) -> Result<Self, MeshError> {
        if dim != 1 && dim != 2 {
            return Err(MeshError::Dimension(dim));
        }
        let n = coords.len() / dim;
        let stride = dim + 1;
        let mut used = vec![false; n];
        for (t, s) in simplices.chunks(stride).enumerate() {
            for &v in s {
                if v >= n {
                    return Err(MeshError::BadIndex {
                        simplex: t,
                        vertex: v,
                        n,
                    });
                }
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(MeshError::UnusedVertex(v));
        }
        let mut mesh = Self {
            dim,
            coords,
            simplices,
            boundary: vec![false; n],
        };
        for t in 0..mesh.n_simplices() {
            if mesh.volume(t) <= 1e-14 * mesh.diameter(t).powi(dim as i32) {
                return Err(MeshError::Degenerate(t));
            }
        }
        mesh.mark_boundary()?;
        Ok(mesh)
    }

    /// Uniform mesh of a box. `extents` holds `(lo, hi)` per axis and
    /// `resolution` the node count per axis. In two dimensions every cell is
    /// split along its lower-left to upper-right diagonal.
    pub fn build_uniform(
        dim: usize,
        extents: &[(f64, f64)],
        resolution: &[usize],
    ) -> Result<Self, MeshError> {
        if dim != 1 && dim != 2 {
            return Err(MeshError::Dimension(dim));
        }
        if extents.len() != dim || resolution.len() != dim {
            return Err(MeshError::Dimension(extents.len()));
        }
        for (axis, &(lo, hi)) in extents.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(MeshError::InvalidExtent { axis, lo, hi });
            }
        }
        if let Some(&r) = resolution.iter().find(|&&r| r < 2) {
            return Err(MeshError::InvalidResolution(r));
        }
        let axis = |a: usize, i: usize| {
            let (lo, hi) = extents[a];
            let r = resolution[a] - 1;
            if i == r {
                hi
            } else {
                lo + (hi - lo) * i as f64 / r as f64
            }
        };
        if dim == 1 {
            let nx = resolution[0];
            let coords = (0..nx).map(|i| axis(0, i)).collect();
            let simplices = (1..nx).flat_map(|i| [i - 1, i]).collect();
            return Self::new(1, coords, simplices);
        }
        let (nx, ny) = (resolution[0], resolution[1]);
        let mut coords = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                coords.push(axis(0, i));
                coords.push(axis(1, j));
            }
        }
        let id = |i: usize, j: usize| i + nx * j;
        let mut simplices = Vec::with_capacity(6 * (nx - 1) * (ny - 1));
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                simplices.extend_from_slice(&[a, b, c, a, c, d]);
            }
        }
        Self::new(2, coords, simplices)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn n_simplices(&self) -> usize {
        self.simplices.len() / (self.dim + 1)
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn simplex(&self, t: usize) -> &[usize] {
        let s = self.dim + 1;
        &self.simplices[t * s..(t + 1) * s]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    /// Axis-aligned bounding box as `(lo, hi)` per axis.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|a| {
                let it = (0..self.n_vertices()).map(|i| self.vertex(i)[a]);
                let lo = it.clone().fold(f64::INFINITY, f64::min);
                let hi = it.fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            })
            .collect()
    }

    /// Diameter of the bounding box.
    pub fn domain_diameter(&self) -> f64 {
        self.bounding_box()
            .iter()
            .map(|(lo, hi)| (hi - lo).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Length (d = 1) or area (d = 2) of simplex `t`.
    pub fn volume(&self, t: usize) -> f64 {
        let s = self.simplex(t);
        match self.dim {
            1 => (self.vertex(s[1])[0] - self.vertex(s[0])[0]).abs(),
            _ => {
                let (a, b, c) = (self.vertex(s[0]), self.vertex(s[1]), self.vertex(s[2]));
                0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
            }
        }
    }

    /// Longest edge of simplex `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        let s = self.simplex(t);
        let mut m = 0.0f64;
        for a in 0..s.len() {
            for b in a + 1..s.len() {
                m = m.max(dist(self.vertex(s[a]), self.vertex(s[b])));
            }
        }
        m
    }

    fn inradius(&self, t: usize) -> f64 {
        match self.dim {
            1 => 0.5 * self.volume(t),
            _ => {
                let s = self.simplex(t);
                let per = dist(self.vertex(s[0]), self.vertex(s[1]))
                    + dist(self.vertex(s[1]), self.vertex(s[2]))
                    + dist(self.vertex(s[2]), self.vertex(s[0]));
                2.0 * self.volume(t) / per
            }
        }
    }

    pub fn quality(&self) -> Result<MeshQuality, MeshError> {
        let mut width = 0.0f64;
        let mut ratio = f64::INFINITY;
        for t in 0..self.n_simplices() {
            let d = self.diameter(t);
            if self.volume(t) <= 0.0 || d <= 0.0 {
                return Err(MeshError::Degenerate(t));
            }
            width = width.max(d);
            ratio = ratio.min(self.inradius(t) / d);
        }
        Ok(MeshQuality {
            width,
            shape_ratio: ratio,
        })
    }

    /// Uniform refinement by midpoint subdivision: segments split in two,
    /// triangles in four.
    pub fn refine(&self) -> Self {
        let mut coords = self.coords.clone();
        let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, coords: &mut Vec<f64>| -> usize {
            let key = (a.min(b), a.max(b));
            *mids.entry(key).or_insert_with(|| {
                let idx = coords.len() / self.dim;
                for k in 0..self.dim {
                    coords.push(
                        0.5 * (self.coords[a * self.dim + k] + self.coords[b * self.dim + k]),
                    );
                }
                idx
            })
        };
        let mut simplices = Vec::with_capacity(self.simplices.len() * 4);
        for t in 0..self.n_simplices() {
            let s = self.simplex(t).to_vec();
            if self.dim == 1 {
                let m = midpoint(s[0], s[1], &mut coords);
                simplices.extend_from_slice(&[s[0], m, m, s[1]]);
            } else {
                let (a, b, c) = (s[0], s[1], s[2]);
                let ab = midpoint(a, b, &mut coords);
                let bc = midpoint(b, c, &mut coords);
                let ca = midpoint(c, a, &mut coords);
                simplices.extend_from_slice(&[a, ab, ca, ab, b, bc, ca, bc, c, ab, bc, ca]);
            }
        }
        Self::new(self.dim, coords, simplices).expect("refinement of a valid mesh is valid")
    }

    /// Barycentric coordinates of `p` with respect to simplex `t`.
    pub fn barycentric(&self, t: usize, p: &[f64]) -> Vec<f64> {
        let s = self.simplex(t);
        match self.dim {
            1 => {
                let (x0, x1) = (self.vertex(s[0])[0], self.vertex(s[1])[0]);
                let w1 = (p[0] - x0) / (x1 - x0);
                vec![1.0 - w1, w1]
            }
            _ => {
                let (a, b, c) = (self.vertex(s[0]), self.vertex(s[1]), self.vertex(s[2]));
                let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
                let w1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
                let w2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
                vec![1.0 - w1 - w2, w1, w2]
            }
        }
    }

    /// Finds the lowest-index simplex containing `p` and its barycentric
    /// weights (clamped to be nonnegative and renormalized).
    pub fn locate(&self, p: &[f64]) -> Result<(usize, Vec<f64>), MeshError> {
        if p.len() != self.dim {
            return Err(MeshError::OutOfDomain(p.to_vec()));
        }
        let tol = 1e-12;
        for t in 0..self.n_simplices() {
            let w = self.barycentric(t, p);
            if w.iter().all(|&x| x >= -tol) {
                let mut w: Vec<f64> = w.into_iter().map(|x| x.max(0.0)).collect();
                let s: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= s);
                return Ok((t, w));
            }
        }
        Err(MeshError::OutOfDomain(p.to_vec()))
    }

    /// Sorted vertex adjacency (pairs `i < j` sharing a simplex edge).
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for t in 0..self.n_simplices() {
            let s = self.simplex(t);
            for a in 0..s.len() {
                for b in a + 1..s.len() {
                    e.push((s[a].min(s[b]), s[a].max(s[b])));
                }
            }
        }
        e.sort_unstable();
        e.dedup();
        e
    }

    fn mark_boundary(&mut self) -> Result<(), MeshError> {
        let mut count: HashMap<Vec<usize>, usize> = HashMap::new();
        for t in 0..self.n_simplices() {
            let s = self.simplex(t).to_vec();
            for skip in 0..s.len() {
                let mut face: Vec<usize> = s
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != skip)
                    .map(|(_, &v)| v)
                    .collect();
                face.sort_unstable();
                *count.entry(face).or_insert(0) += 1;
            }
        }
        for (face, c) in count {
            if c > 2 {
                return Err(MeshError::NonConforming(face[0], *face.last().unwrap()));
            }
            if c == 1 {
                for v in face {
                    self.boundary[v] = true;
                }
            }
        }
        Ok(())
    }

    /// Writes the text format: `dim d`, `vertices N` + coordinates,
    /// `simplices M` + 1-based tuples.
    pub fn write<W: Write>(&self, mut out: W) -> Result<(), MeshError> {
        writeln!(out, "dim {}", self.dim)?;
        writeln!(out, "vertices {}", self.n_vertices())?;
        for i in 0..self.n_vertices() {
            let line: Vec<String> = self.vertex(i).iter().map(|x| format!("{x:.17e}")).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        writeln!(out, "simplices {}", self.n_simplices())?;
        for t in 0..self.n_simplices() {
            let line: Vec<String> = self
                .simplex(t)
                .iter()
                .map(|v| (v + 1).to_string())
                .collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self, MeshError> {
        let mut lines = input.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('#') => None,
            Ok(s) => Some(Ok((i + 1, s))),
            Err(e) => Some(Err(e)),
        });
        let mut next = |what: &str| -> Result<(usize, String), MeshError> {
            match lines.next() {
                Some(Ok(x)) => Ok(x),
                Some(Err(e)) => Err(e.into()),
                None => Err(MeshError::Parse {
                    line: 0,
                    msg: format!("unexpected end of file, expected {what}"),
                }),
            }
        };
        let header = |line: usize, s: &str, key: &str| -> Result<usize, MeshError> {
            let mut it = s.split_whitespace();
            match (it.next(), it.next(), it.next()) {
                (Some(k), Some(v), None) if k == key => v.parse().map_err(|_| MeshError::Parse {
                    line,
                    msg: format!("bad count in '{s}'"),
                }),
                _ => Err(MeshError::Parse {
                    line,
                    msg: format!("expected '{key} <n>', got '{s}'"),
                }),
            }
        };
        let (l, s) = next("dim")?;
        let dim = header(l, &s, "dim")?;
        if dim != 1 && dim != 2 {
            return Err(MeshError::Dimension(dim));
        }
        let (l, s) = next("vertices")?;
        let nv = header(l, &s, "vertices")?;
        let mut coords = Vec::with_capacity(nv * dim);
        for _ in 0..nv {
            let (l, s) = next("vertex coordinates")?;
            let vals: Result<Vec<f64>, _> = s.split_whitespace().map(str::parse::<f64>).collect();
            let vals = vals.map_err(|_| MeshError::Parse {
                line: l,
                msg: format!("bad coordinates '{s}'"),
            })?;
            if vals.len() != dim {
                return Err(MeshError::Parse {
                    line: l,
                    msg: format!("expected {dim} coordinates"),
                });
            }
            coords.extend(vals);
        }
        let (l, s) = next("simplices")?;
        let ns = header(l, &s, "simplices")?;
        let mut simplices = Vec::with_capacity(ns * (dim + 1));
        for _ in 0..ns {
            let (l, s) = next("simplex")?;
            let vals: Result<Vec<usize>, _> =
                s.split_whitespace().map(str::parse::<usize>).collect();
            let vals = vals.map_err(|_| MeshError::Parse {
                line: l,
                msg: format!("bad simplex '{s}'"),
            })?;
            if vals.len() != dim + 1 || vals.contains(&0) {
                return Err(MeshError::Parse {
                    line: l,
                    msg: format!("expected {} 1-based indices", dim + 1),
                });
            }
            simplices.extend(vals.into_iter().map(|v| v - 1));
        }
        Self::new(dim, coords, simplices)
    }

    /// Vertex coordinates as CSV with header.
    pub fn write_vertices_csv<W: Write>(&self, mut out: W) -> Result<(), MeshError> {
        let head: Vec<String> = (1..=self.dim).map(|a| format!("s{a}")).collect();
        writeln!(out, "index,{},boundary", head.join(","))?;
        for i in 0..self.n_vertices() {
            let c: Vec<String> = self.vertex(i).iter().map(|x| x.to_string()).collect();
            writeln!(out, "{},{},{}", i, c.join(","), u8::from(self.boundary[i]))?;
        }
        Ok(())
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}
