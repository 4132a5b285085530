use super::{SparseError, SparseSymMatrix};
use std::io::{BufRead, Write};

/// Writes the lower triangle in Matrix Market coordinate format
/// (`real symmetric`, 1-based indices).
pub fn write_matrix_market<W: Write>(a: &SparseSymMatrix, mut out: W) -> Result<(), SparseError> {
    writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(out, "{} {} {}", a.n(), a.n(), a.nnz())?;
    for (i, j, v) in a.iter() {
        writeln!(out, "{} {} {:.17e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

pub fn read_matrix_market<R: BufRead>(input: R) -> Result<SparseSymMatrix, SparseError> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| SparseError::Parse("empty input".into()))??;
    let lower = header.to_ascii_lowercase();
    if !lower.starts_with("%%matrixmarket matrix coordinate real symmetric") {
        return Err(SparseError::Parse(format!("unsupported header: {header}")));
    }
    let mut size: Option<(usize, usize)> = None;
    let mut trips = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(SparseError::Parse(format!("bad size line: {t}")));
                }
                let n: usize = fields[0]
                    .parse()
                    .map_err(|_| SparseError::Parse(t.into()))?;
                let m: usize = fields[1]
                    .parse()
                    .map_err(|_| SparseError::Parse(t.into()))?;
                let nnz: usize = fields[2]
                    .parse()
                    .map_err(|_| SparseError::Parse(t.into()))?;
                if n != m {
                    return Err(SparseError::Parse("matrix is not square".into()));
                }
                size = Some((n, nnz));
            }
            Some(_) => {
                if fields.len() != 3 {
                    return Err(SparseError::Parse(format!("bad entry line: {t}")));
                }
                let i: usize = fields[0]
                    .parse()
                    .map_err(|_| SparseError::Parse(t.into()))?;
                let j: usize = fields[1]
                    .parse()
                    .map_err(|_| SparseError::Parse(t.into()))?;
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|_| SparseError::Parse(t.into()))?;
                if i == 0 || j == 0 {
                    return Err(SparseError::Parse("indices are 1-based".into()));
                }
                trips.push((i - 1, j - 1, v));
            }
        }
    }
    let (n, nnz) = size.ok_or_else(|| SparseError::Parse("missing size line".into()))?;
    if trips.len() != nnz {
        return Err(SparseError::Parse(format!(
            "expected {nnz} entries, found {}",
            trips.len()
        )));
    }
    SparseSymMatrix::from_triplets(n, trips)
}
