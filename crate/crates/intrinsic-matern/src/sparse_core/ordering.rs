use super::SparseSymMatrix;
use std::collections::BTreeSet;

/// Minimum-degree ordering on the explicit elimination graph.
///
/// Returns `perm` with `perm[k]` the original index eliminated at step `k`.
/// Ties go to the lowest index so the result is deterministic. Adequate for
/// the mesh sizes this crate targets; the cost grows with the fill.
pub fn minimum_degree(a: &SparseSymMatrix) -> Vec<usize> {
    let n = a.n();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in a.iter() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for nb in adj.iter_mut() {
        nb.sort_unstable();
        nb.dedup();
    }
    minimum_degree_graph(adj, &[])
}

/// Same as [`minimum_degree`] on an adjacency list, with `last` forced to the
/// end of the ordering in the given order.
pub(crate) fn minimum_degree_graph(mut adj: Vec<Vec<usize>>, last: &[usize]) -> Vec<usize> {
    let n = adj.len();
    let mut deferred = vec![false; n];
    for &l in last {
        deferred[l] = true;
    }
    let mut eliminated = vec![false; n];
    let mut queue: BTreeSet<(usize, usize)> = (0..n)
        .filter(|&i| !deferred[i])
        .map(|i| (adj[i].len(), i))
        .collect();
    let mut perm = Vec::with_capacity(n);
    let mut scratch = Vec::new();
    while let Some(&(deg, p)) = queue.iter().next() {
        queue.remove(&(deg, p));
        eliminated[p] = true;
        perm.push(p);
        let nbrs: Vec<usize> = adj[p].iter().copied().filter(|&u| !eliminated[u]).collect();
        for &u in &nbrs {
            let old = adj[u].len();
            // adj[u] ← (adj[u] ∪ nbrs) \ {p, u}, restricted to live nodes.
            scratch.clear();
            let (a, b) = (&adj[u], &nbrs);
            let (mut x, mut y) = (0, 0);
            while x < a.len() || y < b.len() {
                let next = match (a.get(x), b.get(y)) {
                    (Some(&va), Some(&vb)) if va == vb => {
                        x += 1;
                        y += 1;
                        va
                    }
                    (Some(&va), Some(&vb)) if va < vb => {
                        x += 1;
                        va
                    }
                    (Some(_), Some(&vb)) => {
                        y += 1;
                        vb
                    }
                    (Some(&va), None) => {
                        x += 1;
                        va
                    }
                    (None, Some(&vb)) => {
                        y += 1;
                        vb
                    }
                    (None, None) => unreachable!(),
                };
                if next != u && !eliminated[next] {
                    scratch.push(next);
                }
            }
            std::mem::swap(&mut adj[u], &mut scratch);
            if !deferred[u] {
                queue.remove(&(old, u));
                queue.insert((adj[u].len(), u));
            }
        }
        adj[p].clear();
    }
    perm.extend_from_slice(last);
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_is_a_permutation() {
        let n = 12;
        let trips = (0..n)
            .map(|i| (i, i, 4.0))
            .chain((1..n).map(|i| (i, i - 1, -1.0)))
            .chain([(n - 1, 0, -1.0)]);
        let a = SparseSymMatrix::from_triplets(n, trips).unwrap();
        let mut p = minimum_degree(&a);
        p.sort_unstable();
        assert_eq!(p, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn arrow_matrix_hub_is_not_eliminated_early() {
        // Eliminating the hub first would fill everything.
        let n = 6;
        let trips = (0..n)
            .map(|i| (i, i, 10.0))
            .chain((1..n).map(|i| (i, 0, 1.0)));
        let a = SparseSymMatrix::from_triplets(n, trips).unwrap();
        let p = minimum_degree(&a);
        let hub = p.iter().position(|&i| i == 0).unwrap();
        assert!(hub >= n - 2);
    }

    #[test]
    fn deferred_nodes_are_appended() {
        let adj = vec![vec![1], vec![0, 2], vec![1]];
        assert_eq!(minimum_degree_graph(adj, &[1]), vec![0, 2, 1]);
    }
}
