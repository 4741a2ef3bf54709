use std::collections::VecDeque;

use super::sparse::CsrMatrix;
use crate::scalar::Real;

/// Symmetrized adjacency lists (no self loops) of a square sparsity pattern.
pub fn adjacency<T: Real>(m: &CsrMatrix<T>) -> Vec<Vec<usize>> {
    let n = m.nrows;
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in m.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

fn bfs_levels(adj: &[Vec<usize>], start: usize, mark: &mut [usize], stamp: usize) -> Vec<Vec<usize>> {
    let mut levels = vec![vec![start]];
    mark[start] = stamp;
    loop {
        let mut next = Vec::new();
        for &u in levels.last().unwrap() {
            for &v in &adj[u] {
                if mark[v] != stamp {
                    mark[v] = stamp;
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            return levels;
        }
        levels.push(next);
    }
}

/// Reverse Cuthill–McKee ordering; `perm[new] = old`. Deterministic.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut mark = vec![usize::MAX; n];
    let mut stamp = 0;
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (adj[i].len(), i));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start node
        let mut start = seed;
        let mut ecc = 0;
        for _ in 0..8 {
            stamp += 1;
            let levels = bfs_levels(adj, start, &mut mark, stamp);
            let last = levels.last().unwrap();
            let cand = *last.iter().min_by_key(|&&v| (adj[v].len(), v)).unwrap();
            if levels.len() <= ecc {
                break;
            }
            ecc = levels.len();
            start = cand;
        }
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nb: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            nb.sort_by_key(|&v| (adj[v].len(), v));
            for v in nb {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// (lower, upper) bandwidth of `m` under the ordering `perm[new] = old`.
pub fn bandwidth<T: Real>(m: &CsrMatrix<T>, perm: &[usize]) -> (usize, usize) {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let (mut kl, mut ku) = (0, 0);
    for i in 0..m.nrows {
        for (j, _) in m.row(i) {
            let (a, b) = (inv[i], inv[j]);
            if a > b {
                kl = kl.max(a - b);
            } else {
                ku = ku.max(b - a);
            }
        }
    }
    (kl, ku)
}
