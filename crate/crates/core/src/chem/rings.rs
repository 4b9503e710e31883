//! Ring perception: bridge detection for in-ring bonds and a smallest set of
//! smallest rings from Horton's candidate cycles.

use std::collections::VecDeque;

/// Adjacency lists with the bond index of each neighbor link, sorted by
/// neighbor index.
pub(crate) fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); n];
    for (i, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((b, i));
        adj[b].push((a, i));
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    adj
}

/// Number of connected components.
pub fn component_count(n: usize, edges: &[(usize, usize)]) -> usize {
    let adj = adjacency(n, edges);
    let mut seen = vec![false; n];
    let mut count = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &(u, _) in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
    }
    count
}

/// Cyclomatic number `|E| − |V| + components`.
pub fn cycle_rank(n: usize, edges: &[(usize, usize)]) -> usize {
    (edges.len() + component_count(n, edges)).saturating_sub(n)
}

/// `true` for every edge that lies on some cycle (i.e. is not a bridge).
pub fn ring_edges(n: usize, edges: &[(usize, usize)]) -> Vec<bool> {
    let adj = adjacency(n, edges);
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut in_ring = vec![true; edges.len()];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // iterative DFS: (vertex, parent edge, next neighbor cursor)
        let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(root, None, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (v, parent_edge, ref mut cursor)) = stack.last_mut() {
            if *cursor < adj[v].len() {
                let (u, e) = adj[v][*cursor];
                *cursor += 1;
                if Some(e) == parent_edge {
                    continue;
                }
                if disc[u] == usize::MAX {
                    disc[u] = timer;
                    low[u] = timer;
                    timer += 1;
                    stack.push((u, Some(e), 0));
                } else {
                    low[v] = low[v].min(disc[u]);
                }
            } else {
                stack.pop();
                if let (Some(&(p, _, _)), Some(e)) = (stack.last(), parent_edge) {
                    low[p] = low[p].min(low[v]);
                    if low[v] > disc[p] {
                        in_ring[e] = false;
                    }
                }
            }
        }
    }
    in_ring
}

/// A ring as its sorted atom indices and sorted bond indices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Ring {
    pub atoms: Vec<usize>,
    pub bonds: Vec<usize>,
}

/// Smallest set of smallest rings (a minimum cycle basis).
pub fn sssr(n: usize, edges: &[(usize, usize)]) -> Vec<Ring> {
    let rank = cycle_rank(n, edges);
    if rank == 0 {
        return Vec::new();
    }
    let adj = adjacency(n, edges);
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    for root in 0..n {
        // BFS tree from root: parent edge per vertex
        let mut dist = vec![usize::MAX; n];
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        dist[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &(u, e) in &adj[v] {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    parent[u] = Some((v, e));
                    queue.push_back(u);
                }
            }
        }
        let path = |mut v: usize| {
            let mut atoms = vec![v];
            let mut bonds = Vec::new();
            while let Some((p, e)) = parent[v] {
                bonds.push(e);
                atoms.push(p);
                v = p;
            }
            (atoms, bonds)
        };
        for (e, &(x, y)) in edges.iter().enumerate() {
            if dist[x] == usize::MAX || dist[y] == usize::MAX {
                continue;
            }
            if parent[x].map(|p| p.1) == Some(e) || parent[y].map(|p| p.1) == Some(e) {
                continue;
            }
            let (ax, bx) = path(x);
            let (ay, by) = path(y);
            // paths must meet only at the root
            let shared = ax.iter().filter(|a| ay.contains(a)).count();
            if shared != 1 {
                continue;
            }
            let mut bonds: Vec<usize> = bx.into_iter().chain(by).chain([e]).collect();
            bonds.sort_unstable();
            candidates.push(bonds);
        }
    }
    candidates.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    candidates.dedup();

    let words = edges.len().div_ceil(64);
    let mut basis: Vec<(usize, Vec<u64>)> = Vec::new();
    let mut rings = Vec::new();
    for bonds in candidates {
        let mut vec = vec![0u64; words];
        for &b in &bonds {
            vec[b / 64] |= 1 << (b % 64);
        }
        for (pivot, row) in &basis {
            if vec[pivot / 64] >> (pivot % 64) & 1 == 1 {
                for (v, r) in vec.iter_mut().zip(row) {
                    *v ^= r;
                }
            }
        }
        let Some(pivot) = (0..edges.len()).find(|b| vec[b / 64] >> (b % 64) & 1 == 1) else {
            continue;
        };
        basis.push((pivot, vec));
        let mut atoms: Vec<usize> = bonds.iter().flat_map(|&b| [edges[b].0, edges[b].1]).collect();
        atoms.sort_unstable();
        atoms.dedup();
        rings.push(Ring { atoms, bonds });
        if rings.len() == rank {
            break;
        }
    }
    rings.sort();
    rings
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: usize) -> Vec<(usize, usize)> {
        (0..n).map(|i| (i, (i + 1) % n)).collect()
    }

    #[test]
    fn bridges_are_not_ring_edges() {
        // triangle with a tail
        let edges = vec![(0, 1), (1, 2), (2, 0), (2, 3)];
        assert_eq!(ring_edges(4, &edges), vec![true, true, true, false]);
    }

    #[test]
    fn naphthalene_has_two_six_rings() {
        let mut edges = cycle(6);
        edges.extend([(5, 6), (6, 7), (7, 8), (8, 9), (9, 0)]);
        let rings = sssr(10, &edges);
        assert_eq!(rings.len(), 2);
        assert!(rings.iter().all(|r| r.atoms.len() == 6));
    }

    #[test]
    fn cubane_rank_five() {
        let edges = vec![
            (0, 1), (1, 2), (2, 3), (3, 0),
            (4, 5), (5, 6), (6, 7), (7, 4),
            (0, 4), (1, 5), (2, 6), (3, 7),
        ];
        let rings = sssr(8, &edges);
        assert_eq!(rings.len(), 5);
        assert!(rings.iter().all(|r| r.atoms.len() == 4));
    }
}
