//! Reverse Cuthill–McKee node ordering to keep the stiffness band narrow.

use std::collections::VecDeque;

/// Returns `perm` with `perm[node] = new index`.
pub fn reverse_cuthill_mckee(n: usize, triangles: &[[usize; 3]]) -> Vec<usize> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in triangles {
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    adj[t[a]].push(t[b]);
                }
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let seed = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree[v], v))
            .unwrap();
        let start = pseudo_peripheral(seed, &adj, &visited);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_unstable_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    let mut perm = vec![0; n];
    for (new, &old) in order.iter().rev().enumerate() {
        perm[old] = new;
    }
    perm
}

/// Repeated BFS towards the farthest node of smallest degree.
fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], blocked: &[bool]) -> usize {
    let mut current = seed;
    let mut best_depth = 0;
    for _ in 0..8 {
        let (depth, last_level) = bfs_levels(current, adj, blocked);
        let candidate = *last_level
            .iter()
            .min_by_key(|&&v| (adj[v].len(), v))
            .unwrap();
        if depth <= best_depth {
            break;
        }
        best_depth = depth;
        current = candidate;
    }
    current
}

fn bfs_levels(start: usize, adj: &[Vec<usize>], blocked: &[bool]) -> (usize, Vec<usize>) {
    let mut level = vec![usize::MAX; adj.len()];
    level[start] = 0;
    let mut frontier = vec![start];
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &v in &frontier {
            for &w in &adj[v] {
                if !blocked[w] && level[w] == usize::MAX {
                    level[w] = depth + 1;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            return (depth, frontier);
        }
        depth += 1;
        frontier = next;
    }
}

pub fn bandwidth(perm: &[usize], triangles: &[[usize; 3]]) -> usize {
    triangles
        .iter()
        .flat_map(|t| {
            [(t[0], t[1]), (t[1], t[2]), (t[0], t[2])]
                .map(|(a, b)| perm[a].abs_diff(perm[b]))
        })
        .max()
        .unwrap_or(0)
}
