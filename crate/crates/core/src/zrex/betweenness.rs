//! Brandes edge betweenness on small undirected graphs.

use std::collections::VecDeque;

use rayon::prelude::*;

const SOURCE_BLOCK: usize = 64;

fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); n];
    for (i, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((b, i));
        adj[b].push((a, i));
    }
    adj
}

/// Single-source dependency accumulation into `acc`.
fn accumulate(adj: &[Vec<(usize, usize)>], s: usize, acc: &mut [f64]) {
    let n = adj.len();
    let mut dist = vec![usize::MAX; n];
    let mut sigma = vec![0.0f64; n];
    let mut preds: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([s]);
    dist[s] = 0;
    sigma[s] = 1.0;
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &(w, e) in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
            if dist[w] == dist[v] + 1 {
                sigma[w] += sigma[v];
                preds[w].push((v, e));
            }
        }
    }
    let mut delta = vec![0.0f64; n];
    for &w in order.iter().rev() {
        for &(v, e) in &preds[w] {
            let c = sigma[v] / sigma[w] * (1.0 + delta[w]);
            acc[e] += c;
            delta[v] += c;
        }
    }
}

/// Unnormalized shortest-path edge betweenness of an undirected, unweighted
/// graph; each unordered node pair counts once. Self-loops score zero.
pub fn edge_betweenness(n: usize, edges: &[(usize, usize)]) -> Vec<f64> {
    let adj = adjacency(n, edges);
    let sources: Vec<usize> = (0..n).collect();
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(SOURCE_BLOCK)
        .map(|block| {
            let mut acc = vec![0.0; edges.len()];
            for &s in block {
                accumulate(&adj, s, &mut acc);
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; edges.len()];
    for p in partials {
        for (o, x) in out.iter_mut().zip(p) {
            *o += x;
        }
    }
    for o in &mut out {
        *o /= 2.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_of_three() {
        assert_eq!(edge_betweenness(3, &[(0, 1), (1, 2)]), vec![2.0, 2.0]);
    }

    #[test]
    fn triangle_symmetric() {
        let b = edge_betweenness(3, &[(0, 1), (1, 2), (0, 2)]);
        assert!(b.iter().all(|&x| x == 1.0), "{b:?}");
    }

    #[test]
    fn components_do_not_mix() {
        let b = edge_betweenness(4, &[(0, 1), (2, 3)]);
        assert_eq!(b, vec![1.0, 1.0]);
    }

    #[test]
    fn square_splits_paths() {
        // 4-cycle: each edge carries its own pair (1) plus half of two
        // opposite-corner pairs
        let b = edge_betweenness(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert!(b.iter().all(|&x| (x - 2.0).abs() < 1e-12), "{b:?}");
    }
}
