#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zrex_core::gnn::{init_params, train, Hyper, ModelParams, NodeFeatures, TrainConfig};
use zrex_core::hetgraph::{HeteroGraph, RawEdge, Relation, Subgraph};
use zrex_core::tensor::Matrix;

/// Random heterogeneous graph where every user–listing edge has a matching
/// `searched_in` edge. Timestamps are distinct.
pub fn random_hetero(
    rng: &mut ChaCha8Rng,
    users: usize,
    listings: usize,
    cities: usize,
) -> HeteroGraph {
    let mut raw: BTreeMap<Relation, Vec<RawEdge>> = BTreeMap::new();
    let city_of: Vec<usize> = (0..listings)
        .map(|l| {
            if l < cities {
                l
            } else {
                rng.gen_range(0..cities)
            }
        })
        .collect();
    for (l, &c) in city_of.iter().enumerate() {
        raw.entry(Relation::Contains)
            .or_default()
            .push(RawEdge::new(c, l));
    }
    let mut ts = 1000i64;
    let mut searched = BTreeSet::new();
    for u in 0..users {
        let n = rng.gen_range(1..=4);
        let mut seen = BTreeSet::new();
        for _ in 0..n {
            let l = rng.gen_range(0..listings);
            if !seen.insert(l) {
                continue;
            }
            ts += rng.gen_range(1..50);
            let rel = match rng.gen_range(0..10) {
                0 => Relation::Saves,
                1 => Relation::Tours,
                _ => Relation::Views,
            };
            raw.entry(rel).or_default().push(RawEdge {
                src: u,
                dst: l,
                weight: 1,
                timestamp: ts,
            });
            searched.insert((u, city_of[l], ts));
        }
    }
    let mut last: BTreeMap<(usize, usize), i64> = BTreeMap::new();
    for (u, c, t) in searched {
        let e = last.entry((u, c)).or_insert(t);
        *e = (*e).max(t);
    }
    for ((u, c), t) in last {
        raw.entry(Relation::SearchedIn).or_default().push(RawEdge {
            src: u,
            dst: c,
            weight: 1,
            timestamp: t,
        });
    }
    HeteroGraph::from_index_edges(users, listings, cities, raw).unwrap()
}

pub fn random_features(
    rng: &mut ChaCha8Rng,
    g: &HeteroGraph,
    fl: usize,
    fc: usize,
) -> NodeFeatures {
    let mut m = |r: usize, c: usize| {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect())
    };
    NodeFeatures::new(m(g.num_listings(), fl), m(g.num_cities(), fc))
}

/// A briefly trained model on a random graph.
pub fn trained_fixture(
    seed: u64,
    users: usize,
    listings: usize,
    cities: usize,
) -> (HeteroGraph, NodeFeatures, ModelParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_hetero(&mut rng, users, listings, cities);
    let f = random_features(&mut rng, &g, 3, 4);
    let dims = zrex_core::gnn::FeatureDims {
        user: users,
        listing: 3,
        city: 4,
    };
    let p = init_params(dims, 8, Hyper::default(), seed).unwrap();
    let cfg = TrainConfig {
        epochs: 5,
        neg_ratio: 1,
        seed,
        ..TrainConfig::default()
    };
    let out = train(p, &g, &f, &cfg, None).unwrap();
    (g, f, out.params)
}

/// Every shortest path between every unordered pair, enumerated explicitly;
/// each path contributes `1 / #paths` to each of its edges.
pub fn brute_betweenness(n: usize, edges: &[(usize, usize)]) -> Vec<f64> {
    let mut adj = vec![Vec::new(); n];
    for (i, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((b, i));
        adj[b].push((a, i));
    }
    let dist: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            let mut d = vec![usize::MAX; n];
            d[s] = 0;
            let mut q = VecDeque::from([s]);
            while let Some(v) = q.pop_front() {
                for &(w, _) in &adj[v] {
                    if d[w] == usize::MAX {
                        d[w] = d[v] + 1;
                        q.push_back(w);
                    }
                }
            }
            d
        })
        .collect();
    let mut out = vec![0.0; edges.len()];
    for s in 0..n {
        for t in s + 1..n {
            if dist[s][t] == usize::MAX {
                continue;
            }
            let mut paths: Vec<Vec<usize>> = Vec::new();
            let mut stack: Vec<(usize, Vec<usize>)> = vec![(s, Vec::new())];
            while let Some((v, path)) = stack.pop() {
                if v == t {
                    paths.push(path);
                    continue;
                }
                for &(w, e) in &adj[v] {
                    if dist[s][w] == dist[s][v] + 1 && dist[w][t] + dist[s][w] == dist[s][t] {
                        let mut p = path.clone();
                        p.push(e);
                        stack.push((w, p));
                    }
                }
            }
            let share = 1.0 / paths.len() as f64;
            for p in paths {
                for e in p {
                    out[e] += share;
                }
            }
        }
    }
    out
}

/// All city pairs with their common user neighbors, by direct pair scan.
pub fn brute_coclick(sub: &Subgraph) -> Vec<(usize, usize, Vec<usize>)> {
    let cities: BTreeSet<usize> = sub.edges.iter().map(|e| e.city).collect();
    let users: BTreeSet<usize> = sub.edges.iter().map(|e| e.user).collect();
    let has = |u: usize, c: usize| sub.edges.iter().any(|e| e.user == u && e.city == c);
    let mut out = Vec::new();
    for &a in &cities {
        for &b in &cities {
            if a >= b {
                continue;
            }
            let shared: Vec<usize> = users
                .iter()
                .copied()
                .filter(|&u| has(u, a) && has(u, b))
                .collect();
            if !shared.is_empty() {
                out.push((a, b, shared));
            }
        }
    }
    out
}

pub fn random_simple_graph(rng: &mut ChaCha8Rng, max_nodes: usize) -> (usize, Vec<(usize, usize)>) {
    let n = rng.gen_range(1..=max_nodes);
    let p: f64 = rng.gen_range(0.05..0.6);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((a, b));
            }
        }
    }
    (n, edges)
}
