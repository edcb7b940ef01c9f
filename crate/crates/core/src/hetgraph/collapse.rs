//! The collapsed user–city graph and k-hop subgraph extraction.
//!
//! Node ids are unified: users occupy `0..n_users`, cities follow at
//! `n_users..n_users + n_cities`.

use std::collections::{BTreeMap, VecDeque};

use super::graph::{EdgeRef, HeteroGraph, Relation};
use super::GraphError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollapsedEdge {
    pub user: usize,
    pub city: usize,
    /// Number of backing heterogeneous edges.
    pub weight: usize,
    /// The `searched_in` edge and every user→listing edge into a listing of
    /// `city`, in relation/edge order.
    pub backing: Vec<EdgeRef>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserCityGraph {
    pub n_users: usize,
    pub n_cities: usize,
    pub edges: Vec<CollapsedEdge>,
    /// Per unified node: `(neighbor node, edge index)` sorted by neighbor.
    adjacency: Vec<Vec<(usize, usize)>>,
    index: BTreeMap<(usize, usize), usize>,
}

impl UserCityGraph {
    pub fn num_nodes(&self) -> usize {
        self.n_users + self.n_cities
    }

    #[inline]
    pub fn user_node(&self, user: usize) -> usize {
        user
    }

    #[inline]
    pub fn city_node(&self, city: usize) -> usize {
        self.n_users + city
    }

    #[inline]
    pub fn is_user(&self, node: usize) -> bool {
        node < self.n_users
    }

    /// City index of a unified city node.
    #[inline]
    pub fn city_of_node(&self, node: usize) -> usize {
        node - self.n_users
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn edge_between(&self, user: usize, city: usize) -> Option<usize> {
        self.index.get(&(user, city)).copied()
    }

    fn from_edges(n_users: usize, n_cities: usize, edges: Vec<CollapsedEdge>) -> Self {
        let mut adjacency = vec![Vec::new(); n_users + n_cities];
        let mut index = BTreeMap::new();
        for (i, e) in edges.iter().enumerate() {
            adjacency[e.user].push((n_users + e.city, i));
            adjacency[n_users + e.city].push((e.user, i));
            index.insert((e.user, e.city), i);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Self {
            n_users,
            n_cities,
            edges,
            adjacency,
            index,
        }
    }
}

/// Collapses the heterogeneous graph onto users and cities. A user–city edge
/// exists when the user has a `searched_in` edge to the city or interacted
/// with one of its listings; its weight is the number of backing edges.
pub fn collapse_user_city(g: &HeteroGraph) -> UserCityGraph {
    let mut backing: BTreeMap<(usize, usize), Vec<EdgeRef>> = BTreeMap::new();
    for rel in Relation::USER_LISTING {
        let set = g.edges(rel);
        for e in 0..set.len() {
            let cont = g.edges(Relation::Contains);
            for &ce in cont.incoming(set.dst[e]) {
                backing
                    .entry((set.src[e], cont.src[ce]))
                    .or_default()
                    .push(EdgeRef { rel, edge: e });
            }
        }
    }
    let searched = g.edges(Relation::SearchedIn);
    for e in 0..searched.len() {
        backing
            .entry((searched.src[e], searched.dst[e]))
            .or_default()
            .push(EdgeRef {
                rel: Relation::SearchedIn,
                edge: e,
            });
    }
    let edges = backing
        .into_iter()
        .map(|((user, city), mut b)| {
            b.sort_unstable();
            CollapsedEdge {
                user,
                city,
                weight: b.len(),
                backing: b,
            }
        })
        .collect();
    UserCityGraph::from_edges(g.num_users(), g.num_cities(), edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubEdge {
    /// Index into the parent's collapsed edges.
    pub collapsed: usize,
    pub user: usize,
    pub city: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    /// Unified node ids, ascending.
    pub nodes: Vec<usize>,
    /// Induced edges, ascending by collapsed edge index.
    pub edges: Vec<SubEdge>,
    pub center: usize,
    pub k: usize,
    pub n_users: usize,
}

impl Subgraph {
    pub fn contains_node(&self, node: usize) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }
}

/// BFS ball of radius `k` around `center` with its induced edges.
pub fn k_hop_subgraph(g: &UserCityGraph, center: usize, k: usize) -> Result<Subgraph, GraphError> {
    if center >= g.num_nodes() {
        return Err(GraphError::UnknownNode(center.to_string()));
    }
    if k == 0 {
        return Err(GraphError::InvalidParameter("k must be at least 1".into()));
    }
    let mut dist = vec![usize::MAX; g.num_nodes()];
    dist[center] = 0;
    let mut queue = VecDeque::from([center]);
    let mut nodes = vec![center];
    while let Some(v) = queue.pop_front() {
        if dist[v] == k {
            continue;
        }
        for &(w, _) in g.neighbors(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                nodes.push(w);
                queue.push_back(w);
            }
        }
    }
    nodes.sort_unstable();
    let mut edges: Vec<SubEdge> = Vec::new();
    for &v in &nodes {
        if !g.is_user(v) {
            continue;
        }
        for &(w, e) in g.neighbors(v) {
            if dist[w] != usize::MAX {
                edges.push(SubEdge {
                    collapsed: e,
                    user: v,
                    city: g.city_of_node(w),
                });
            }
        }
    }
    edges.sort_unstable_by_key(|e| e.collapsed);
    Ok(Subgraph {
        nodes,
        edges,
        center,
        k,
        n_users: g.n_users,
    })
}
