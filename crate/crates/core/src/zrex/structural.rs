//! Edge importance by removing collapsed and co-click edges around a
//! recommendation and measuring the change in user–city similarity.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::betweenness::edge_betweenness;
use super::coclick::{find_coclick_edges, CoClickEdge};
use super::{ExplainContext, ExplainError};
use crate::hetgraph::{k_hop_subgraph, EdgeRef, NodeType, Subgraph};
use crate::ranker::top_k;

pub const DEFAULT_HOPS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Most recent backing interaction first.
    Pri,
    /// Highest degree of the non-target endpoint first.
    #[default]
    Hid,
    /// Highest edge betweenness first.
    Hbc,
}

impl FromStr for Strategy {
    type Err = ExplainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pri" => Ok(Strategy::Pri),
            "hid" => Ok(Strategy::Hid),
            "hbc" => Ok(Strategy::Hbc),
            other => Err(ExplainError::InvalidParameter(format!(
                "unknown strategy {other:?} (expected pri, hid or hbc)"
            ))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Pri => "pri",
            Strategy::Hid => "hid",
            Strategy::Hbc => "hbc",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Collapsed,
    Coclick,
}

/// A candidate in the collapsed graph. Endpoints are unified node ids:
/// `(user, city)` for collapsed edges, `(city_a, city_b)` with `a < b` for
/// co-click edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CandidateEdge {
    pub kind: EdgeKind,
    pub src: usize,
    pub dst: usize,
    /// Index into the collapsed edge list.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collapsed: Option<usize>,
    /// Shared predecessor users of a co-click edge.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub shared: Vec<usize>,
    /// Heterogeneous edges removed when this candidate is perturbed.
    #[serde(skip)]
    pub grounding: Vec<EdgeRef>,
}

impl CandidateEdge {
    fn key(&self) -> (usize, usize, EdgeKind) {
        (self.src, self.dst, self.kind)
    }
}

/// Candidate edges around one `(user, city)` recommendation.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub user: usize,
    pub city: usize,
    pub k: usize,
    pub subgraph: Subgraph,
    pub coclick: Vec<CoClickEdge>,
    pub candidates: Vec<CandidateEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredEdge {
    pub edge: CandidateEdge,
    /// Ordering score under the strategy.
    pub priority: f64,
    /// `None` for explainers that do not measure similarity.
    pub delta_sim: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeAttribution {
    pub user: usize,
    pub city: usize,
    pub k: usize,
    pub strategy: Option<Strategy>,
    /// `None` for explainers that do not measure similarity.
    pub base_sim: Option<f64>,
    /// Size of the candidate set before any budget.
    pub candidates: usize,
    /// Descending by `|delta_sim|`.
    pub edges: Vec<ScoredEdge>,
}

impl EdgeAttribution {
    /// Heterogeneous edges behind the first `m` listed edges, deduplicated.
    pub fn grounding_of_top(&self, m: usize) -> Vec<EdgeRef> {
        let mut out: Vec<EdgeRef> = self
            .edges
            .iter()
            .take(m)
            .flat_map(|e| e.edge.grounding.iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

impl ExplainContext<'_> {
    /// Backing edges of the collapsed edge `(user, city)`, if present.
    fn backing(&self, user: usize, city: usize) -> &[EdgeRef] {
        match self.collapsed.edge_between(user, city) {
            Some(e) => &self.collapsed.edges[e].backing,
            None => &[],
        }
    }

    /// Heterogeneous edges removed for a co-click edge: each shared user's
    /// edges into the target city when the edge touches it, otherwise into
    /// the higher-index city.
    fn ground_coclick(&self, e: &CoClickEdge, target: usize) -> Vec<EdgeRef> {
        let side = if e.touches(target) { target } else { e.b };
        let mut out: Vec<EdgeRef> = e
            .shared
            .iter()
            .flat_map(|&u| self.backing(u, side).iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    /// k-hop subgraph around `user` plus co-click edges, and the candidate
    /// edges incident to `user` or `city`.
    pub fn candidates(
        &self,
        user: usize,
        city: usize,
        k: usize,
    ) -> Result<CandidateSet, ExplainError> {
        self.check_user(user)?;
        self.check_city(city)?;
        if k == 0 {
            return Err(ExplainError::InvalidParameter(
                "k must be at least 1".into(),
            ));
        }
        let g = &self.collapsed;
        let subgraph = k_hop_subgraph(g, g.user_node(user), k)?;
        let coclick = find_coclick_edges(&subgraph);
        let mut candidates = Vec::new();
        for e in &subgraph.edges {
            if e.user == user || e.city == city {
                candidates.push(CandidateEdge {
                    kind: EdgeKind::Collapsed,
                    src: e.user,
                    dst: g.city_node(e.city),
                    collapsed: Some(e.collapsed),
                    shared: Vec::new(),
                    grounding: g.edges[e.collapsed].backing.clone(),
                });
            }
        }
        for c in coclick.iter().filter(|c| c.touches(city)) {
            candidates.push(CandidateEdge {
                kind: EdgeKind::Coclick,
                src: g.city_node(c.a),
                dst: g.city_node(c.b),
                collapsed: None,
                shared: c.shared.clone(),
                grounding: self.ground_coclick(c, city),
            });
        }
        candidates.sort_by_key(|c| c.key());
        Ok(CandidateSet {
            user,
            city,
            k,
            subgraph,
            coclick,
            candidates,
        })
    }

    /// Similarity change for each candidate, in candidate order.
    pub fn delta_sims(&self, user: usize, city: usize, edges: &[CandidateEdge]) -> (f64, Vec<f64>) {
        let base = self.similarity(&[], user, city);
        let deltas = edges
            .par_iter()
            .map(|e| self.similarity(&e.grounding, user, city) - base)
            .collect();
        (base, deltas)
    }
}

/// Undirected edge list of the subgraph with co-click edges appended, over
/// local node ids.
fn augmented(set: &CandidateSet) -> (usize, Vec<(usize, usize)>, BTreeMap<(usize, usize), usize>) {
    let sub = &set.subgraph;
    let local: BTreeMap<usize, usize> =
        sub.nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut edges = Vec::with_capacity(sub.edges.len() + set.coclick.len());
    let mut index = BTreeMap::new();
    for e in &sub.edges {
        let (a, b) = (e.user, sub.n_users + e.city);
        index.insert((a, b), edges.len());
        edges.push((local[&a], local[&b]));
    }
    for c in &set.coclick {
        let (a, b) = (sub.n_users + c.a, sub.n_users + c.b);
        index.insert((a, b), edges.len());
        edges.push((local[&a], local[&b]));
    }
    (sub.nodes.len(), edges, index)
}

fn priority(set: &CandidateSet, strategy: Strategy, ctx: &ExplainContext) -> Vec<f64> {
    match strategy {
        Strategy::Pri => set
            .candidates
            .iter()
            .map(|c| {
                c.grounding
                    .iter()
                    .filter_map(|e| ctx.graph.edges(e.rel).timestamp_of(e.edge))
                    .max()
                    .map_or(f64::NEG_INFINITY, |t| t as f64)
            })
            .collect(),
        Strategy::Hid => {
            let mut degree: BTreeMap<usize, usize> = BTreeMap::new();
            let (_, _, index) = augmented(set);
            for &(a, b) in index.keys() {
                *degree.entry(a).or_default() += 1;
                *degree.entry(b).or_default() += 1;
            }
            let u = set.user;
            let ct = set.subgraph.n_users + set.city;
            set.candidates
                .iter()
                .map(|c| {
                    let far = if c.src != u && c.src != ct {
                        c.src
                    } else if c.dst != u && c.dst != ct {
                        c.dst
                    } else {
                        ct
                    };
                    degree.get(&far).copied().unwrap_or(0) as f64
                })
                .collect()
        }
        Strategy::Hbc => {
            let (n, edges, index) = augmented(set);
            let bc = edge_betweenness(n, &edges);
            set.candidates
                .iter()
                .map(|c| index.get(&(c.src, c.dst)).map_or(0.0, |&i| bc[i]))
                .collect()
        }
    }
}

/// Candidates with their strategy scores, highest first; endpoint ids break
/// ties.
pub fn order_candidates(
    set: &CandidateSet,
    strategy: Strategy,
    ctx: &ExplainContext,
) -> Vec<(CandidateEdge, f64)> {
    let scores = priority(set, strategy, ctx);
    let mut out: Vec<(CandidateEdge, f64)> = set.candidates.iter().cloned().zip(scores).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.key().cmp(&b.0.key())));
    out
}

/// Ranks candidate edges around `(user, city)` by `|Δsim|`. With a budget
/// only the first `budget` candidates in strategy order are perturbed.
pub fn structural_perturb(
    ctx: &ExplainContext,
    user: usize,
    city: usize,
    k: usize,
    strategy: Strategy,
    budget: Option<usize>,
) -> Result<EdgeAttribution, ExplainError> {
    let set = ctx.candidates(user, city, k)?;
    if set.candidates.is_empty() {
        return Err(ExplainError::NoCandidates { user, city });
    }
    if budget == Some(0) {
        return Err(ExplainError::InvalidParameter(
            "budget must be at least 1".into(),
        ));
    }
    warn_if_not_recommended(ctx, user, city);
    let mut ordered = order_candidates(&set, strategy, ctx);
    if let Some(b) = budget {
        ordered.truncate(b);
    }
    let edges: Vec<CandidateEdge> = ordered.iter().map(|(e, _)| e.clone()).collect();
    let (base_sim, deltas) = ctx.delta_sims(user, city, &edges);
    let mut scored: Vec<ScoredEdge> = ordered
        .into_iter()
        .zip(deltas)
        .map(|((edge, priority), d)| ScoredEdge {
            edge,
            priority,
            delta_sim: Some(d),
        })
        .collect();
    // stable: strategy order survives among equal |Δsim|
    scored.sort_by(|a, b| {
        let (x, y) = (
            a.delta_sim.unwrap_or(0.0).abs(),
            b.delta_sim.unwrap_or(0.0).abs(),
        );
        y.total_cmp(&x)
    });
    Ok(EdgeAttribution {
        user,
        city,
        k,
        strategy: Some(strategy),
        base_sim: Some(base_sim),
        candidates: set.candidates.len(),
        edges: scored,
    })
}

fn warn_if_not_recommended(ctx: &ExplainContext, user: usize, city: usize) {
    let (u, cities) = ctx.local_user_and_cities(&[], user);
    if let Ok(top) = top_k(&u, &cities, 10) {
        if !top.iter().any(|&(c, _)| c == city) {
            log::warn!("city {city} is not among the top-10 recommendations for user {user}");
        }
    }
}

/// Uniformly chosen `m` candidates in random order, without similarity
/// scores.
pub fn random_edge_explainer(
    set: &CandidateSet,
    m: usize,
    seed: u64,
) -> Result<EdgeAttribution, ExplainError> {
    let n = set.candidates.len();
    if m > n {
        return Err(ExplainError::InvalidParameter(format!(
            "m = {m} exceeds the {n} candidates"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = rand::seq::index::sample(&mut rng, n, m)
        .into_iter()
        .map(|i| ScoredEdge {
            edge: set.candidates[i].clone(),
            priority: 0.0,
            delta_sim: None,
        })
        .collect();
    Ok(EdgeAttribution {
        user: set.user,
        city: set.city,
        k: set.k,
        strategy: None,
        base_sim: None,
        candidates: n,
        edges,
    })
}

/// Unified id to `(type, index)`.
pub fn node_of(set: &CandidateSet, node: usize) -> (NodeType, usize) {
    if node < set.subgraph.n_users {
        (NodeType::User, node)
    } else {
        (NodeType::City, node - set.subgraph.n_users)
    }
}
