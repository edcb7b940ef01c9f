//! Explanation artifacts: JSON record and Graphviz rendering.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::features::FeatureAttribution;
use super::structural::{EdgeAttribution, EdgeKind};
use crate::hetgraph::{HeteroGraph, NodeType};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub user: String,
    pub city: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub name: String,
    pub delta_ndcg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub src: String,
    pub dst: String,
    pub kind: String,
    pub delta_sim: Option<f64>,
    /// Heterogeneous edges removed when perturbing this edge.
    pub grounded_edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub target: Target,
    #[serde(rename = "K")]
    pub big_k: usize,
    pub k: usize,
    pub strategy: String,
    pub budget: Option<usize>,
    pub baseline_ndcg: f64,
    pub features: Vec<FeatureRecord>,
    pub base_sim: Option<f64>,
    pub candidates: usize,
    pub edges: Vec<EdgeRecord>,
    pub checkpoint_id: String,
    pub seed: u64,
    /// Start of the held-out evaluation day, in data time.
    pub eval_cutoff: i64,
}

fn node_key(g: &HeteroGraph, n_users: usize, node: usize) -> String {
    if node < n_users {
        g.keys(NodeType::User)[node].clone()
    } else {
        g.keys(NodeType::City)[node - n_users].clone()
    }
}

impl Explanation {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        g: &HeteroGraph,
        features: &FeatureAttribution,
        edges: &EdgeAttribution,
        budget: Option<usize>,
        checkpoint_id: &str,
        seed: u64,
        eval_cutoff: i64,
    ) -> Self {
        let n_users = g.num_users();
        Self {
            target: Target {
                user: g.keys(NodeType::User)[edges.user].clone(),
                city: g.keys(NodeType::City)[edges.city].clone(),
            },
            big_k: features.k,
            k: edges.k,
            strategy: edges
                .strategy
                .map_or_else(|| "random".to_string(), |s| s.to_string()),
            budget,
            baseline_ndcg: features.baseline,
            features: features
                .features
                .iter()
                .map(|f| FeatureRecord {
                    name: f.name.clone(),
                    delta_ndcg: f.delta_ndcg,
                })
                .collect(),
            base_sim: edges.base_sim,
            candidates: edges.candidates,
            edges: edges
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    src: node_key(g, n_users, e.edge.src),
                    dst: node_key(g, n_users, e.edge.dst),
                    kind: match e.edge.kind {
                        EdgeKind::Collapsed => "collapsed",
                        EdgeKind::Coclick => "coclick",
                    }
                    .to_string(),
                    delta_sim: e.delta_sim,
                    grounded_edges: e.edge.grounding.len(),
                })
                .collect(),
            checkpoint_id: checkpoint_id.to_string(),
            seed,
            eval_cutoff,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("explanation serializes")
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz rendering of the explained edges: target user yellow,
/// recommended city green, co-clicked cities blue, the top `m` edges red.
pub fn to_dot(exp: &Explanation, m: usize) -> String {
    let coclicked: BTreeSet<&str> = exp
        .edges
        .iter()
        .filter(|e| e.kind == "coclick")
        .flat_map(|e| [e.src.as_str(), e.dst.as_str()])
        .collect();
    let mut nodes: BTreeSet<&str> = BTreeSet::new();
    nodes.insert(&exp.target.user);
    nodes.insert(&exp.target.city);
    for e in &exp.edges {
        nodes.insert(&e.src);
        nodes.insert(&e.dst);
    }
    let mut s = String::from("graph explanation {\n  node [style=filled];\n");
    for n in nodes {
        let color = if n == exp.target.user {
            "yellow"
        } else if n == exp.target.city {
            "green"
        } else if coclicked.contains(n) {
            "blue"
        } else {
            "white"
        };
        writeln!(s, "  {} [fillcolor={color}];", quote(n)).expect("write to string");
    }
    for (i, e) in exp.edges.iter().enumerate() {
        let color = if i < m { "red" } else { "gray" };
        let style = if e.kind == "coclick" {
            "dashed"
        } else {
            "solid"
        };
        let label = e.delta_sim.map_or(String::new(), |d| format!("{d:.4}"));
        writeln!(
            s,
            "  {} -- {} [color={color}, style={style}, label={}];",
            quote(&e.src),
            quote(&e.dst),
            quote(&label)
        )
        .expect("write to string");
    }
    s.push_str("}\n");
    s
}
