//! Perturbation-based explanations of user–city recommendations: feature
//! zeroing scored by nDCG@K, and edge removal scored by the change in
//! user–city cosine similarity.

pub mod betweenness;
pub mod coclick;
pub mod export;
pub mod features;
pub mod fidelity;
pub mod structural;

pub use betweenness::edge_betweenness;
pub use coclick::{find_coclick_edges, CoClickEdge};
pub use export::{to_dot, EdgeRecord, Explanation, FeatureRecord, Target};
pub use features::{
    feature_perturb, model_ndcg, sequential_feature_eval, CurvePoint, FeatureAttribution,
    FeatureScore, ZeroScope,
};
pub use fidelity::{fidelity_eval, FidelityReport};
pub use structural::{
    order_candidates, random_edge_explainer, structural_perturb, CandidateEdge, CandidateSet,
    EdgeAttribution, EdgeKind, ScoredEdge, Strategy, DEFAULT_HOPS,
};

use crate::gnn::{
    embed_reusing, forward_cached, EmbeddingTable, ModelError, ModelParams, NodeFeatures,
};
use crate::hetgraph::{
    collapse_user_city, EdgeMask, EdgeRef, GraphError, GraphView, HeteroGraph, NodeType,
    UserCityGraph,
};
use crate::ranker::RankError;
use crate::tensor::{cosine, Matrix};

#[derive(Debug, thiserror::Error)]
pub enum ExplainError {
    #[error("model has not been trained")]
    UntrainedModel,
    #[error("unknown node: {0}")]
    UnknownNode(String),
    #[error("no candidate edges around user {user} and city {city}")]
    NoCandidates { user: usize, city: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Rank(#[from] RankError),
}

/// Read-only state shared by every perturbation of one model on one graph.
pub struct ExplainContext<'a> {
    pub params: &'a ModelParams,
    pub graph: &'a HeteroGraph,
    pub feats: &'a NodeFeatures,
    pub collapsed: UserCityGraph,
    /// Unperturbed projected inputs, first-layer outputs and final embeddings.
    h: Vec<[Matrix; 3]>,
}

impl<'a> ExplainContext<'a> {
    pub fn new(
        params: &'a ModelParams,
        graph: &'a HeteroGraph,
        feats: &'a NodeFeatures,
    ) -> Result<Self, ExplainError> {
        if params.steps == 0 {
            return Err(ExplainError::UntrainedModel);
        }
        let cache = forward_cached(params, &GraphView::new(graph), feats)?;
        Ok(Self {
            params,
            graph,
            feats,
            collapsed: collapse_user_city(graph),
            h: cache.h,
        })
    }

    pub fn check_user(&self, user: usize) -> Result<(), ExplainError> {
        if user >= self.graph.num_users() {
            return Err(ExplainError::UnknownNode(format!("user index {user}")));
        }
        Ok(())
    }

    pub fn check_city(&self, city: usize) -> Result<(), ExplainError> {
        if city >= self.graph.num_cities() {
            return Err(ExplainError::UnknownNode(format!("city index {city}")));
        }
        Ok(())
    }

    /// Final embeddings on the unperturbed graph.
    pub fn embeddings(&self) -> EmbeddingTable {
        EmbeddingTable {
            tables: self.h[2].clone(),
        }
    }

    /// Projected inputs, which no edge removal changes.
    pub fn inputs(&self) -> &[Matrix; 3] {
        &self.h[0]
    }

    fn embed(&self, removed: &[EdgeRef], targets: &[(NodeType, usize)]) -> Vec<Vec<f64>> {
        let mask = self.mask_of(removed);
        let view = GraphView::masked(self.graph, &mask);
        let dirty: Vec<(NodeType, usize)> = removed
            .iter()
            .flat_map(|&e| {
                let (a, b) = self.graph.endpoints(e);
                [a, b]
            })
            .collect();
        embed_reusing(self.params, &view, &self.h[0], &self.h[1], &dirty, targets)
    }

    pub fn mask_of(&self, removed: &[EdgeRef]) -> EdgeMask {
        let mut mask = EdgeMask::new(self.graph);
        for &e in removed {
            mask.remove(e);
        }
        mask
    }

    /// User and city embeddings with `removed` edges masked out.
    pub fn local_pair(
        &self,
        removed: &[EdgeRef],
        user: usize,
        city: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let mut out = self.embed(removed, &[(NodeType::User, user), (NodeType::City, city)]);
        let c = out.pop().expect("two targets");
        let u = out.pop().expect("two targets");
        (u, c)
    }

    /// Cosine similarity of `user` and `city` with `removed` edges masked.
    pub fn similarity(&self, removed: &[EdgeRef], user: usize, city: usize) -> f64 {
        let (u, c) = self.local_pair(removed, user, city);
        cosine(&u, &c)
    }

    /// The user's embedding and every city's, with `removed` edges masked.
    pub fn local_user_and_cities(&self, removed: &[EdgeRef], user: usize) -> (Vec<f64>, Matrix) {
        let n = self.graph.num_cities();
        let mut targets = Vec::with_capacity(n + 1);
        targets.push((NodeType::User, user));
        targets.extend((0..n).map(|c| (NodeType::City, c)));
        let mut out = self.embed(removed, &targets);
        let d = self.params.weights.dim();
        let cities: Vec<f64> = out.drain(1..).flatten().collect();
        let u = out.pop().expect("user target");
        (u, Matrix::from_vec(n, d, cities))
    }
}
