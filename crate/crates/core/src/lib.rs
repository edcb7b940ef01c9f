//! Heterogeneous interaction graphs, a two-layer relational GNN recommender,
//! and perturbation-based explanations of its user–city recommendations.

pub mod gnn;
pub mod hetgraph;
pub mod pipeline;
pub mod ranker;
pub mod synthgen;
pub mod tensor;
pub mod zrex;
