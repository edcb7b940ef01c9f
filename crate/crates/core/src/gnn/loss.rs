use rayon::prelude::*;

use super::forward::EmbeddingTable;
use super::negative::NegGraph;
use super::{ModelError, ModelParams};
use crate::hetgraph::{HeteroGraph, NodeType, Relation};
use crate::tensor::{dot, vec_mat_acc, Matrix};

/// Relations whose edges are scored by the loss (all user-incident ones).
pub const SCORED_RELATIONS: [Relation; 4] = [
    Relation::Views,
    Relation::Saves,
    Relation::Tours,
    Relation::SearchedIn,
];

/// Bilinear score `a C b^T`.
pub fn score_pair(a: &[f64], scorer: &Matrix, b: &[f64]) -> f64 {
    let mut q = vec![0.0; scorer.cols()];
    vec_mat_acc(a, scorer, &mut q);
    dot(&q, b)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Raw scores for `(src, dst)` pairs of `rel`.
pub fn edge_scores(
    params: &ModelParams,
    emb: &EmbeddingTable,
    rel: Relation,
    pairs: &[(usize, usize)],
) -> Vec<f64> {
    let c = &params.weights.scorer;
    pairs
        .par_iter()
        .map(|&(s, d)| score_pair(emb.row(rel.src_type(), s), c, emb.row(rel.dst_type(), d)))
        .collect()
}

/// Mean hinge `max(0, margin - (pos_i - neg_i))` over aligned pairs.
pub fn margin_loss(pos: &[f64], neg: &[f64], margin: f64) -> Result<f64, ModelError> {
    if pos.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    if pos.len() != neg.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} positive scores vs {} negative scores",
            pos.len(),
            neg.len()
        )));
    }
    let total: f64 = pos
        .iter()
        .zip(neg)
        .map(|(p, n)| (margin - (p - n)).max(0.0))
        .sum();
    Ok(total / pos.len() as f64)
}

/// Loss of the model on `graph` with the given negatives, from embeddings.
pub fn graph_loss(
    params: &ModelParams,
    graph: &HeteroGraph,
    emb: &EmbeddingTable,
    neg: &NegGraph,
) -> Result<f64, ModelError> {
    let (pos, negs) = paired_scores(params, graph, emb, neg);
    margin_loss(&pos, &negs, params.hyper.margin)
}

/// `(positive, negative)` score per negative pair, in pair order.
pub(crate) fn paired_scores(
    params: &ModelParams,
    graph: &HeteroGraph,
    emb: &EmbeddingTable,
    neg: &NegGraph,
) -> (Vec<f64>, Vec<f64>) {
    let c = &params.weights.scorer;
    neg.pairs
        .par_iter()
        .map(|p| {
            let set = graph.edges(p.rel);
            let a = emb.row(NodeType::User, set.src[p.pos_edge]);
            let t = p.rel.dst_type();
            let mut q = vec![0.0; c.cols()];
            vec_mat_acc(a, c, &mut q);
            (
                dot(&q, emb.row(t, set.dst[p.pos_edge])),
                dot(&q, emb.row(t, p.neg_dst)),
            )
        })
        .unzip()
}
