//! Exact reverse-mode gradients of the margin loss.

use rayon::prelude::*;

use super::forward::{forward_cached, ForwardCache, NodeFeatures};
use super::negative::NegGraph;
use super::params::{msg_into, MsgRel, Weights};
use super::{ModelError, ModelParams};
use crate::hetgraph::{GraphView, HeteroGraph, NodeType};
use crate::tensor::{dot, vec_mat_acc, vec_mat_t_acc, Matrix};

const BLOCK: usize = 256;

/// `scale * A^T B`, summed in fixed row blocks so the result does not depend
/// on the thread count.
fn sum_outer(a: &Matrix, b: &Matrix, scale: f64) -> Matrix {
    debug_assert_eq!(a.rows(), b.rows());
    let n = a.rows();
    let partials: Vec<Matrix> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|blk| {
            let mut acc = Matrix::zeros(a.cols(), b.cols());
            for i in blk * BLOCK..((blk + 1) * BLOCK).min(n) {
                acc.add_outer(a.row(i), b.row(i), scale);
            }
            acc
        })
        .collect();
    let mut out = Matrix::zeros(a.cols(), b.cols());
    for p in &partials {
        out.add_assign(p);
    }
    out
}

fn col_sum(a: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(1, a.cols());
    for i in 0..a.rows() {
        for (o, x) in out.data_mut().iter_mut().zip(a.row(i)) {
            *o += x;
        }
    }
    out
}

/// Backpropagates `dz` (gradient w.r.t. the pre-activation of `layer`) into
/// the layer's weights and returns the gradient w.r.t. its input rows.
fn layer_backward(
    w: &Weights,
    grads: &mut Weights,
    layer: usize,
    view: &GraphView,
    cache: &ForwardCache,
    dz: &[Matrix; 3],
) -> [Matrix; 3] {
    let d = w.dim();
    let prev = &cache.h[layer];
    for t in NodeType::ALL {
        let rels = msg_into(t);
        let inv_r = 1.0 / rels.len() as f64;
        for m in rels {
            let g = sum_outer(&cache.means[layer][m.index()], &dz[t.index()], inv_r);
            grads.relation[layer][m.index()].add_assign(&g);
        }
        let g = sum_outer(&prev[t.index()], &dz[t.index()], 1.0);
        grads.self_loop[layer][t.index()].add_assign(&g);
    }

    let dmean: Vec<Matrix> = MsgRel::ALL
        .iter()
        .map(|&m| {
            let t = m.receiver();
            let inv_r = 1.0 / msg_into(t).len() as f64;
            let wm = &w.relation[layer][m.index()];
            let counts = &cache.counts[m.index()];
            let mut out = Matrix::zeros(dz[t.index()].rows(), d);
            out.data_mut()
                .par_chunks_mut(d)
                .enumerate()
                .for_each(|(v, row)| {
                    if counts[v] > 0 {
                        vec_mat_t_acc(dz[t.index()].row(v), wm, row);
                        for x in row.iter_mut() {
                            *x *= inv_r;
                        }
                    }
                });
            out
        })
        .collect();

    NodeType::ALL.map(|t| {
        let s = &w.self_loop[layer][t.index()];
        let dzt = &dz[t.index()];
        let mut out = Matrix::zeros(prev[t.index()].rows(), d);
        out.data_mut()
            .par_chunks_mut(d)
            .enumerate()
            .for_each(|(u, row)| {
                let g = dzt.row(u);
                vec_mat_t_acc(g, s, row);
                for (o, x) in row.iter_mut().zip(g) {
                    *o += x;
                }
                for m in MsgRel::ALL.iter().filter(|m| m.sender() == t) {
                    let dm = &dmean[m.index()];
                    let counts = &cache.counts[m.index()];
                    view.for_each_in_neighbor(m.rel, !m.reverse, u, |v, _| {
                        let c = counts[v] as f64;
                        for (o, x) in row.iter_mut().zip(dm.row(v)) {
                            *o += x / c;
                        }
                    });
                }
            });
        out
    })
}

/// Margin loss over `neg` and its gradient w.r.t. every weight, computed on
/// the unmasked graph.
pub fn loss_and_gradients(
    params: &ModelParams,
    graph: &HeteroGraph,
    feats: &NodeFeatures,
    neg: &NegGraph,
) -> Result<(f64, Weights), ModelError> {
    if neg.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let view = GraphView::new(graph);
    let cache = forward_cached(params, &view, feats)?;
    let w = &params.weights;
    let d = w.dim();
    let c = &w.scorer;
    let h2 = &cache.h[2];
    let n_users = graph.num_users();
    let ui = NodeType::User.index();

    let mut q = Matrix::zeros(n_users, d);
    q.data_mut()
        .par_chunks_mut(d)
        .enumerate()
        .for_each(|(u, row)| vec_mat_acc(h2[ui].row(u), c, row));

    let margin = params.hyper.margin;
    let hinges: Vec<f64> = neg
        .pairs
        .par_iter()
        .map(|p| {
            let set = graph.edges(p.rel);
            let t = p.rel.dst_type().index();
            let qu = q.row(set.src[p.pos_edge]);
            margin - (dot(qu, h2[t].row(set.dst[p.pos_edge])) - dot(qu, h2[t].row(p.neg_dst)))
        })
        .collect();

    let inv = 1.0 / neg.len() as f64;
    let mut total = 0.0;
    let mut g_user = Matrix::zeros(n_users, d);
    let mut dh2 = NodeType::ALL.map(|t| Matrix::zeros(graph.num_nodes(t), d));
    for (p, &hinge) in neg.pairs.iter().zip(&hinges) {
        if hinge <= 0.0 {
            continue;
        }
        total += hinge;
        let set = graph.edges(p.rel);
        let u = set.src[p.pos_edge];
        let b = set.dst[p.pos_edge];
        let t = p.rel.dst_type().index();
        for (k, g) in g_user.row_mut(u).iter_mut().enumerate() {
            *g += inv * (h2[t].get(p.neg_dst, k) - h2[t].get(b, k));
        }
        for (o, x) in dh2[t].row_mut(b).iter_mut().zip(q.row(u)) {
            *o -= inv * x;
        }
        for (o, x) in dh2[t].row_mut(p.neg_dst).iter_mut().zip(q.row(u)) {
            *o += inv * x;
        }
    }
    let loss = total * inv;

    let mut grads = w.zeros_like();
    grads.scorer = sum_outer(&h2[ui], &g_user, 1.0);
    dh2[ui]
        .data_mut()
        .par_chunks_mut(d)
        .enumerate()
        .for_each(|(u, row)| vec_mat_t_acc(g_user.row(u), c, row));

    let mut dh1 = layer_backward(w, &mut grads, 1, &view, &cache, &dh2);
    for (g, h) in dh1.iter_mut().zip(&cache.h[1]) {
        for (x, &a) in g.data_mut().iter_mut().zip(h.data()) {
            if a <= 0.0 {
                *x = 0.0;
            }
        }
    }
    let dh0 = layer_backward(w, &mut grads, 0, &view, &cache, &dh1);

    for t in NodeType::ALL {
        let i = t.index();
        grads.bias[i] = col_sum(&dh0[i]);
        grads.proj[i] = match t {
            NodeType::User => dh0[i].clone(),
            NodeType::Listing => sum_outer(&feats.listing, &dh0[i], 1.0),
            NodeType::City => sum_outer(&feats.city, &dh0[i], 1.0),
        };
    }
    Ok((loss, grads))
}
