//! Forward propagation.
//!
//! Layer update for a node `v` of type `t` (row-vector convention):
//!
//! ```text
//! z_v = (1/R_t) * sum_r mean_{u in N_r(v)}(h_u) W_r  +  h_v S_t  +  h_v
//! ```
//!
//! where `r` ranges over the `R_t` message relations received by `t` and an
//! empty neighborhood contributes zero. Layer 1 applies ReLU, layer 2 is
//! linear. Every node row is computed by the same routines whether the whole
//! graph or a handful of nodes is evaluated, so local and full passes agree
//! bit for bit.

use std::collections::HashMap;

use rayon::prelude::*;

use super::params::{msg_into, MsgRel, Weights, NUM_MSG_RELS};
use super::{ModelError, ModelParams};
use crate::hetgraph::{FeatureTable, GraphView, HeteroGraph, NodeType};
use crate::tensor::{vec_mat_acc, Matrix};

/// Raw input attributes for listings and cities. Users are one-hot.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    pub listing: Matrix,
    pub city: Matrix,
}

impl NodeFeatures {
    pub fn new(listing: Matrix, city: Matrix) -> Self {
        Self { listing, city }
    }

    pub fn from_tables(listing: &FeatureTable, city: &FeatureTable) -> Self {
        Self {
            listing: listing.matrix.clone(),
            city: city.matrix.clone(),
        }
    }

    fn get(&self, t: NodeType) -> Option<&Matrix> {
        match t {
            NodeType::User => None,
            NodeType::Listing => Some(&self.listing),
            NodeType::City => Some(&self.city),
        }
    }
}

/// Final node embeddings, one matrix per node type.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub tables: [Matrix; 3],
}

impl EmbeddingTable {
    pub fn get(&self, t: NodeType) -> &Matrix {
        &self.tables[t.index()]
    }

    pub fn row(&self, t: NodeType, v: usize) -> &[f64] {
        self.tables[t.index()].row(v)
    }

    pub fn dim(&self) -> usize {
        self.tables[0].cols()
    }
}

/// Intermediate values kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `h[l][t]` for `l` in 0..=2 (0 = projected inputs).
    pub h: Vec<[Matrix; 3]>,
    /// `means[l][m]`: per-receiver neighbor mean of `h[l]` along message relation `m`.
    pub means: Vec<Vec<Matrix>>,
    /// `counts[m][v]`: live in-neighbor count of receiver `v` along `m`.
    pub counts: Vec<Vec<u32>>,
}

impl ForwardCache {
    pub fn embeddings(&self) -> EmbeddingTable {
        EmbeddingTable {
            tables: self.h[2].clone(),
        }
    }
}

pub(crate) fn check_shapes(
    params: &ModelParams,
    graph: &HeteroGraph,
    feats: &NodeFeatures,
) -> Result<(), ModelError> {
    let w = &params.weights;
    if w.proj[0].rows() != graph.num_users() {
        return Err(ModelError::ShapeMismatch(format!(
            "model has {} user rows, graph has {} users",
            w.proj[0].rows(),
            graph.num_users()
        )));
    }
    for t in [NodeType::Listing, NodeType::City] {
        let x = feats.get(t).expect("featured type");
        if x.rows() != graph.num_nodes(t) {
            return Err(ModelError::ShapeMismatch(format!(
                "{} features have {} rows, graph has {} nodes",
                t.name(),
                x.rows(),
                graph.num_nodes(t)
            )));
        }
        if x.cols() != w.proj[t.index()].rows() {
            return Err(ModelError::ShapeMismatch(format!(
                "{} features have {} columns, model expects {}",
                t.name(),
                x.cols(),
                w.proj[t.index()].rows()
            )));
        }
    }
    Ok(())
}

fn input_row(w: &Weights, feats: &NodeFeatures, t: NodeType, v: usize, out: &mut [f64]) {
    out.fill(0.0);
    let proj = &w.proj[t.index()];
    match feats.get(t) {
        None => {
            for (o, p) in out.iter_mut().zip(proj.row(v)) {
                *o += p;
            }
        }
        Some(x) => vec_mat_acc(x.row(v), proj, out),
    }
    for (o, b) in out.iter_mut().zip(w.bias[t.index()].data()) {
        *o += b;
    }
}

/// Projected inputs `h^(0)` for every node.
pub fn input_embeddings(
    params: &ModelParams,
    graph: &HeteroGraph,
    feats: &NodeFeatures,
) -> Result<[Matrix; 3], ModelError> {
    check_shapes(params, graph, feats)?;
    let w = &params.weights;
    let d = w.dim();
    Ok(NodeType::ALL.map(|t| {
        let mut h = Matrix::zeros(graph.num_nodes(t), d);
        h.data_mut()
            .par_chunks_mut(d)
            .enumerate()
            .for_each(|(v, out)| input_row(w, feats, t, v, out));
        h
    }))
}

/// Neighbor mean along `m` into `out`; returns the live neighbor count.
fn mean_row<'a>(
    view: &GraphView,
    m: MsgRel,
    v: usize,
    prev: &impl Fn(NodeType, usize) -> &'a [f64],
    out: &mut [f64],
) -> usize {
    out.fill(0.0);
    let sender = m.sender();
    let mut cnt = 0usize;
    view.for_each_in_neighbor(m.rel, m.reverse, v, |u, _| {
        for (o, x) in out.iter_mut().zip(prev(sender, u)) {
            *o += x;
        }
        cnt += 1;
    });
    if cnt > 0 {
        let c = cnt as f64;
        for o in out.iter_mut() {
            *o /= c;
        }
    }
    cnt
}

fn combine_row(
    w: &Weights,
    layer: usize,
    t: NodeType,
    means: &[&[f64]],
    counts: &[usize],
    h_self: &[f64],
    out: &mut [f64],
) {
    let rels = msg_into(t);
    out.fill(0.0);
    for (k, m) in rels.iter().enumerate() {
        if counts[k] > 0 {
            vec_mat_acc(means[k], &w.relation[layer][m.index()], out);
        }
    }
    let r = rels.len() as f64;
    for o in out.iter_mut() {
        *o /= r;
    }
    vec_mat_acc(h_self, &w.self_loop[layer][t.index()], out);
    for (o, h) in out.iter_mut().zip(h_self) {
        *o += h;
    }
    if layer == 0 {
        for o in out.iter_mut() {
            if *o <= 0.0 {
                *o = 0.0;
            }
        }
    }
}

/// One node's output at `layer` given an accessor for the previous layer.
fn node_row<'a>(
    w: &Weights,
    layer: usize,
    view: &GraphView,
    t: NodeType,
    v: usize,
    prev: &impl Fn(NodeType, usize) -> &'a [f64],
    out: &mut [f64],
) {
    let d = w.dim();
    let rels = msg_into(t);
    let mut buf = vec![0.0; rels.len() * d];
    let mut counts = [0usize; 4];
    for (k, (m, chunk)) in rels.iter().zip(buf.chunks_mut(d)).enumerate() {
        counts[k] = mean_row(view, *m, v, prev, chunk);
    }
    let means: Vec<&[f64]> = buf.chunks(d).collect();
    combine_row(w, layer, t, &means, &counts[..rels.len()], prev(t, v), out);
}

/// Full two-layer pass over every node, keeping intermediates.
pub fn forward_cached(
    params: &ModelParams,
    view: &GraphView,
    feats: &NodeFeatures,
) -> Result<ForwardCache, ModelError> {
    let graph = view.graph;
    let h0 = input_embeddings(params, graph, feats)?;
    let w = &params.weights;
    let d = w.dim();

    let mut counts: Vec<Vec<u32>> = Vec::with_capacity(NUM_MSG_RELS);
    for m in MsgRel::ALL {
        let n = graph.num_nodes(m.receiver());
        let c: Vec<u32> = (0..n)
            .into_par_iter()
            .map(|v| {
                let mut c = 0u32;
                view.for_each_in_neighbor(m.rel, m.reverse, v, |_, _| c += 1);
                c
            })
            .collect();
        counts.push(c);
    }

    let mut h = vec![h0];
    let mut means = Vec::new();
    for layer in 0..2 {
        let prev = &h[layer];
        let accessor = |t: NodeType, u: usize| prev[t.index()].row(u);
        let layer_means: Vec<Matrix> = MsgRel::ALL
            .iter()
            .map(|&m| {
                let mut mm = Matrix::zeros(graph.num_nodes(m.receiver()), d);
                mm.data_mut()
                    .par_chunks_mut(d)
                    .enumerate()
                    .for_each(|(v, out)| {
                        mean_row(view, m, v, &accessor, out);
                    });
                mm
            })
            .collect();
        let next = NodeType::ALL.map(|t| {
            let rels = msg_into(t);
            let mut out = Matrix::zeros(graph.num_nodes(t), d);
            out.data_mut()
                .par_chunks_mut(d)
                .enumerate()
                .for_each(|(v, row)| {
                    let mut ms: [&[f64]; 4] = [&[]; 4];
                    let mut cs = [0usize; 4];
                    for (k, m) in rels.iter().enumerate() {
                        ms[k] = layer_means[m.index()].row(v);
                        cs[k] = counts[m.index()][v] as usize;
                    }
                    combine_row(
                        w,
                        layer,
                        t,
                        &ms[..rels.len()],
                        &cs[..rels.len()],
                        prev[t.index()].row(v),
                        row,
                    );
                });
            out
        });
        means.push(layer_means);
        h.push(next);
    }
    Ok(ForwardCache { h, means, counts })
}

pub fn forward(
    params: &ModelParams,
    view: &GraphView,
    feats: &NodeFeatures,
) -> Result<EmbeddingTable, ModelError> {
    Ok(forward_cached(params, view, feats)?.embeddings())
}

/// Final embeddings of `targets` only, recomputing just their two-hop
/// receptive field. `h0` comes from [`input_embeddings`] and does not depend
/// on graph structure, so callers perturbing edges compute it once.
pub fn embed_local(
    params: &ModelParams,
    view: &GraphView,
    h0: &[Matrix; 3],
    targets: &[(NodeType, usize)],
) -> Vec<Vec<f64>> {
    let w = &params.weights;
    let d = w.dim();
    let mut needed: Vec<(NodeType, usize)> = Vec::new();
    let mut slot: HashMap<(NodeType, usize), usize> = HashMap::new();
    let mut want = |n: (NodeType, usize), needed: &mut Vec<(NodeType, usize)>| {
        slot.entry(n).or_insert_with(|| {
            needed.push(n);
            needed.len() - 1
        });
    };
    for &(t, v) in targets {
        want((t, v), &mut needed);
        for m in msg_into(t) {
            view.for_each_in_neighbor(m.rel, m.reverse, v, |u, _| {
                want((m.sender(), u), &mut needed)
            });
        }
    }
    let layer0 = |t: NodeType, u: usize| h0[t.index()].row(u);
    let mut h1 = Matrix::zeros(needed.len(), d);
    h1.data_mut()
        .par_chunks_mut(d)
        .zip(needed.par_iter())
        .for_each(|(out, &(t, v))| node_row(w, 0, view, t, v, &layer0, out));
    let layer1 = |t: NodeType, u: usize| h1.row(slot[&(t, u)]);
    targets
        .iter()
        .map(|&(t, v)| {
            let mut out = vec![0.0; d];
            node_row(w, 1, view, t, v, &layer1, &mut out);
            out
        })
        .collect()
}

/// Final embeddings of `targets` on a perturbed view, reusing the
/// unperturbed first-layer outputs `h1` for every node outside `dirty`.
/// `dirty` must contain every endpoint of every masked edge; those are the
/// only nodes whose first-layer output can differ.
pub fn embed_reusing(
    params: &ModelParams,
    view: &GraphView,
    h0: &[Matrix; 3],
    h1: &[Matrix; 3],
    dirty: &[(NodeType, usize)],
    targets: &[(NodeType, usize)],
) -> Vec<Vec<f64>> {
    let w = &params.weights;
    let d = w.dim();
    let layer0 = |t: NodeType, u: usize| h0[t.index()].row(u);
    let mut fresh: HashMap<(NodeType, usize), Vec<f64>> = HashMap::with_capacity(dirty.len());
    for &(t, v) in dirty {
        fresh.entry((t, v)).or_insert_with(|| {
            let mut out = vec![0.0; d];
            node_row(w, 0, view, t, v, &layer0, &mut out);
            out
        });
    }
    let layer1 = |t: NodeType, u: usize| match fresh.get(&(t, u)) {
        Some(r) => r.as_slice(),
        None => h1[t.index()].row(u),
    };
    targets
        .par_iter()
        .map(|&(t, v)| {
            let mut out = vec![0.0; d];
            node_row(w, 1, view, t, v, &layer1, &mut out);
            out
        })
        .collect()
}
