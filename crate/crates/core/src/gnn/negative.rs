//! Negative sampling over the scored user relations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::SCORED_RELATIONS;
use super::ModelError;
use crate::hetgraph::{HeteroGraph, Relation};

/// One sampled non-edge paired with the positive edge it contrasts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NegPair {
    pub rel: Relation,
    /// Index of the positive edge within `rel`.
    pub pos_edge: usize,
    /// Destination of the corrupted edge; its source is the positive's source.
    pub neg_dst: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegGraph {
    pub ratio: usize,
    pub pairs: Vec<NegPair>,
    /// `(relation, user)` whose positives were skipped for lack of candidates.
    pub skipped: Vec<(Relation, usize)>,
}

impl NegGraph {
    /// Sampled non-edges of `rel` as `(src, dst)`.
    pub fn negatives(&self, g: &HeteroGraph, rel: Relation) -> Vec<(usize, usize)> {
        let set = g.edges(rel);
        self.pairs
            .iter()
            .filter(|p| p.rel == rel)
            .map(|p| (set.src[p.pos_edge], p.neg_dst))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Destinations each user is adjacent to, sorted. For listing relations this
/// is the union over views, saves and tours.
fn excluded(g: &HeteroGraph, rel: Relation) -> Vec<Vec<usize>> {
    let rels: &[Relation] = if rel == Relation::SearchedIn {
        &[Relation::SearchedIn]
    } else {
        &Relation::USER_LISTING
    };
    let mut out = vec![Vec::new(); g.num_users()];
    for &r in rels {
        let set = g.edges(r);
        for e in 0..set.len() {
            out[set.src[e]].push(set.dst[e]);
        }
    }
    for v in &mut out {
        v.sort_unstable();
        v.dedup();
    }
    out
}

/// Draws `ratio` non-neighbors per positive edge of every scored relation,
/// uniformly with replacement. Users adjacent to every candidate are skipped
/// and reported; it is an error only when nothing at all can be sampled.
pub fn sample_negative_graph(
    g: &HeteroGraph,
    ratio: usize,
    seed: u64,
) -> Result<NegGraph, ModelError> {
    if ratio == 0 {
        return Err(ModelError::InvalidParameter(
            "negative ratio must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for rel in SCORED_RELATIONS {
        let set = g.edges(rel);
        if set.is_empty() {
            continue;
        }
        let n_dst = g.num_nodes(rel.dst_type());
        let excl = excluded(g, rel);
        let mut complement_cache: Option<(usize, Vec<usize>)> = None;
        for e in 0..set.len() {
            let u = set.src[e];
            let adj = &excl[u];
            let n_cand = n_dst - adj.len();
            if n_cand == 0 {
                if skipped.last() != Some(&(rel, u)) {
                    skipped.push((rel, u));
                }
                continue;
            }
            // Rejection sampling is fine unless the user covers most candidates.
            let dense = n_cand * 4 < n_dst;
            if dense && complement_cache.as_ref().is_none_or(|(cu, _)| *cu != u) {
                let comp = (0..n_dst)
                    .filter(|x| adj.binary_search(x).is_err())
                    .collect();
                complement_cache = Some((u, comp));
            }
            for _ in 0..ratio {
                let neg_dst = if dense {
                    let comp = &complement_cache.as_ref().expect("complement built").1;
                    comp[rng.gen_range(0..comp.len())]
                } else {
                    loop {
                        let x = rng.gen_range(0..n_dst);
                        if adj.binary_search(&x).is_err() {
                            break x;
                        }
                    }
                };
                pairs.push(NegPair {
                    rel,
                    pos_edge: e,
                    neg_dst,
                });
            }
        }
    }
    if pairs.is_empty() {
        return Err(ModelError::NoNegativeCandidates);
    }
    for (rel, u) in &skipped {
        log::warn!("user {u} has no negative candidates for {}", rel.name());
    }
    Ok(NegGraph {
        ratio,
        pairs,
        skipped,
    })
}
