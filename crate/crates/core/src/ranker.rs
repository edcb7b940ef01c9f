//! Cosine retrieval, nDCG@K, and the histogram / random baselines.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gnn::EmbeddingTable;
use crate::hetgraph::{HeteroGraph, NodeType, Relation};
use crate::tensor::{dot, norm, Matrix};

pub const DEFAULT_KS: [usize; 4] = [1, 3, 5, 10];

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RankError {
    #[error("no user has a relevant city")]
    EmptyRelevance,
    #[error("K must be at least 1")]
    InvalidK,
    #[error("K = {k} exceeds the {n} available cities")]
    KTooLarge { k: usize, n: usize },
}

/// Ordered `(city, score)` list for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub user: usize,
    pub items: Vec<(usize, f64)>,
}

impl Ranking {
    pub fn cities(&self) -> Vec<usize> {
        self.items.iter().map(|&(c, _)| c).collect()
    }
}

/// Held-out relevant cities per user.
pub type RelevanceSet = BTreeMap<usize, BTreeSet<usize>>;

/// L2-normalized copy; zero rows stay zero and are reported.
pub fn normalize(emb: &EmbeddingTable) -> (EmbeddingTable, Vec<(NodeType, usize)>) {
    let mut zero_rows = Vec::new();
    let mut out = emb.clone();
    for t in NodeType::ALL {
        let m = &mut out.tables[t.index()];
        for r in 0..m.rows() {
            let row = m.row_mut(r);
            let n = norm(row);
            if n == 0.0 {
                zero_rows.push((t, r));
            } else {
                for x in row.iter_mut() {
                    *x /= n;
                }
            }
        }
    }
    (out, zero_rows)
}

/// Descending by score, ascending index on ties.
fn sort_scored(items: &mut [(usize, f64)]) {
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

/// Exact top-`k` cities by cosine similarity to `query`. Returns every city
/// when `k` exceeds the candidate count.
pub fn top_k(query: &[f64], cities: &Matrix, k: usize) -> Result<Vec<(usize, f64)>, RankError> {
    if k == 0 {
        return Err(RankError::InvalidK);
    }
    let qn = norm(query);
    let mut scored: Vec<(usize, f64)> = (0..cities.rows())
        .map(|c| {
            let row = cities.row(c);
            let cn = norm(row);
            let s = if qn == 0.0 || cn == 0.0 {
                0.0
            } else {
                dot(query, row) / (qn * cn)
            };
            (c, s)
        })
        .collect();
    sort_scored(&mut scored);
    scored.truncate(k);
    Ok(scored)
}

/// Model ranking for `user` from (possibly unnormalized) embeddings.
pub fn model_ranking(emb: &EmbeddingTable, user: usize, k: usize) -> Result<Ranking, RankError> {
    Ok(Ranking {
        user,
        items: top_k(emb.row(NodeType::User, user), emb.get(NodeType::City), k)?,
    })
}

/// Binary-relevance nDCG with a `log2(i + 1)` discount. Zero when nothing is
/// relevant.
pub fn ndcg_at_k(ranking: &[usize], relevant: &BTreeSet<usize>, k: usize) -> f64 {
    if relevant.is_empty() || k == 0 {
        return 0.0;
    }
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, c)| relevant.contains(c))
        .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
        .sum();
    let idcg: f64 = (0..relevant.len().min(k))
        .map(|i| 1.0 / ((i + 2) as f64).log2())
        .sum();
    dcg / idcg
}

/// Global city popularity: summed `searched_in` multiplicities, which count
/// every user-city interaction including the inferred ones.
pub fn city_popularity(g: &HeteroGraph) -> Vec<f64> {
    let mut pop = vec![0.0; g.num_cities()];
    let set = g.edges(Relation::SearchedIn);
    for e in 0..set.len() {
        pop[set.dst[e]] += set.weight[e] as f64;
    }
    pop
}

/// Most popular cities first; identical for every user.
pub fn histogram_ranking(popularity: &[f64], k: usize) -> Result<Vec<(usize, f64)>, RankError> {
    if k == 0 {
        return Err(RankError::InvalidK);
    }
    let mut items: Vec<(usize, f64)> = popularity.iter().copied().enumerate().collect();
    sort_scored(&mut items);
    items.truncate(k);
    Ok(items)
}

/// Uniform sample of `k` distinct cities. The stream depends only on `seed`
/// and `user`, so results do not depend on evaluation order.
pub fn random_ranking(
    n_cities: usize,
    k: usize,
    seed: u64,
    user: usize,
) -> Result<Vec<(usize, f64)>, RankError> {
    if k == 0 {
        return Err(RankError::InvalidK);
    }
    if k > n_cities {
        return Err(RankError::KTooLarge { k, n: n_cities });
    }
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (user as u64).wrapping_mul(0xA24B_AED4_963E_E407));
    Ok(rand::seq::index::sample(&mut rng, n_cities, k)
        .into_iter()
        .enumerate()
        .map(|(i, c)| (c, (k - i) as f64))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub ndcg: f64,
    pub n_users: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub method: String,
    pub rows: Vec<MetricRow>,
}

impl MetricTable {
    pub fn ndcg_at(&self, k: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.k == k).map(|r| r.ndcg)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("K\tndcg\tn_users\n");
        for r in &self.rows {
            writeln!(s, "{}\t{:.6}\t{}", r.k, r.ndcg, r.n_users).expect("write to string");
        }
        s
    }
}

/// Mean nDCG@K per `K` over users with at least one relevant city.
/// `recommend(user, k_max)` returns the user's ranked cities.
pub fn evaluate<F>(
    method: &str,
    recommend: F,
    relevance: &RelevanceSet,
    ks: &[usize],
) -> Result<MetricTable, RankError>
where
    F: Fn(usize, usize) -> Result<Vec<usize>, RankError> + Sync,
{
    if ks.contains(&0) {
        return Err(RankError::InvalidK);
    }
    let users: Vec<(&usize, &BTreeSet<usize>)> =
        relevance.iter().filter(|(_, r)| !r.is_empty()).collect();
    if users.is_empty() {
        return Err(RankError::EmptyRelevance);
    }
    let k_max = ks.iter().copied().max().unwrap_or(1);
    let per_user: Vec<Vec<f64>> = users
        .par_iter()
        .map(|(&u, rel)| {
            let ranking = recommend(u, k_max)?;
            Ok(ks.iter().map(|&k| ndcg_at_k(&ranking, rel, k)).collect())
        })
        .collect::<Result<_, RankError>>()?;
    let n = users.len();
    let rows = ks
        .iter()
        .enumerate()
        .map(|(j, &k)| MetricRow {
            k,
            ndcg: per_user.iter().map(|v| v[j]).sum::<f64>() / n as f64,
            n_users: n,
        })
        .collect();
    Ok(MetricTable {
        method: method.to_string(),
        rows,
    })
}
