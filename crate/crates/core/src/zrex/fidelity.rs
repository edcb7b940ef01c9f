//! Fidelity: how much a ranking degrades when an explainer's top edges are
//! removed together.

use serde::Serialize;

use super::structural::EdgeAttribution;
use super::{ExplainContext, ExplainError};
use crate::ranker::{ndcg_at_k, top_k, RankError, RelevanceSet};
use crate::tensor::cosine;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityReport {
    pub users: usize,
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub ndcg_base: f64,
    pub ndcg_perturbed: f64,
    /// `100 · (base − perturbed) / base`; zero when the base is zero.
    pub decrease_pct: f64,
    /// Mean change of the user–target cosine similarity.
    pub mean_delta_cos: f64,
    pub mean_removed_edges: f64,
}

/// For each user the explained city is its relevant city the unperturbed
/// model scores highest. `explain(user, city)` supplies the ranked edges.
pub fn fidelity_eval<F>(
    ctx: &ExplainContext,
    explain: F,
    relevance: &RelevanceSet,
    users: &[usize],
    m: usize,
    k: usize,
) -> Result<FidelityReport, ExplainError>
where
    F: Fn(usize, usize) -> Result<EdgeAttribution, ExplainError>,
{
    if m == 0 || k == 0 {
        return Err(ExplainError::InvalidParameter(
            "m and K must be at least 1".into(),
        ));
    }
    let (mut base_sum, mut pert_sum, mut cos_sum, mut removed_sum) = (0.0, 0.0, 0.0, 0usize);
    let mut n = 0usize;
    for &u in users {
        ctx.check_user(u)?;
        let Some(rel) = relevance.get(&u).filter(|r| !r.is_empty()) else {
            log::warn!("user {u} has no relevant city; skipped");
            continue;
        };
        let (hu, cities) = ctx.local_user_and_cities(&[], u);
        let target = *rel
            .iter()
            .max_by(|&&a, &&b| {
                cosine(&hu, cities.row(a))
                    .total_cmp(&cosine(&hu, cities.row(b)))
                    .then(b.cmp(&a))
            })
            .expect("non-empty relevance");
        let ranked = |q: &[f64], c: &crate::tensor::Matrix| -> Result<Vec<usize>, RankError> {
            Ok(top_k(q, c, k)?.into_iter().map(|(c, _)| c).collect())
        };
        let base_ndcg = ndcg_at_k(&ranked(&hu, &cities)?, rel, k);
        let base_cos = cosine(&hu, cities.row(target));

        let attribution = explain(u, target)?;
        let removed = attribution.grounding_of_top(m);
        let (pu, pcities) = ctx.local_user_and_cities(&removed, u);
        let pert_ndcg = ndcg_at_k(&ranked(&pu, &pcities)?, rel, k);
        let pert_cos = cosine(&pu, pcities.row(target));

        base_sum += base_ndcg;
        pert_sum += pert_ndcg;
        cos_sum += pert_cos - base_cos;
        removed_sum += removed.len();
        n += 1;
    }
    if n == 0 {
        return Err(RankError::EmptyRelevance.into());
    }
    let nf = n as f64;
    let (base, pert) = (base_sum / nf, pert_sum / nf);
    Ok(FidelityReport {
        users: n,
        m,
        k,
        ndcg_base: base,
        ndcg_perturbed: pert,
        decrease_pct: if base > 0.0 {
            100.0 * (base - pert) / base
        } else {
            0.0
        },
        mean_delta_cos: cos_sum / nf,
        mean_removed_edges: removed_sum as f64 / nf,
    })
}
