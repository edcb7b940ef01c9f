//! Feature importance by zeroing city feature columns and re-ranking.

use serde::Serialize;

use super::ExplainError;
use crate::gnn::{forward, ModelParams, NodeFeatures};
use crate::hetgraph::{GraphView, HeteroGraph};
use crate::ranker::{evaluate, model_ranking, RelevanceSet};
use crate::tensor::Matrix;

/// Which city rows a feature is zeroed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroScope {
    #[default]
    AllCities,
    /// Only the explained city's row.
    Target(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureScore {
    pub name: String,
    pub column: usize,
    /// Baseline minus perturbed nDCG@K; positive means the feature helps.
    pub delta_ndcg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureAttribution {
    #[serde(rename = "K")]
    pub k: usize,
    pub baseline: f64,
    /// Descending by `delta_ndcg`, column order on ties.
    pub features: Vec<FeatureScore>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub j: usize,
    pub ndcg: f64,
}

/// Mean nDCG@K of the model's rankings over users with relevant cities.
pub fn model_ndcg(
    params: &ModelParams,
    graph: &HeteroGraph,
    feats: &NodeFeatures,
    relevance: &RelevanceSet,
    k: usize,
) -> Result<f64, ExplainError> {
    let emb = forward(params, &GraphView::new(graph), feats)?;
    let table = evaluate(
        "model",
        |u, kk| Ok(model_ranking(&emb, u, kk)?.cities()),
        relevance,
        &[k],
    )?;
    Ok(table.rows[0].ndcg)
}

fn check(params: &ModelParams, k: usize) -> Result<(), ExplainError> {
    if params.steps == 0 {
        return Err(ExplainError::UntrainedModel);
    }
    if k == 0 {
        return Err(ExplainError::InvalidParameter(
            "K must be at least 1".into(),
        ));
    }
    Ok(())
}

fn zeroed(city: &Matrix, col: usize, scope: ZeroScope) -> Option<Matrix> {
    let rows: Vec<usize> = match scope {
        ZeroScope::AllCities => (0..city.rows()).collect(),
        ZeroScope::Target(c) => vec![c],
    };
    if rows.iter().all(|&r| city.get(r, col) == 0.0) {
        return None;
    }
    let mut m = city.clone();
    for r in rows {
        m.set(r, col, 0.0);
    }
    Some(m)
}

/// Orders by `delta_ndcg` descending, column ascending on ties.
pub fn sort_scores(scores: &mut [FeatureScore]) {
    scores.sort_by(|a, b| {
        b.delta_ndcg
            .total_cmp(&a.delta_ndcg)
            .then(a.column.cmp(&b.column))
    });
}

/// Zeroes each city feature column in turn and records the nDCG@K drop.
/// `columns` names the city feature columns in matrix order.
pub fn feature_perturb(
    params: &ModelParams,
    graph: &HeteroGraph,
    feats: &NodeFeatures,
    columns: &[String],
    relevance: &RelevanceSet,
    k: usize,
    scope: ZeroScope,
) -> Result<FeatureAttribution, ExplainError> {
    check(params, k)?;
    if columns.len() != feats.city.cols() {
        return Err(ExplainError::InvalidParameter(format!(
            "{} column names for {} city features",
            columns.len(),
            feats.city.cols()
        )));
    }
    if let ZeroScope::Target(c) = scope {
        if c >= feats.city.rows() {
            return Err(ExplainError::UnknownNode(format!("city index {c}")));
        }
    }
    let baseline = model_ndcg(params, graph, feats, relevance, k)?;
    let mut features = Vec::with_capacity(columns.len());
    for (col, name) in columns.iter().enumerate() {
        let delta = match zeroed(&feats.city, col, scope) {
            None => 0.0,
            Some(city) => {
                let perturbed = NodeFeatures::new(feats.listing.clone(), city);
                baseline - model_ndcg(params, graph, &perturbed, relevance, k)?
            }
        };
        log::debug!("feature {name}: delta nDCG@{k} = {delta:.6}");
        features.push(FeatureScore {
            name: name.clone(),
            column: col,
            delta_ndcg: delta,
        });
    }
    sort_scores(&mut features);
    Ok(FeatureAttribution {
        k,
        baseline,
        features,
    })
}

/// nDCG@K keeping only the top-`j` attributed city features, for
/// `j = 1..=|F|`. The last point uses every feature.
pub fn sequential_feature_eval(
    params: &ModelParams,
    graph: &HeteroGraph,
    feats: &NodeFeatures,
    attribution: &FeatureAttribution,
    relevance: &RelevanceSet,
) -> Result<Vec<CurvePoint>, ExplainError> {
    check(params, attribution.k)?;
    let order: Vec<usize> = attribution.features.iter().map(|f| f.column).collect();
    let mut curve = Vec::with_capacity(order.len());
    for j in 1..=order.len() {
        let mut city = feats.city.clone();
        for &col in &order[j..] {
            for r in 0..city.rows() {
                city.set(r, col, 0.0);
            }
        }
        let f = NodeFeatures::new(feats.listing.clone(), city);
        curve.push(CurvePoint {
            j,
            ndcg: model_ndcg(params, graph, &f, relevance, attribution.k)?,
        });
    }
    Ok(curve)
}
