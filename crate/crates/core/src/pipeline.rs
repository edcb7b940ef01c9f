//! Raw files to a training-ready dataset: temporal split, graph construction,
//! feature cleaning and city aggregation, and held-out relevance.

use std::path::Path;

use serde::Serialize;

use crate::gnn::{FeatureDims, NodeFeatures};
use crate::hetgraph::features::DEFAULT_Z_THRESHOLD;
use crate::hetgraph::{
    aggregate_city, build_hetero_graph, clean_numeric, load_cities, load_events, load_regions,
    BuildReport, CityTable, EventTable, FeatureTable, GraphError, HeteroGraph, NodeType,
    RegionTable, Relation,
};
use crate::ranker::RelevanceSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RelevanceMode {
    /// Every city a user touches on the evaluation day.
    #[default]
    All,
    /// Only evaluation-day cities the user never touched during training.
    Unseen,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepareOptions {
    pub z_threshold: f64,
    pub relevance: RelevanceMode,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self {
            z_threshold: DEFAULT_Z_THRESHOLD,
            relevance: RelevanceMode::All,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: HeteroGraph,
    pub listing_features: FeatureTable,
    pub city_features: FeatureTable,
    pub relevance: RelevanceSet,
    pub report: BuildReport,
    /// Events at or after this time form the evaluation day.
    pub eval_cutoff: i64,
    pub train_events: usize,
    pub eval_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub users: usize,
    pub listings: usize,
    pub cities: usize,
    pub views: usize,
    pub saves: usize,
    pub tours: usize,
    pub searched_in: usize,
    pub contains: usize,
    pub train_events: usize,
    pub eval_events: usize,
    pub dropped_events: usize,
    pub eval_cutoff: i64,
    pub relevance_users: usize,
    pub structural_checksum: String,
}

impl Dataset {
    pub fn features(&self) -> NodeFeatures {
        NodeFeatures::from_tables(&self.listing_features, &self.city_features)
    }

    pub fn feature_dims(&self) -> FeatureDims {
        FeatureDims {
            user: self.graph.num_users(),
            listing: self.listing_features.num_features(),
            city: self.city_features.num_features(),
        }
    }

    pub fn manifest(&self) -> Manifest {
        let g = &self.graph;
        let e = |r: Relation| g.edges(r).len();
        Manifest {
            users: g.num_users(),
            listings: g.num_listings(),
            cities: g.num_cities(),
            views: e(Relation::Views),
            saves: e(Relation::Saves),
            tours: e(Relation::Tours),
            searched_in: e(Relation::SearchedIn),
            contains: e(Relation::Contains),
            train_events: self.train_events,
            eval_events: self.eval_events,
            dropped_events: self.report.dropped_events,
            eval_cutoff: self.eval_cutoff,
            relevance_users: self.relevance.values().filter(|r| !r.is_empty()).count(),
            structural_checksum: format!("{:08x}", g.structural_checksum()),
        }
    }
}

/// City populations in graph city order. Without a population table the
/// listing count stands in for population.
fn populations(graph: &HeteroGraph, cities: Option<&CityTable>) -> Vec<f64> {
    let contains = graph.edges(Relation::Contains);
    (0..graph.num_cities())
        .map(|c| {
            let key = &graph.keys(NodeType::City)[c];
            match cities.and_then(|t| t.population.get(key)) {
                Some(&p) => p,
                None => {
                    if cities.is_some() {
                        log::warn!("city {key} missing from population table; using listing count");
                    }
                    contains.outgoing(c).len() as f64
                }
            }
        })
        .collect()
}

pub fn prepare(
    events: &EventTable,
    regions: &RegionTable,
    cities: Option<&CityTable>,
    opts: &PrepareOptions,
) -> Result<Dataset, GraphError> {
    let cutoff = events.last_day_start().ok_or(GraphError::EmptyTable)?;
    let (train, eval) = events.split_at(cutoff);
    if train.is_empty() {
        return Err(GraphError::InvalidParameter(
            "events span a single day; nothing left for training".into(),
        ));
    }
    let (graph, report) = build_hetero_graph(&train, regions)?;
    let listing_features = clean_numeric(regions, opts.z_threshold)?;
    let membership: Vec<usize> = (0..graph.num_listings())
        .map(|l| graph.city_of_listing(l).expect("validated contains edge"))
        .collect();
    let city_features =
        aggregate_city(&listing_features, &membership, &populations(&graph, cities))?;

    let searched = graph.edges(Relation::SearchedIn);
    let mut relevance = RelevanceSet::new();
    for e in &eval.rows {
        let (Some(u), Some(l)) = (
            graph.index_of(NodeType::User, &e.user_id),
            graph.index_of(NodeType::Listing, &e.listing_id),
        ) else {
            continue;
        };
        let c = membership[l];
        if opts.relevance == RelevanceMode::Unseen
            && searched.outgoing(u).iter().any(|&x| searched.dst[x] == c)
        {
            continue;
        }
        relevance.entry(u).or_default().insert(c);
    }
    Ok(Dataset {
        graph,
        listing_features,
        city_features,
        relevance,
        report,
        eval_cutoff: cutoff,
        train_events: train.len(),
        eval_events: eval.len(),
    })
}

pub fn load_dataset(
    events: &Path,
    regions: &Path,
    cities: Option<&Path>,
    opts: &PrepareOptions,
) -> Result<Dataset, GraphError> {
    let ev = load_events(events)?;
    let rg = load_regions(regions)?;
    let ct = cities.map(load_cities).transpose()?;
    prepare(&ev, &rg, ct.as_ref(), opts)
}
