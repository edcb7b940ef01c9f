//! Raw table ingestion, feature cleaning, and the heterogeneous interaction
//! graph with its derived views.

use std::path::PathBuf;

pub mod collapse;
pub mod events;
pub mod features;
pub mod graph;
pub mod regions;

pub use collapse::{
    collapse_user_city, k_hop_subgraph, CollapsedEdge, SubEdge, Subgraph, UserCityGraph,
};
pub use events::{load_events, read_events, Event, EventTable, EventType};
pub use features::{aggregate_city, clean_column, clean_numeric, FeatureColumn, FeatureTable};
pub use graph::{
    build_hetero_graph, BuildReport, EdgeMask, EdgeRef, GraphView, HeteroGraph, NodeType, RawEdge,
    Relation,
};
pub use regions::{
    load_cities, load_regions, read_cities, read_regions, CityTable, ColumnKind, RegionRow,
    RegionTable,
};

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("empty table")]
    EmptyTable,
    #[error("city index {0} has no listings")]
    CityWithNoListings(usize),
    #[error("listing {listing} maps to both {first} and {second}")]
    InconsistentMembership {
        listing: String,
        first: String,
        second: String,
    },
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("{relation} edge ({src}, {dst}) out of range")]
    IndexOutOfRange {
        relation: &'static str,
        src: usize,
        dst: usize,
    },
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
