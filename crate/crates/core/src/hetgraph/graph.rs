//! The heterogeneous user/listing/city interaction graph in per-relation CSR form.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::events::{EventTable, EventType};
use super::regions::RegionTable;
use super::GraphError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeType {
    User,
    Listing,
    City,
}

impl NodeType {
    pub const ALL: [NodeType; 3] = [NodeType::User, NodeType::Listing, NodeType::City];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeType::User => "user",
            NodeType::Listing => "listing",
            NodeType::City => "city",
        }
    }
}

/// Canonical edge types. Source and destination node types are fixed per relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Views,
    Saves,
    Tours,
    SearchedIn,
    Contains,
}

impl Relation {
    pub const ALL: [Relation; 5] = [
        Relation::Views,
        Relation::Saves,
        Relation::Tours,
        Relation::SearchedIn,
        Relation::Contains,
    ];

    /// Relations that carry user interactions (and timestamps).
    pub const USER_LISTING: [Relation; 3] = [Relation::Views, Relation::Saves, Relation::Tours];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn src_type(self) -> NodeType {
        match self {
            Relation::Contains => NodeType::City,
            _ => NodeType::User,
        }
    }

    pub fn dst_type(self) -> NodeType {
        match self {
            Relation::SearchedIn => NodeType::City,
            _ => NodeType::Listing,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Relation::Views => "views",
            Relation::Saves => "saves",
            Relation::Tours => "tours",
            Relation::SearchedIn => "searched_in",
            Relation::Contains => "contains",
        }
    }

    pub fn from_event(ty: EventType) -> Relation {
        match ty {
            EventType::View => Relation::Views,
            EventType::Save => Relation::Saves,
            EventType::Tour => Relation::Tours,
        }
    }

    pub fn is_user_incident(self) -> bool {
        self.src_type() == NodeType::User
    }
}

/// One edge of a [`HeteroGraph`]: relation plus edge index within that relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeRef {
    pub rel: Relation,
    pub edge: usize,
}

/// Compressed sparse rows over edge ids, grouped by one endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Csr {
    offsets: Vec<usize>,
    edge_ids: Vec<usize>,
}

impl Csr {
    fn build(num_nodes: usize, keys: &[usize]) -> Self {
        let mut offsets = vec![0usize; num_nodes + 1];
        for &k in keys {
            offsets[k + 1] += 1;
        }
        for i in 0..num_nodes {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut edge_ids = vec![0usize; keys.len()];
        for (e, &k) in keys.iter().enumerate() {
            edge_ids[cursor[k]] = e;
            cursor[k] += 1;
        }
        Self { offsets, edge_ids }
    }

    #[inline]
    pub fn edges_of(&self, node: usize) -> &[usize] {
        &self.edge_ids[self.offsets[node]..self.offsets[node + 1]]
    }

    #[inline]
    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSet {
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    /// Interaction multiplicity (1 for `contains`).
    pub weight: Vec<u32>,
    /// Latest interaction time; empty for `contains`.
    pub timestamp: Vec<i64>,
    out: Csr,
    inc: Csr,
}

impl EdgeSet {
    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    /// Edges leaving `node` (a source-type node).
    #[inline]
    pub fn outgoing(&self, node: usize) -> &[usize] {
        self.out.edges_of(node)
    }

    /// Edges entering `node` (a destination-type node).
    #[inline]
    pub fn incoming(&self, node: usize) -> &[usize] {
        self.inc.edges_of(node)
    }

    pub fn timestamp_of(&self, e: usize) -> Option<i64> {
        self.timestamp.get(e).copied()
    }
}

/// Raw edge used to assemble a graph: `(src, dst, weight, timestamp)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawEdge {
    pub src: usize,
    pub dst: usize,
    pub weight: u32,
    pub timestamp: i64,
}

impl RawEdge {
    pub fn new(src: usize, dst: usize) -> Self {
        Self {
            src,
            dst,
            weight: 1,
            timestamp: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeteroGraph {
    pub user_keys: Vec<String>,
    pub listing_keys: Vec<String>,
    pub city_keys: Vec<String>,
    edges: Vec<EdgeSet>,
}

/// Counts reported by [`build_hetero_graph`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BuildReport {
    pub dropped_events: usize,
}

impl HeteroGraph {
    /// Assembles a graph from index-space edges. Edges of each relation are
    /// merged on `(src, dst)` (weights summed, latest timestamp kept) and
    /// stored sorted by `(src, dst)`.
    pub fn from_parts(
        user_keys: Vec<String>,
        listing_keys: Vec<String>,
        city_keys: Vec<String>,
        raw: BTreeMap<Relation, Vec<RawEdge>>,
    ) -> Result<Self, GraphError> {
        let counts = [user_keys.len(), listing_keys.len(), city_keys.len()];
        let mut edges = Vec::with_capacity(Relation::ALL.len());
        for rel in Relation::ALL {
            let n_src = counts[rel.src_type().index()];
            let n_dst = counts[rel.dst_type().index()];
            let mut merged: BTreeMap<(usize, usize), (u32, i64)> = BTreeMap::new();
            for e in raw.get(&rel).map(Vec::as_slice).unwrap_or(&[]) {
                if e.src >= n_src || e.dst >= n_dst {
                    return Err(GraphError::IndexOutOfRange {
                        relation: rel.name(),
                        src: e.src,
                        dst: e.dst,
                    });
                }
                let slot = merged.entry((e.src, e.dst)).or_insert((0, i64::MIN));
                slot.0 += e.weight;
                slot.1 = slot.1.max(e.timestamp);
            }
            let mut src = Vec::with_capacity(merged.len());
            let mut dst = Vec::with_capacity(merged.len());
            let mut weight = Vec::with_capacity(merged.len());
            let mut timestamp = Vec::new();
            for ((s, d), (w, t)) in merged {
                src.push(s);
                dst.push(d);
                weight.push(w);
                if rel.is_user_incident() {
                    timestamp.push(t);
                }
            }
            let out = Csr::build(n_src, &src);
            let inc = Csr::build(n_dst, &dst);
            edges.push(EdgeSet {
                src,
                dst,
                weight,
                timestamp,
                out,
                inc,
            });
        }
        Ok(Self {
            user_keys,
            listing_keys,
            city_keys,
            edges,
        })
    }

    /// Graph with generated keys (`u0`, `l0`, `c0`, ...), mostly for tests.
    pub fn from_index_edges(
        n_users: usize,
        n_listings: usize,
        n_cities: usize,
        raw: BTreeMap<Relation, Vec<RawEdge>>,
    ) -> Result<Self, GraphError> {
        let keys = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        Self::from_parts(
            keys("u", n_users),
            keys("l", n_listings),
            keys("c", n_cities),
            raw,
        )
    }

    pub fn num_nodes(&self, t: NodeType) -> usize {
        match t {
            NodeType::User => self.user_keys.len(),
            NodeType::Listing => self.listing_keys.len(),
            NodeType::City => self.city_keys.len(),
        }
    }

    pub fn num_users(&self) -> usize {
        self.user_keys.len()
    }

    pub fn num_listings(&self) -> usize {
        self.listing_keys.len()
    }

    pub fn num_cities(&self) -> usize {
        self.city_keys.len()
    }

    #[inline]
    pub fn edges(&self, rel: Relation) -> &EdgeSet {
        &self.edges[rel.index()]
    }

    pub fn num_edges(&self) -> usize {
        self.edges.iter().map(EdgeSet::len).sum()
    }

    pub fn keys(&self, t: NodeType) -> &[String] {
        match t {
            NodeType::User => &self.user_keys,
            NodeType::Listing => &self.listing_keys,
            NodeType::City => &self.city_keys,
        }
    }

    pub fn index_of(&self, t: NodeType, key: &str) -> Option<usize> {
        self.keys(t).iter().position(|k| k == key)
    }

    /// City of a listing via its incoming `contains` edge.
    pub fn city_of_listing(&self, listing: usize) -> Option<usize> {
        let cont = self.edges(Relation::Contains);
        cont.incoming(listing).first().map(|&e| cont.src[e])
    }

    /// Endpoints of an edge as `((src type, src), (dst type, dst))`.
    pub fn endpoints(&self, e: EdgeRef) -> ((NodeType, usize), (NodeType, usize)) {
        let set = self.edges(e.rel);
        (
            (e.rel.src_type(), set.src[e.edge]),
            (e.rel.dst_type(), set.dst[e.edge]),
        )
    }

    /// Checks endpoint ranges, CSR consistency and that `contains` covers
    /// every listing exactly once.
    pub fn validate(&self) -> Result<(), GraphError> {
        for rel in Relation::ALL {
            let set = self.edges(rel);
            let n_src = self.num_nodes(rel.src_type());
            let n_dst = self.num_nodes(rel.dst_type());
            let mut out_total = 0;
            for s in 0..n_src {
                for &e in set.outgoing(s) {
                    if set.src[e] != s {
                        return Err(GraphError::Invalid(format!("{}: csr mismatch", rel.name())));
                    }
                }
                out_total += set.out.degree(s);
            }
            let mut in_total = 0;
            for d in 0..n_dst {
                for &e in set.incoming(d) {
                    if set.dst[e] != d {
                        return Err(GraphError::Invalid(format!("{}: csr mismatch", rel.name())));
                    }
                }
                in_total += set.inc.degree(d);
            }
            if out_total != set.len() || in_total != set.len() {
                return Err(GraphError::Invalid(format!(
                    "{}: csr size mismatch",
                    rel.name()
                )));
            }
        }
        let cont = self.edges(Relation::Contains);
        for l in 0..self.num_listings() {
            if cont.incoming(l).len() != 1 {
                return Err(GraphError::Invalid(format!(
                    "listing {} has {} contains edges",
                    self.listing_keys[l],
                    cont.incoming(l).len()
                )));
            }
        }
        Ok(())
    }

    /// CRC32 over node counts and every edge array.
    pub fn structural_checksum(&self) -> u32 {
        let mut h = crc32fast::Hasher::new();
        for t in NodeType::ALL {
            h.update(&(self.num_nodes(t) as u64).to_le_bytes());
        }
        for set in &self.edges {
            h.update(&(set.len() as u64).to_le_bytes());
            for i in 0..set.len() {
                h.update(&(set.src[i] as u64).to_le_bytes());
                h.update(&(set.dst[i] as u64).to_le_bytes());
                h.update(&set.weight[i].to_le_bytes());
            }
            for t in &set.timestamp {
                h.update(&t.to_le_bytes());
            }
        }
        h.finalize()
    }
}

/// Removal mask over graph edges. Perturbations never mutate the graph; they
/// run the model through a [`GraphView`] carrying a mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMask {
    removed: Vec<Vec<bool>>,
    count: usize,
}

impl EdgeMask {
    pub fn new(g: &HeteroGraph) -> Self {
        Self {
            removed: Relation::ALL
                .iter()
                .map(|r| vec![false; g.edges(*r).len()])
                .collect(),
            count: 0,
        }
    }

    pub fn remove(&mut self, e: EdgeRef) {
        let slot = &mut self.removed[e.rel.index()][e.edge];
        if !*slot {
            *slot = true;
            self.count += 1;
        }
    }

    #[inline]
    pub fn is_removed(&self, rel: Relation, edge: usize) -> bool {
        self.removed[rel.index()][edge]
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn removed_edges(&self) -> Vec<EdgeRef> {
        let mut out = Vec::with_capacity(self.count);
        for rel in Relation::ALL {
            for (edge, &r) in self.removed[rel.index()].iter().enumerate() {
                if r {
                    out.push(EdgeRef { rel, edge });
                }
            }
        }
        out
    }
}

/// A graph seen through an optional removal mask.
#[derive(Debug, Clone, Copy)]
pub struct GraphView<'a> {
    pub graph: &'a HeteroGraph,
    pub mask: Option<&'a EdgeMask>,
}

impl<'a> GraphView<'a> {
    pub fn new(graph: &'a HeteroGraph) -> Self {
        Self { graph, mask: None }
    }

    pub fn masked(graph: &'a HeteroGraph, mask: &'a EdgeMask) -> Self {
        Self {
            graph,
            mask: Some(mask),
        }
    }

    #[inline]
    pub fn is_live(&self, rel: Relation, edge: usize) -> bool {
        self.mask.is_none_or(|m| !m.is_removed(rel, edge))
    }

    /// Neighbors of `node` along `rel`, following the edge forward
    /// (`reverse == false`: `node` is a destination, neighbors are sources)
    /// or backward (`reverse == true`: `node` is a source, neighbors are
    /// destinations). Masked edges are skipped.
    pub fn for_each_in_neighbor(
        &self,
        rel: Relation,
        reverse: bool,
        node: usize,
        mut f: impl FnMut(usize, usize),
    ) {
        let set = self.graph.edges(rel);
        if reverse {
            for &e in set.outgoing(node) {
                if self.is_live(rel, e) {
                    f(set.dst[e], e);
                }
            }
        } else {
            for &e in set.incoming(node) {
                if self.is_live(rel, e) {
                    f(set.src[e], e);
                }
            }
        }
    }
}

/// Builds the interaction graph from the event log and listing metadata.
///
/// Users are indexed by first appearance in `events`; listings and cities by
/// first appearance in `regions`. Events naming unknown listings are dropped
/// and counted. Each `(user, listing, type)` becomes one edge weighted by
/// multiplicity; each `(user, city of listing)` pair becomes a `searched_in`
/// edge; each listing gets one `contains` edge from its city.
pub fn build_hetero_graph(
    events: &EventTable,
    regions: &RegionTable,
) -> Result<(HeteroGraph, BuildReport), GraphError> {
    regions.membership()?;
    let mut city_index: HashMap<&str, usize> = HashMap::new();
    let mut city_keys = Vec::new();
    let mut listing_index: HashMap<&str, usize> = HashMap::with_capacity(regions.len());
    let mut listing_keys = Vec::with_capacity(regions.len());
    let mut listing_city = Vec::with_capacity(regions.len());
    for row in &regions.rows {
        let c = *city_index.entry(row.city_id.as_str()).or_insert_with(|| {
            city_keys.push(row.city_id.clone());
            city_keys.len() - 1
        });
        listing_index.insert(row.listing_id.as_str(), listing_keys.len());
        listing_keys.push(row.listing_id.clone());
        listing_city.push(c);
    }

    let mut user_index: HashMap<&str, usize> = HashMap::new();
    let mut user_keys = Vec::new();
    let mut raw: BTreeMap<Relation, Vec<RawEdge>> = BTreeMap::new();
    let mut report = BuildReport::default();
    for ev in &events.rows {
        let Some(&l) = listing_index.get(ev.listing_id.as_str()) else {
            report.dropped_events += 1;
            continue;
        };
        let u = *user_index.entry(ev.user_id.as_str()).or_insert_with(|| {
            user_keys.push(ev.user_id.clone());
            user_keys.len() - 1
        });
        let edge = RawEdge {
            src: u,
            dst: l,
            weight: 1,
            timestamp: ev.timestamp,
        };
        raw.entry(Relation::from_event(ev.event_type))
            .or_default()
            .push(edge);
        raw.entry(Relation::SearchedIn).or_default().push(RawEdge {
            dst: listing_city[l],
            ..edge
        });
    }
    if report.dropped_events > 0 {
        log::warn!(
            "dropped {} events referencing unknown listings",
            report.dropped_events
        );
    }
    raw.insert(
        Relation::Contains,
        listing_city
            .iter()
            .enumerate()
            .map(|(l, &c)| RawEdge::new(c, l))
            .collect(),
    );
    let g = HeteroGraph::from_parts(user_keys, listing_keys, city_keys, raw)?;
    Ok((g, report))
}
