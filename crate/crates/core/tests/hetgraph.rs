mod common;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zrex_core::hetgraph::{
    build_hetero_graph, collapse_user_city, k_hop_subgraph, read_events, read_regions, Event,
    EventTable, EventType, HeteroGraph, NodeType, Relation, UserCityGraph,
};

/// Distances from `center` by plain BFS over the collapsed edge list.
fn bfs(g: &UserCityGraph, center: usize) -> Vec<Option<usize>> {
    let mut adj = vec![Vec::new(); g.num_nodes()];
    for e in &g.edges {
        let (u, c) = (g.user_node(e.user), g.city_node(e.city));
        adj[u].push(c);
        adj[c].push(u);
    }
    let mut dist = vec![None; g.num_nodes()];
    dist[center] = Some(0);
    let mut q = VecDeque::from([center]);
    while let Some(v) = q.pop_front() {
        for &w in &adj[v] {
            if dist[w].is_none() {
                dist[w] = Some(dist[v].unwrap() + 1);
                q.push_back(w);
            }
        }
    }
    dist
}

/// Collapsed pairs recomputed from the raw relations.
fn pairs_by_hand(g: &HeteroGraph) -> BTreeMap<(usize, usize), usize> {
    let mut out: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let s = g.edges(Relation::SearchedIn);
    for e in 0..s.len() {
        *out.entry((s.src[e], s.dst[e])).or_default() += 1;
    }
    for rel in Relation::USER_LISTING {
        let set = g.edges(rel);
        for e in 0..set.len() {
            let c = g.city_of_listing(set.dst[e]).unwrap();
            *out.entry((set.src[e], c)).or_default() += 1;
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn collapse_matches_raw_relations(seed in any::<u64>(), users in 1usize..12, extra in 0usize..10, cities in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = common::random_hetero(&mut rng, users, cities + extra, cities);
        g.validate().unwrap();
        let cg = collapse_user_city(&g);
        let got: BTreeMap<(usize, usize), usize> =
            cg.edges.iter().map(|e| ((e.user, e.city), e.weight)).collect();
        prop_assert_eq!(got.len(), cg.edges.len());
        prop_assert_eq!(&got, &pairs_by_hand(&g));
        for e in &cg.edges {
            prop_assert_eq!(e.weight, e.backing.len());
            for &b in &e.backing {
                let ((st, s), (dt, d)) = g.endpoints(b);
                prop_assert_eq!((st, s), (NodeType::User, e.user));
                let city = if dt == NodeType::City { d } else { g.city_of_listing(d).unwrap() };
                prop_assert_eq!(city, e.city);
            }
            prop_assert_eq!(cg.edge_between(e.user, e.city).map(|i| &cg.edges[i]), Some(e));
        }
        let degrees: usize = (0..cg.num_nodes()).map(|v| cg.degree(v)).sum();
        prop_assert_eq!(degrees, 2 * cg.edges.len());
    }

    #[test]
    fn khop_is_bfs_ball_and_monotone(seed in any::<u64>(), users in 1usize..12, cities in 1usize..6, pick in any::<usize>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = common::random_hetero(&mut rng, users, cities + 3, cities);
        let cg = collapse_user_city(&g);
        let center = pick % cg.num_nodes();
        let dist = bfs(&cg, center);
        let mut prev: Option<BTreeSet<usize>> = None;
        for k in 1..6 {
            let sub = k_hop_subgraph(&cg, center, k).unwrap();
            let want: Vec<usize> = (0..cg.num_nodes()).filter(|&v| dist[v].is_some_and(|d| d <= k)).collect();
            prop_assert_eq!(&sub.nodes, &want);
            let want_edges: Vec<usize> = cg.edges.iter().enumerate()
                .filter(|(_, e)| sub.contains_node(cg.user_node(e.user)) && sub.contains_node(cg.city_node(e.city)))
                .map(|(i, _)| i)
                .collect();
            prop_assert_eq!(sub.edges.iter().map(|e| e.collapsed).collect::<Vec<_>>(), want_edges);
            let now: BTreeSet<usize> = sub.nodes.iter().copied().collect();
            if let Some(p) = &prev {
                prop_assert!(p.is_subset(&now));
            }
            prev = Some(now);
        }
    }
}

#[test]
fn khop_rejects_unknown_center_and_zero_radius() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = common::random_hetero(&mut rng, 3, 4, 2);
    let cg = collapse_user_city(&g);
    assert!(k_hop_subgraph(&cg, cg.num_nodes(), 1).is_err());
    assert!(k_hop_subgraph(&cg, 0, 0).is_err());
}

#[test]
fn events_and_regions_build_through_text() {
    let regions = "listing_id,city_id\nA,X\nB,X\nC,Y\n";
    let regions = regions.replace(
        "listing_id,city_id",
        &zrex_core::hetgraph::regions::regions_header().join(","),
    );
    // pad missing numeric columns
    let width = zrex_core::hetgraph::regions::regions_header().len();
    let mut body = String::new();
    for (i, line) in regions.lines().enumerate() {
        body.push_str(line);
        if i > 0 {
            body.push_str(&",".repeat(width - 2));
        }
        body.push('\n');
    }
    let rg = read_regions(body.as_bytes()).unwrap();
    let ev = read_events(
        "user_id,listing_id,event_type,timestamp\nu,A,view,10\nu,A,view,20\nu,C,save,30\nv,B,tour,40\nw,Z,view,50\n"
            .as_bytes(),
    )
    .unwrap();
    assert_eq!(ev.len(), 5);
    let (g, report) = build_hetero_graph(&ev, &rg).unwrap();
    assert_eq!(report.dropped_events, 1);
    assert_eq!(g.num_users(), 2);
    assert_eq!(g.num_listings(), 3);
    assert_eq!(g.num_cities(), 2);
    let views = g.edges(Relation::Views);
    assert_eq!((views.len(), views.weight[0]), (1, 2));
    assert_eq!(views.timestamp_of(0), Some(20));
    assert_eq!(g.edges(Relation::SearchedIn).len(), 3);
    assert_eq!(g.edges(Relation::Contains).len(), 3);
    let cg = collapse_user_city(&g);
    // u-X: searched_in + views; u-Y: searched_in + saves; v-X: searched_in + tours
    assert_eq!(
        cg.edges.iter().map(|e| e.weight).collect::<Vec<_>>(),
        vec![2, 2, 2]
    );
}

#[test]
fn event_csv_round_trip_preserves_rows() {
    let rows: Vec<Event> = (0..40)
        .map(|i| Event {
            user_id: format!("user{}", i % 7),
            listing_id: format!("l{}", i % 11),
            event_type: EventType::ALL[i % 3],
            timestamp: 1_000 + 37 * i as i64,
        })
        .collect();
    let t = EventTable::new(rows);
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    assert_eq!(read_events(buf.as_slice()).unwrap(), t);
}
