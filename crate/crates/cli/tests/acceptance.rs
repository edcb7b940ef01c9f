//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeSet, VecDeque};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zrex_cli::{cmd_explain, cmd_synth, cmd_train, RunConfig};
use zrex_core::gnn::loss::graph_loss;
use zrex_core::gnn::{
    forward, init_params, loss_and_gradients, sample_negative_graph, train, FeatureDims, Hyper,
    ModelParams, TrainConfig, Weights,
};
use zrex_core::hetgraph::{
    collapse_user_city, k_hop_subgraph, EdgeMask, EdgeRef, GraphView, HeteroGraph, NodeType,
    Relation,
};
use zrex_core::pipeline::{prepare, Dataset, PrepareOptions};
use zrex_core::ranker::{
    city_popularity, evaluate, histogram_ranking, model_ranking, ndcg_at_k, random_ranking,
};
use zrex_core::synthgen::{
    generate, GroundTruth, PlantedMode, SynthConfig, DECOY_COLUMNS, PLANTED_FEATURE,
};
use zrex_core::tensor::cosine;
use zrex_core::zrex::{
    edge_betweenness, feature_perturb, fidelity_eval, find_coclick_edges, random_edge_explainer,
    structural_perturb, CandidateEdge, EdgeKind, ExplainContext, Explanation, Strategy, ZeroScope,
};

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: u32, name: &'static str, pass: bool, detail: String) -> Outcome {
    let o = Outcome {
        id,
        name,
        pass,
        detail,
    };
    println!(
        "{} [{:>2}] {}: {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.id,
        o.name,
        o.detail
    );
    o
}

fn synth_dataset(cfg: &SynthConfig) -> (zrex_core::synthgen::SynthData, Dataset) {
    let data = generate(cfg).expect("generate");
    let ds = prepare(
        &data.events,
        &data.regions,
        Some(&data.cities),
        &PrepareOptions::default(),
    )
    .expect("prepare");
    (data, ds)
}

fn fit(ds: &Dataset, d: usize, epochs: usize, seed: u64) -> ModelParams {
    let p = init_params(ds.feature_dims(), d, Hyper::default(), seed).unwrap();
    let cfg = TrainConfig {
        epochs,
        seed,
        ..TrainConfig::default()
    };
    train(p, &ds.graph, &ds.features(), &cfg, None)
        .expect("train")
        .params
}

// 1

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let g = common::random_hetero(&mut rng, 6, 8, 4);
    let feats = common::random_features(&mut rng, &g, 3, 4);
    let nodes = g.num_users() + g.num_listings() + g.num_cities();
    let dims = FeatureDims {
        user: g.num_users(),
        listing: 3,
        city: 4,
    };
    let mut p = init_params(dims, 8, Hyper::default(), 7).unwrap();
    for b in p.weights.bias.iter_mut() {
        for x in b.data_mut() {
            *x = rng.gen_range(-0.3..0.3);
        }
    }
    for x in p.weights.scorer.data_mut() {
        *x += rng.gen_range(-0.2..0.2);
    }
    let neg = sample_negative_graph(&g, 2, 5).unwrap();
    let loss = |q: &ModelParams| {
        let emb = forward(q, &GraphView::new(&g), &feats).unwrap();
        graph_loss(q, &g, &emb, &neg).unwrap()
    };
    let (_, grads) = loss_and_gradients(&p, &g, &feats, &neg).unwrap();
    let eps = 1e-4;
    let mut worst = 0.0f64;
    let mut worst_abs = 0.0f64;
    let mut bad = Vec::new();
    let mut checked = 0;
    for (ti, gm) in grads.tensors().iter().enumerate() {
        for j in 0..gm.data().len() {
            let mut plus = p.clone();
            plus.weights.tensors_mut()[ti].data_mut()[j] += eps;
            let mut minus = p.clone();
            minus.weights.tensors_mut()[ti].data_mut()[j] -= eps;
            let num = (loss(&plus) - loss(&minus)) / (2.0 * eps);
            let a = gm.data()[j];
            let abs = (a - num).abs();
            let rel = abs / a.abs().max(num.abs()).max(1e-300);
            checked += 1;
            worst_abs = worst_abs.max(abs);
            if abs > 1e-7 {
                worst = worst.max(rel);
                if rel > 1e-4 {
                    bad.push(format!("{}[{j}]", Weights::names()[ti]));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        1,
        "gradient check",
        bad.is_empty() && nodes <= 20 && secs < 5.0,
        format!(
            "{nodes} nodes, d=8, {checked} scalars, eps=1e-4, max abs diff {worst_abs:.1e}, worst rel err above the 1e-7 floor {worst:.1e} (tol 1e-4), {} off; {secs:.2}s (< 5s)",
            bad.len()
        ),
    )
}

// 2

fn brute_ndcg(ranking: &[usize], relevant: &BTreeSet<usize>, universe: usize, k: usize) -> f64 {
    let dcg = |order: &[usize]| -> f64 {
        order
            .iter()
            .take(k)
            .enumerate()
            .map(|(i, c)| {
                if relevant.contains(c) {
                    1.0 / ((i + 2) as f64).log2()
                } else {
                    0.0
                }
            })
            .sum()
    };
    let mut best = 0.0f64;
    let mut items: Vec<usize> = (0..universe).collect();
    permute(&mut items, 0, &mut |perm| best = best.max(dcg(perm)));
    if best == 0.0 {
        0.0
    } else {
        dcg(ranking) / best
    }
}

fn permute(items: &mut Vec<usize>, i: usize, visit: &mut dyn FnMut(&[usize])) {
    if i == items.len() {
        visit(items);
        return;
    }
    for j in i..items.len() {
        items.swap(i, j);
        permute(items, i + 1, visit);
        items.swap(i, j);
    }
}

fn ndcg_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=7);
        let mut ranking: Vec<usize> = (0..n).collect();
        ranking.shuffle(&mut rng);
        ranking.truncate(rng.gen_range(1..=n));
        let relevant: BTreeSet<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
        let k = rng.gen_range(1..=n + 1);
        let got = ndcg_at_k(&ranking, &relevant, k);
        worst = worst.max((got - brute_ndcg(&ranking, &relevant, n, k)).abs());
    }
    outcome(
        2,
        "nDCG oracle",
        worst <= 1e-12,
        format!("1000 rankings vs permutation IDCG, max |diff| {worst:.1e} (tol 1e-12)"),
    )
}

// 3 and 4

fn feature_signal() -> Vec<Outcome> {
    let start = Instant::now();
    let seeds = [0u64, 1, 2];
    let (mut model, mut hist, mut rand) = (0.0, 0.0, 0.0);
    let mut planted_top = 0;
    let mut decoy_worst = 0.0f64;
    let mut decoys_seen = usize::MAX;
    let mut ranks = Vec::new();
    let mut train_secs = 0.0;
    for &seed in &seeds {
        let cfg = SynthConfig {
            n_users: 2000,
            n_cities: 50,
            mode: PlantedMode::FeatureSignal,
            strength: 0.8,
            seed,
            ..SynthConfig::default()
        };
        let (_, ds) = synth_dataset(&cfg);
        let t = Instant::now();
        let params = fit(&ds, 32, 200, seed);
        train_secs += t.elapsed().as_secs_f64();
        let g = &ds.graph;
        let feats = ds.features();
        let emb = forward(&params, &GraphView::new(g), &feats).unwrap();
        let pop = city_popularity(g);
        let n = g.num_cities();
        let first = |r: Vec<(usize, f64)>| r.into_iter().map(|x| x.0).collect::<Vec<_>>();
        let m = evaluate(
            "model",
            |u, k| Ok(model_ranking(&emb, u, k)?.cities()),
            &ds.relevance,
            &[10],
        )
        .unwrap();
        let h = evaluate(
            "hist",
            |_, k| Ok(first(histogram_ranking(&pop, k)?)),
            &ds.relevance,
            &[10],
        )
        .unwrap();
        let r = evaluate(
            "random",
            |u, k| Ok(first(random_ranking(n, k, seed, u)?)),
            &ds.relevance,
            &[10],
        )
        .unwrap();
        model += m.ndcg_at(10).unwrap() / seeds.len() as f64;
        hist += h.ndcg_at(10).unwrap() / seeds.len() as f64;
        rand += r.ndcg_at(10).unwrap() / seeds.len() as f64;

        let names: Vec<String> = ds
            .city_features
            .columns
            .iter()
            .map(|c| c.name.clone())
            .collect();
        let fa = feature_perturb(
            &params,
            g,
            &feats,
            &names,
            &ds.relevance,
            10,
            ZeroScope::AllCities,
        )
        .unwrap();
        let top = &fa.features[0];
        if top.name == PLANTED_FEATURE && top.delta_ndcg > 0.0 {
            planted_top += 1;
        }
        let rank = fa
            .features
            .iter()
            .position(|f| f.name == PLANTED_FEATURE)
            .map_or(0, |p| p + 1);
        ranks.push(rank);
        let decoys: Vec<f64> = fa
            .features
            .iter()
            .filter(|f| DECOY_COLUMNS.contains(&f.name.as_str()))
            .map(|f| f.delta_ndcg.abs())
            .collect();
        decoys_seen = decoys_seen.min(decoys.len());
        decoy_worst = decoys.iter().copied().fold(decoy_worst, f64::max);
    }
    let secs = start.elapsed().as_secs_f64();
    let o3 = outcome(
        3,
        "baseline ordering",
        model >= 1.3 * hist && model >= 3.0 * rand && secs < 180.0,
        format!(
            "mean nDCG@10 over 3 seeds: model {model:.4}, histogram {hist:.4} ({:.2}x, need 1.3x), random {rand:.4} ({:.2}x, need 3x); {secs:.1}s incl. {train_secs:.1}s training (< 180s)",
            model / hist,
            model / rand
        ),
    );
    let o4 = outcome(
        4,
        "feature attribution recovery",
        planted_top >= 2 && decoys_seen >= 5 && decoy_worst < 1e-9,
        format!(
            "{PLANTED_FEATURE} ranked #1 with positive delta in {planted_top}/3 seeds (ranks {ranks:?}, need 2); {decoys_seen} decoys, max |delta| {decoy_worst:.1e} (tol 1e-9)"
        ),
    );
    vec![o3, o4]
}

// 5 and 6

fn is_hub_edge(e: &CandidateEdge, user: usize, hub_node: usize) -> bool {
    match e.kind {
        EdgeKind::Collapsed => e.src == user && e.dst == hub_node,
        EdgeKind::Coclick => e.src == hub_node || e.dst == hub_node,
    }
}

fn hub_structure() -> Vec<Outcome> {
    const RANDOM_DRAWS: u64 = 10;
    const FIDELITY_DRAWS: u64 = 5;
    let start = Instant::now();
    let seeds = [0u64, 1];
    let (mut hits, mut random_hits, mut total) = (0usize, 0.0f64, 0usize);
    let mut fidelity = Vec::new();
    for &seed in &seeds {
        let cfg = SynthConfig {
            n_users: 1000,
            mode: PlantedMode::HubStructure,
            n_hub_edges: 20,
            seed,
            ..SynthConfig::default()
        };
        let (data, ds) = synth_dataset(&cfg);
        let params = fit(&ds, 32, 300, seed);
        let g = &ds.graph;
        let feats = ds.features();
        let ctx = ExplainContext::new(&params, g, &feats).unwrap();
        let mut users = Vec::new();
        for grp in data.truth.hub_groups.as_ref().expect("hub groups") {
            let hub = g.index_of(NodeType::City, &grp.hub).unwrap();
            let target = g.index_of(NodeType::City, &grp.target).unwrap();
            let hub_node = ctx.collapsed.city_node(hub);
            for key in &grp.users {
                let u = g.index_of(NodeType::User, key).unwrap();
                users.push(u);
                total += 1;
                let a = structural_perturb(&ctx, u, target, 8, Strategy::Hid, None).unwrap();
                if is_hub_edge(&a.edges[0].edge, u, hub_node) {
                    hits += 1;
                }
                let set = ctx.candidates(u, target, 8).unwrap();
                for r in 0..RANDOM_DRAWS {
                    let ra = random_edge_explainer(&set, 1, seed * 1_000_003 + u as u64 * 31 + r)
                        .unwrap();
                    if is_hub_edge(&ra.edges[0].edge, u, hub_node) {
                        random_hits += 1.0 / RANDOM_DRAWS as f64;
                    }
                }
            }
        }
        let z = fidelity_eval(
            &ctx,
            |u, c| structural_perturb(&ctx, u, c, 8, Strategy::Hid, None),
            &ds.relevance,
            &users,
            5,
            10,
        )
        .unwrap();
        let (mut r_dec, mut r_cos) = (0.0, 0.0);
        for r in 0..FIDELITY_DRAWS {
            let rep = fidelity_eval(
                &ctx,
                |u, c| {
                    let set = ctx.candidates(u, c, 8)?;
                    random_edge_explainer(
                        &set,
                        5.min(set.candidates.len()),
                        seed ^ (u as u64) << 8 ^ r,
                    )
                },
                &ds.relevance,
                &users,
                5,
                10,
            )
            .unwrap();
            r_dec += rep.decrease_pct / FIDELITY_DRAWS as f64;
            r_cos += rep.mean_delta_cos / FIDELITY_DRAWS as f64;
        }
        fidelity.push((seed, users.len(), z, r_dec, r_cos));
    }
    let secs = start.elapsed().as_secs_f64();
    let rate = hits as f64 / total as f64;
    let random_rate = random_hits / total as f64;
    let o5 = outcome(
        5,
        "structural attribution recovery",
        rate >= 0.70 && random_rate <= 0.15 && secs < 300.0,
        format!(
            "top-1 planted hub edge: zrex {hits}/{total} ({:.0}%, need 70%), random {:.1}% over {RANDOM_DRAWS} draws per user (need <= 15%); seeds {seeds:?}; {secs:.1}s (< 300s)",
            100.0 * rate,
            100.0 * random_rate
        ),
    );
    let mut pass = true;
    let mut parts = Vec::new();
    for (seed, n, z, r_dec, r_cos) in &fidelity {
        let ok = z.decrease_pct >= 2.0 * r_dec && z.mean_delta_cos.abs() > r_cos.abs();
        pass &= ok && *n == 20;
        parts.push(format!(
            "seed {seed} ({n} users): decrease {:.1}% vs random {r_dec:.1}%, mean dcos {:.4} vs {r_cos:.4}",
            z.decrease_pct, z.mean_delta_cos
        ));
    }
    let o6 = outcome(
        6,
        "fidelity dominance",
        pass,
        format!(
            "m=5, K=10, random over {FIDELITY_DRAWS} draws; {}",
            parts.join("; ")
        ),
    );
    vec![o5, o6]
}

// 7

fn all_edges(g: &HeteroGraph) -> Vec<EdgeRef> {
    Relation::ALL
        .iter()
        .flat_map(|&rel| (0..g.edges(rel).len()).map(move |edge| EdgeRef { rel, edge }))
        .collect()
}

fn within_two_hops(g: &HeteroGraph, seeds: &[(NodeType, usize)]) -> BTreeSet<(NodeType, usize)> {
    let mut adj: std::collections::BTreeMap<(NodeType, usize), Vec<(NodeType, usize)>> =
        Default::default();
    for e in all_edges(g) {
        let (a, b) = g.endpoints(e);
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut seen: BTreeSet<(NodeType, usize)> = seeds.iter().copied().collect();
    let mut q: VecDeque<((NodeType, usize), usize)> = seeds.iter().map(|&s| (s, 0)).collect();
    while let Some((v, d)) = q.pop_front() {
        if d == 2 {
            continue;
        }
        for &w in adj.get(&v).map_or(&[][..], |x| x) {
            if seen.insert(w) {
                q.push_back((w, d + 1));
            }
        }
    }
    seen
}

fn locality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst = 0.0f64;
    let mut trials = 0;
    let mut removed_total = 0;
    let mut fixture = 0u64;
    while trials < 100 {
        let (g, f, p) = common::trained_fixture(fixture, 40, 60, 12);
        fixture += 1;
        let ctx = ExplainContext::new(&p, &g, &f).unwrap();
        let base = forward(&p, &GraphView::new(&g), &f).unwrap();
        for _ in 0..10 {
            let u = rng.gen_range(0..g.num_users());
            let c = rng.gen_range(0..g.num_cities());
            let near = within_two_hops(&g, &[(NodeType::User, u), (NodeType::City, c)]);
            let outside: Vec<EdgeRef> = all_edges(&g)
                .into_iter()
                .filter(|&e| {
                    let (a, b) = g.endpoints(e);
                    !near.contains(&a) && !near.contains(&b)
                })
                .collect();
            if outside.is_empty() {
                continue;
            }
            let n = rng.gen_range(1..=outside.len());
            let removed: Vec<EdgeRef> = outside.choose_multiple(&mut rng, n).copied().collect();
            let mut mask = EdgeMask::new(&g);
            for &e in &removed {
                mask.remove(e);
            }
            let full = forward(&p, &GraphView::masked(&g, &mask), &f).unwrap();
            let sim = |emb: &zrex_core::gnn::EmbeddingTable| {
                cosine(emb.row(NodeType::User, u), emb.row(NodeType::City, c))
            };
            let d_full = (sim(&full) - sim(&base)).abs();
            let d_ctx = (ctx.similarity(&removed, u, c) - ctx.similarity(&[], u, c)).abs();
            worst = worst.max(d_full).max(d_ctx);
            removed_total += removed.len();
            trials += 1;
            if trials == 100 {
                break;
            }
        }
    }
    outcome(
        7,
        "locality invariant",
        worst <= 1e-12,
        format!(
            "100 trials, {removed_total} edges removed outside both 2-hop neighborhoods, max |dsim| {worst:.1e} by full forward and by explainer (tol 1e-12)"
        ),
    )
}

// 8

fn coclick_and_betweenness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut coclick_ok = 0;
    let mut bc_worst = 0.0f64;
    let mut max_nodes = 0;
    for _ in 0..50 {
        let cities = rng.gen_range(1..=7);
        let users = rng.gen_range(1..=8);
        let listings = cities + rng.gen_range(0..6);
        let g = common::random_hetero(&mut rng, users, listings, cities);
        let uc = collapse_user_city(&g);
        let sub = k_hop_subgraph(&uc, uc.user_node(0), 64).unwrap();
        max_nodes = max_nodes.max(sub.nodes.len());
        let got: Vec<(usize, usize, Vec<usize>)> = find_coclick_edges(&sub)
            .into_iter()
            .map(|e| (e.a, e.b, e.shared))
            .collect();
        if got == common::brute_coclick(&sub) {
            coclick_ok += 1;
        }
        let (n, edges) = common::random_simple_graph(&mut rng, 15);
        let bc = edge_betweenness(n, &edges);
        for (x, y) in bc.iter().zip(common::brute_betweenness(n, &edges)) {
            bc_worst = bc_worst.max((x - y).abs());
        }
    }
    outcome(
        8,
        "co-click and betweenness oracles",
        coclick_ok == 50 && bc_worst <= 1e-9,
        format!(
            "co-click pairs identical on {coclick_ok}/50 subgraphs (<= {max_nodes} nodes); betweenness vs path enumeration on 50 graphs (<= 15 nodes), max |diff| {bc_worst:.1e} (tol 1e-9)"
        ),
    )
}

// 9

fn scale() -> Outcome {
    let mut users = 6000;
    let (_, big) = loop {
        let cfg = SynthConfig {
            n_users: users,
            n_listings: 20_000,
            n_cities: 200,
            seed: 3,
            ..SynthConfig::default()
        };
        let out = synth_dataset(&cfg);
        if out.1.graph.num_edges() >= 100_000 {
            break out;
        }
        users += 1000;
    };
    let p = init_params(big.feature_dims(), 32, Hyper::default(), 3).unwrap();
    let feats = big.features();
    let t = Instant::now();
    train(
        p,
        &big.graph,
        &feats,
        &TrainConfig {
            epochs: 1,
            seed: 3,
            ..TrainConfig::default()
        },
        None,
    )
    .unwrap();
    let epoch = t.elapsed().as_secs_f64();

    let cfg = SynthConfig {
        n_users: 2400,
        n_listings: 16_000,
        n_cities: 200,
        seed: 3,
        ..SynthConfig::default()
    };
    let (_, mid) = synth_dataset(&cfg);
    let params = fit(&mid, 32, 3, 3);
    let feats = mid.features();
    let g = &mid.graph;
    let u = *mid.relevance.keys().next().unwrap();
    let t = Instant::now();
    let ctx = ExplainContext::new(&params, g, &feats).unwrap();
    let c = model_ranking(&ctx.embeddings(), u, 1).unwrap().items[0].0;
    let names: Vec<String> = mid
        .city_features
        .columns
        .iter()
        .map(|c| c.name.clone())
        .collect();
    let fa = feature_perturb(
        &params,
        g,
        &feats,
        &names,
        &mid.relevance,
        10,
        ZeroScope::AllCities,
    )
    .unwrap();
    let ea = structural_perturb(&ctx, u, c, 8, Strategy::Hid, None).unwrap();
    let exp = Explanation::build(g, &fa, &ea, None, "timing", 3, mid.eval_cutoff);
    let explain = t.elapsed().as_secs_f64();
    outcome(
        9,
        "scale sanity",
        big.graph.num_edges() >= 100_000 && epoch < 30.0 && explain < 10.0,
        format!(
            "one epoch on {} edges {epoch:.2}s (< 30s); one explain on {} edges ({} candidates, {} features) {explain:.2}s (< 10s); {} threads",
            big.graph.num_edges(),
            g.num_edges(),
            exp.candidates,
            exp.features.len(),
            rayon::current_num_threads()
        ),
    )
}

// 10

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.out = dir.path().join("data");
    cfg.users = 300;
    cfg.listings = 600;
    cfg.n_cities = 30;
    cfg.mode = PlantedMode::HubStructure;
    cfg.seed = 11;
    cmd_synth(&cfg).unwrap();
    let truth = GroundTruth::load(&cfg.out.join("ground_truth.json")).unwrap();
    let user = truth.hub_groups.unwrap()[0].users[0].clone();
    cfg.set("dataset", &cfg.out.display().to_string()).unwrap();
    cfg.epochs = 30;
    cfg.dim = 16;
    let run = |name: &str, threads: usize| {
        let mut c = cfg.clone();
        c.out = dir.path().join(name);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            cmd_train(&c, false).unwrap();
            cmd_explain(&c, &user, None, true).unwrap();
        });
        let read = |f: &str| std::fs::read(c.out.join(f)).unwrap();
        (
            read("model.zgnn"),
            read("explanation.json"),
            read("explanation.dot"),
        )
    };
    let a = run("a", 1);
    let b = run("b", 4);
    let c = run("c", 1);
    let same = a == b && a == c;
    outcome(
        10,
        "determinism",
        same,
        format!(
            "train + explain three times (1, 4, 1 threads): checkpoint {} bytes, explanation {} bytes, dot {} bytes, byte-identical: {same}",
            a.0.len(),
            a.1.len(),
            a.2.len()
        ),
    )
}

fn main() {
    let start = Instant::now();
    let mut all = vec![gradient_check(), ndcg_oracle()];
    all.extend(feature_signal());
    all.extend(hub_structure());
    all.push(locality());
    all.push(coclick_and_betweenness());
    all.push(scale());
    all.push(determinism());
    all.sort_by_key(|o| o.id);
    let failed: Vec<String> = all
        .iter()
        .filter(|o| !o.pass)
        .map(|o| format!("{} ({})", o.id, o.name))
        .collect();
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        all.len() - failed.len(),
        all.len(),
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
