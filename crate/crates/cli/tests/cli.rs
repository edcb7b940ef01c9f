use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use zrex_cli::{
    cmd_evaluate, cmd_explain, cmd_preprocess, cmd_sweep, cmd_synth, cmd_train, parse_grid,
    RunConfig,
};
use zrex_core::gnn::load_checkpoint;
use zrex_core::hetgraph::{load_events, EventType};
use zrex_core::synthgen::{GroundTruth, PlantedMode};

fn zrex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zrex"))
        .args(args)
        .env_remove("ZREX_THREADS")
        .output()
        .unwrap()
}

fn small(dir: &Path, mode: PlantedMode) -> RunConfig {
    let mut cfg = RunConfig {
        users: 150,
        listings: 300,
        n_cities: 15,
        mode,
        epochs: 40,
        seed: 2,
        out: dir.to_path_buf(),
        ..RunConfig::default()
    };
    cmd_synth(&cfg).unwrap();
    cfg.set("dataset", dir.to_str().unwrap()).unwrap();
    cfg
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn manifest_counts_match_events() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), PlantedMode::None);
    let m = cmd_preprocess(&cfg).unwrap();
    let ev = load_events(&dir.path().join("events.csv")).unwrap();
    let distinct = |ty: EventType| {
        ev.rows
            .iter()
            .filter(|e| e.event_type == ty && e.timestamp < m.eval_cutoff)
            .map(|e| (&e.user_id, &e.listing_id))
            .collect::<BTreeSet<_>>()
            .len()
    };
    assert_eq!(m.views, distinct(EventType::View));
    assert_eq!(m.saves, distinct(EventType::Save));
    assert_eq!(m.tours, distinct(EventType::Tour));
    assert_eq!(m.listings, 300);
    assert_eq!(m.contains, 300);
    assert_eq!(m.train_events + m.eval_events + m.dropped_events, ev.len());
    let first = std::fs::read(dir.path().join("manifest.json")).unwrap();
    cmd_preprocess(&cfg).unwrap();
    assert_eq!(
        std::fs::read(dir.path().join("manifest.json")).unwrap(),
        first
    );
    for f in [
        "listing_features.csv",
        "city_features.csv",
        "listing_features.meta",
        "relevance.tsv",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn missing_regions_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    small(dir.path(), PlantedMode::None);
    let gone = dir.path().join("nope.csv");
    let out = zrex(&[
        "preprocess",
        "--events",
        s(&dir.path().join("events.csv")),
        "--regions",
        s(&gone),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
}

#[test]
fn train_resume_evaluate_recommend() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), PlantedMode::None);
    let a = cmd_train(&cfg, false).unwrap();
    assert_eq!(a.steps, 40);
    assert!(a.losses.iter().all(|l| l.is_finite()));
    let ck = load_checkpoint(&a.checkpoint).unwrap();
    assert_eq!(ck.params.steps, 40);
    let mut more = cfg.clone();
    more.epochs = 5;
    let b = cmd_train(&more, true).unwrap();
    assert_eq!(b.steps, 45);
    assert_ne!(a.checkpoint_id, b.checkpoint_id);
    let log = std::fs::read_to_string(dir.path().join("loss.tsv")).unwrap();
    assert!(log.lines().nth(1).unwrap().starts_with("41\t"), "{log}");

    let tables = cmd_evaluate(&cfg).unwrap();
    let methods: Vec<&str> = tables.iter().map(|t| t.method.as_str()).collect();
    assert_eq!(methods, ["model", "histogram", "random"]);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap())
            .unwrap();
    assert_eq!(json.as_array().unwrap().len(), 3);
    let tsv = std::fs::read_to_string(dir.path().join("metrics.tsv")).unwrap();
    assert!(tsv.starts_with("method\tK\tndcg\tn_users\n"));

    let rec = zrex(&[
        "recommend",
        "--dataset",
        s(dir.path()),
        "--out",
        s(dir.path()),
        "--user",
        "u0",
        "--K",
        "3",
    ]);
    assert_eq!(
        rec.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&rec.stderr)
    );
    let text = String::from_utf8(rec.stdout).unwrap();
    assert_eq!(text.lines().count(), 4, "{text}");
    let unknown = zrex(&[
        "recommend",
        "--dataset",
        s(dir.path()),
        "--out",
        s(dir.path()),
        "--user",
        "ghost",
    ]);
    assert_eq!(unknown.status.code(), Some(7));
    let bad_city = zrex(&[
        "explain",
        "--dataset",
        s(dir.path()),
        "--out",
        s(dir.path()),
        "--user",
        "u0",
        "--city",
        "nowhere",
    ]);
    assert_eq!(bad_city.status.code(), Some(7));
}

#[test]
fn resume_without_checkpoint_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    small(dir.path(), PlantedMode::None);
    let out = zrex(&[
        "train",
        "--resume",
        "--dataset",
        s(dir.path()),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

fn write_tiny(dir: &Path) {
    let header = zrex_core::hetgraph::regions::regions_header();
    let pad = |i: usize| {
        (2..header.len())
            .map(|j| format!(",{}", (i + j) % 2))
            .collect::<String>()
    };
    let regions = format!(
        "{}\nA,X{}\nB,Y{}\nC,X{}\n",
        header.join(","),
        pad(0),
        pad(1),
        pad(2)
    );
    std::fs::write(dir.join("regions.csv"), regions).unwrap();
    let day = 86_400;
    let events = format!(
        "user_id,listing_id,event_type,timestamp\np,A,view,10\nq,B,view,20\np,C,save,30\np,A,view,{}\nq,B,view,{}\n",
        day + 5,
        day + 6
    );
    std::fs::write(dir.join("events.csv"), events).unwrap();
}

#[test]
fn empty_eval_set_exits_eight() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny(dir.path());
    let base = [
        "--dataset",
        s(dir.path()),
        "--out",
        s(dir.path()),
        "--relevance",
        "unseen",
        "--epochs",
        "2",
        "--dim",
        "4",
    ];
    let t = zrex(&[&["train"], &base[..]].concat());
    assert_eq!(
        t.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&t.stderr)
    );
    let e = zrex(&[&["evaluate"], &base[..]].concat());
    assert_eq!(
        e.status.code(),
        Some(8),
        "{}",
        String::from_utf8_lossy(&e.stderr)
    );
}

#[test]
fn hub_explanations_rank_the_hub_edge_first() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path(), PlantedMode::HubStructure);
    cfg.users = 300;
    cfg.epochs = 200;
    cmd_synth(&cfg).unwrap();
    cmd_train(&cfg, false).unwrap();
    let truth = GroundTruth::load(&dir.path().join("ground_truth.json")).unwrap();
    let groups = truth.hub_groups.unwrap();
    let mut hits = 0;
    let mut tried = 0;
    for g in groups.iter().take(4) {
        let u = &g.users[0];
        let exp = cmd_explain(&cfg, u, Some(&g.target), tried == 0).unwrap();
        tried += 1;
        let top = &exp.edges[0];
        if [&top.src, &top.dst].contains(&&g.hub) {
            hits += 1;
        }
        for w in exp.edges.windows(2) {
            let mag = |d: Option<f64>| d.unwrap_or(0.0).abs();
            assert!(mag(w[0].delta_sim) >= mag(w[1].delta_sim));
        }
    }
    assert!(hits * 4 >= tried * 3, "{hits}/{tried}");
    let dot = std::fs::read_to_string(dir.path().join("explanation.dot")).unwrap();
    assert!(dot.contains("fillcolor=yellow") && dot.contains("fillcolor=green"));
    assert!(dot.contains("color=red"));
    let json: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("explanation.json")).unwrap(),
    )
    .unwrap();
    assert!(json["features"].as_array().is_some_and(|f| !f.is_empty()));
}

#[test]
fn sweep_over_hops_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path(), PlantedMode::None);
    cfg.epochs = 10;
    let grid = parse_grid("k=4,8,16").unwrap();
    let a = cmd_sweep(&cfg, &grid).unwrap();
    assert_eq!(a.len(), 3);
    let first = std::fs::read_to_string(dir.path().join("sweep.tsv")).unwrap();
    let b = cmd_sweep(&cfg, &grid).unwrap();
    assert_eq!(
        a.iter().map(|r| r.ndcg_at_1).collect::<Vec<_>>(),
        b.iter().map(|r| r.ndcg_at_1).collect::<Vec<_>>()
    );
    assert_eq!(
        std::fs::read_to_string(dir.path().join("sweep.tsv")).unwrap(),
        first
    );
    assert!(parse_grid("k").is_err());
}

#[test]
fn synth_flags_reach_the_generator() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = zrex(&[
            "synth",
            "--out",
            s(d.path()),
            "--users",
            "80",
            "--listings",
            "120",
            "--n-cities",
            "8",
            "--mode",
            "feature_signal",
            "--strength",
            "0.6",
            "--seed",
            "9",
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for f in [
        "events.csv",
        "regions.csv",
        "cities.csv",
        "ground_truth.json",
    ] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let truth = GroundTruth::load(&a.path().join("ground_truth.json")).unwrap();
    assert_eq!(truth.mode, PlantedMode::FeatureSignal);
    assert_eq!(truth.strength, Some(0.6));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        format!(
            "# small\nusers = 40\nlistings=60\nn-cities=5\nseed=1\nout={}\n",
            s(dir.path())
        ),
    )
    .unwrap();
    let out = zrex(&["synth", "--config", s(&conf), "--users", "30"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let ev = load_events(&dir.path().join("events.csv")).unwrap();
    let users: BTreeSet<&str> = ev.rows.iter().map(|e| e.user_id.as_str()).collect();
    assert!(users.len() <= 30 && users.len() > 5, "{}", users.len());

    std::fs::write(&conf, "users = many\n").unwrap();
    assert_eq!(
        zrex(&["synth", "--config", s(&conf)]).status.code(),
        Some(2)
    );
    assert_eq!(
        zrex(&["synth", "--config", s(&dir.path().join("absent.conf"))])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(zrex(&["synth", "--epochs", "-1"]).status.code(), Some(2));
}

#[test]
fn bad_thread_count_exits_two() {
    let out = Command::new(env!("CARGO_BIN_EXE_zrex"))
        .args(["synth", "--users", "10"])
        .env("ZREX_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
