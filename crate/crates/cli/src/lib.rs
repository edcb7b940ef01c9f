//! Command implementations behind the `zrex` binary. Each `cmd_*` reads its
//! inputs from a [`RunConfig`], writes artifacts under `config.out` and
//! returns a summary.

pub mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use zrex_core::gnn::{
    checkpoint_id, forward, init_params, load_checkpoint, save_checkpoint, train, Hyper,
    ModelError, ModelParams, TrainConfig,
};
use zrex_core::hetgraph::{GraphError, GraphView, NodeType};
use zrex_core::pipeline::{load_dataset, Dataset, Manifest, PrepareOptions};
use zrex_core::ranker::{
    city_popularity, evaluate, histogram_ranking, model_ranking, random_ranking, MetricTable,
    RankError, DEFAULT_KS,
};
use zrex_core::synthgen::{generate, verify, SynthConfig, SynthError, VerifyReport};
use zrex_core::zrex::{
    feature_perturb, fidelity_eval, structural_perturb, to_dot, ExplainContext, ExplainError,
    Explanation, ZeroScope,
};

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("data: {0}")]
    Data(GraphError),
    #[error("model: {0}")]
    Model(ModelError),
    #[error("training diverged at epoch {0}")]
    Diverged(usize),
    #[error("unknown node: {0}")]
    UnknownNode(String),
    #[error("ranking: {0}")]
    Rank(RankError),
    #[error("explain: {0}")]
    Explain(ExplainError),
    #[error("synth: {0}")]
    Synth(SynthError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::MissingFile(_) => 3,
            CliError::Data(_) => 4,
            CliError::Model(_) => 5,
            CliError::Diverged(_) => 6,
            CliError::UnknownNode(_) => 7,
            CliError::Rank(_) => 8,
            CliError::Explain(_) => 9,
            CliError::Synth(_) => 10,
            CliError::Io(_) => 11,
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::MissingFile(p) => CliError::MissingFile(p),
            GraphError::UnknownNode(n) => CliError::UnknownNode(n),
            GraphError::Io(e) => CliError::Io(e),
            e => CliError::Data(e),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::DivergenceDetected { epoch, .. } => CliError::Diverged(epoch),
            ModelError::Io(e) => CliError::Io(e),
            e => CliError::Model(e),
        }
    }
}

impl From<RankError> for CliError {
    fn from(e: RankError) -> Self {
        CliError::Rank(e)
    }
}

impl From<ExplainError> for CliError {
    fn from(e: ExplainError) -> Self {
        match e {
            ExplainError::UnknownNode(n) => CliError::UnknownNode(n),
            ExplainError::Model(e) => e.into(),
            ExplainError::Graph(e) => e.into(),
            ExplainError::Rank(e) => e.into(),
            e => CliError::Explain(e),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Graph(e) => e.into(),
            SynthError::Io(e) => CliError::Io(e),
            e => CliError::Synth(e),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    let p = p
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("--{flag} is required")))?;
    if !p.exists() {
        return Err(CliError::MissingFile(p.to_path_buf()));
    }
    Ok(p)
}

fn write(cfg: &RunConfig, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Loads and prepares the dataset named by the config.
pub fn load(cfg: &RunConfig) -> Result<Dataset, CliError> {
    cfg.validate()?;
    let events = require(&cfg.events, "events")?;
    let regions = require(&cfg.regions, "regions")?;
    let cities = match &cfg.cities {
        Some(_) => Some(require(&cfg.cities, "cities")?),
        None => None,
    };
    let opts = PrepareOptions {
        relevance: cfg.relevance,
        ..PrepareOptions::default()
    };
    Ok(load_dataset(events, regions, cities, &opts)?)
}

/// Loads the checkpoint and checks it against the dataset's feature shapes.
pub fn load_model(cfg: &RunConfig, ds: &Dataset) -> Result<ModelParams, CliError> {
    let path = cfg.checkpoint_path();
    if !path.exists() {
        return Err(CliError::MissingFile(path));
    }
    let params = load_checkpoint(&path)?.params;
    if params.feature_dims() != ds.feature_dims() {
        return Err(CliError::Model(ModelError::ShapeMismatch(format!(
            "checkpoint expects {:?}, dataset has {:?}",
            params.feature_dims(),
            ds.feature_dims()
        ))));
    }
    Ok(params)
}

fn user_index(ds: &Dataset, key: &str) -> Result<usize, CliError> {
    ds.graph
        .index_of(NodeType::User, key)
        .ok_or_else(|| CliError::UnknownNode(format!("user {key}")))
}

fn city_index(ds: &Dataset, key: &str) -> Result<usize, CliError> {
    ds.graph
        .index_of(NodeType::City, key)
        .ok_or_else(|| CliError::UnknownNode(format!("city {key}")))
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthSummary {
    pub dir: PathBuf,
    pub report: VerifyReport,
}

/// Generates a synthetic dataset into `config.out`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<SynthSummary, CliError> {
    let sc = SynthConfig {
        n_users: cfg.users,
        n_listings: cfg.listings,
        n_cities: cfg.n_cities,
        mode: cfg.mode,
        strength: cfg.strength,
        days: cfg.days,
        seed: cfg.seed,
        ..SynthConfig::default()
    };
    let data = generate(&sc)?;
    data.write_to_dir(&cfg.out)?;
    let report = verify(&data.events, &data.regions, &data.truth, &sc);
    write(cfg, "synth_report.json", &json(&report)?)?;
    Ok(SynthSummary {
        dir: cfg.out.clone(),
        report,
    })
}

/// Builds the graph and feature tables and writes them with a manifest.
pub fn cmd_preprocess(cfg: &RunConfig) -> Result<Manifest, CliError> {
    let ds = load(cfg)?;
    let manifest = ds.manifest();
    write(cfg, "manifest.json", &json(&manifest)?)?;
    let g = &ds.graph;
    write(
        cfg,
        "listing_features.csv",
        &ds.listing_features.to_csv(g.keys(NodeType::Listing)),
    )?;
    write(
        cfg,
        "city_features.csv",
        &ds.city_features.to_csv(g.keys(NodeType::City)),
    )?;
    write(
        cfg,
        "listing_features.meta",
        &ds.listing_features.metadata_text(),
    )?;
    let mut rel = String::from("user\tcity\n");
    for (u, cities) in &ds.relevance {
        for &c in cities {
            let _ = writeln!(
                rel,
                "{}\t{}",
                g.keys(NodeType::User)[*u],
                g.keys(NodeType::City)[c]
            );
        }
    }
    write(cfg, "relevance.tsv", &rel)?;
    Ok(manifest)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub checkpoint_id: String,
    pub steps: u64,
    pub losses: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
}

/// Trains from scratch, or continues from the checkpoint when `resume`.
/// Writes the checkpoint and `loss.tsv`.
pub fn cmd_train(cfg: &RunConfig, resume: bool) -> Result<TrainSummary, CliError> {
    let ds = load(cfg)?;
    let feats = ds.features();
    let path = cfg.checkpoint_path();
    let (params, adam) = if resume {
        if !path.exists() {
            return Err(CliError::MissingFile(path));
        }
        let ck = load_checkpoint(&path)?;
        if ck.params.feature_dims() != ds.feature_dims() {
            return Err(CliError::Model(ModelError::ShapeMismatch(
                "checkpoint does not match the dataset".into(),
            )));
        }
        (ck.params, ck.adam)
    } else {
        let hyper = Hyper {
            margin: cfg.margin,
            learning_rate: cfg.lr,
            weight_decay: cfg.weight_decay,
        };
        (
            init_params(ds.feature_dims(), cfg.dim, hyper, cfg.seed)?,
            None,
        )
    };
    let first_step = params.steps;
    let tc = TrainConfig {
        epochs: cfg.epochs,
        neg_ratio: cfg.neg_ratio,
        seed: cfg.seed,
        ..TrainConfig::default()
    };
    let out = train(params, &ds.graph, &feats, &tc, adam)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_checkpoint(&path, &out.params, Some(&out.adam))?;
    let mut log = String::from("step\tloss\n");
    for (i, l) in out.losses.iter().enumerate() {
        let _ = writeln!(log, "{}\t{l}", first_step + i as u64 + 1);
    }
    write(cfg, "loss.tsv", &log)?;
    Ok(TrainSummary {
        checkpoint_id: checkpoint_id(&path)?,
        checkpoint: path,
        steps: out.params.steps,
        losses: out.losses,
        epoch_seconds: out.epoch_seconds,
    })
}

/// nDCG@K of the model, the popularity histogram and random rankings.
/// Writes `metrics.json` and `metrics.tsv`.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Vec<MetricTable>, CliError> {
    let ds = load(cfg)?;
    let params = load_model(cfg, &ds)?;
    let tables = metric_tables(cfg, &ds, &params)?;
    write(cfg, "metrics.json", &json(&tables)?)?;
    let mut tsv = String::from("method\tK\tndcg\tn_users\n");
    for t in &tables {
        for r in &t.rows {
            let _ = writeln!(tsv, "{}\t{}\t{:.6}\t{}", t.method, r.k, r.ndcg, r.n_users);
        }
    }
    write(cfg, "metrics.tsv", &tsv)?;
    Ok(tables)
}

fn metric_tables(
    cfg: &RunConfig,
    ds: &Dataset,
    params: &ModelParams,
) -> Result<Vec<MetricTable>, CliError> {
    let g = &ds.graph;
    let n = g.num_cities();
    let ks: Vec<usize> = DEFAULT_KS.iter().copied().filter(|&k| k <= n).collect();
    if ks.is_empty() {
        return Err(CliError::Rank(RankError::KTooLarge { k: 1, n }));
    }
    let emb = forward(params, &GraphView::new(g), &ds.features())?;
    let pop = city_popularity(g);
    let cities = |r: Vec<(usize, f64)>| r.into_iter().map(|x| x.0).collect::<Vec<_>>();
    Ok(vec![
        evaluate(
            "model",
            |u, k| Ok(model_ranking(&emb, u, k)?.cities()),
            &ds.relevance,
            &ks,
        )?,
        evaluate(
            "histogram",
            |_, k| Ok(cities(histogram_ranking(&pop, k)?)),
            &ds.relevance,
            &ks,
        )?,
        evaluate(
            "random",
            |u, k| Ok(cities(random_ranking(n, k, cfg.seed, u)?)),
            &ds.relevance,
            &ks,
        )?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub rank: usize,
    pub city: String,
    pub score: f64,
}

/// Top-K cities for one user by embedding cosine.
pub fn cmd_recommend(cfg: &RunConfig, user: &str) -> Result<Vec<Recommendation>, CliError> {
    let ds = load(cfg)?;
    let params = load_model(cfg, &ds)?;
    let u = user_index(&ds, user)?;
    let emb = forward(&params, &GraphView::new(&ds.graph), &ds.features())?;
    let k = cfg.big_k.min(ds.graph.num_cities());
    let r = model_ranking(&emb, u, k)?;
    Ok(r.items
        .iter()
        .enumerate()
        .map(|(i, &(c, s))| Recommendation {
            rank: i + 1,
            city: ds.graph.keys(NodeType::City)[c].clone(),
            score: s,
        })
        .collect())
}

/// Explains one recommendation. Without `city` the user's top-1 city is
/// explained. Writes `explanation.json` and, with `dot`, `explanation.dot`.
pub fn cmd_explain(
    cfg: &RunConfig,
    user: &str,
    city: Option<&str>,
    dot: bool,
) -> Result<Explanation, CliError> {
    let ds = load(cfg)?;
    let params = load_model(cfg, &ds)?;
    let ckpt = checkpoint_id(&cfg.checkpoint_path())?;
    let feats = ds.features();
    let ctx = ExplainContext::new(&params, &ds.graph, &feats)?;
    let u = user_index(&ds, user)?;
    let c = match city {
        Some(key) => city_index(&ds, key)?,
        None => model_ranking(&ctx.embeddings(), u, 1)?.items[0].0,
    };
    let names: Vec<String> = ds
        .city_features
        .columns
        .iter()
        .map(|c| c.name.clone())
        .collect();
    let k = cfg.big_k.min(ds.graph.num_cities());
    let fa = feature_perturb(
        &params,
        &ds.graph,
        &feats,
        &names,
        &ds.relevance,
        k,
        ZeroScope::AllCities,
    )?;
    let ea = structural_perturb(&ctx, u, c, cfg.k, cfg.strategy, cfg.budget)?;
    let exp = Explanation::build(
        &ds.graph,
        &fa,
        &ea,
        cfg.budget,
        &ckpt,
        cfg.seed,
        ds.eval_cutoff,
    );
    write(cfg, "explanation.json", &(exp.to_json() + "\n"))?;
    if dot {
        write(cfg, "explanation.dot", &to_dot(&exp, cfg.m))?;
    }
    Ok(exp)
}

/// Writes final embeddings of every node to `embeddings.tsv`.
pub fn cmd_export(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let ds = load(cfg)?;
    let params = load_model(cfg, &ds)?;
    let emb = forward(&params, &GraphView::new(&ds.graph), &ds.features())?;
    let mut s = String::from("type\tid");
    for i in 0..emb.dim() {
        let _ = write!(s, "\te{i}");
    }
    s.push('\n');
    for t in NodeType::ALL {
        for (v, key) in ds.graph.keys(t).iter().enumerate() {
            s.push_str(t.name());
            s.push('\t');
            s.push_str(key);
            for x in emb.row(t, v) {
                let _ = write!(s, "\t{x}");
            }
            s.push('\n');
        }
    }
    write(cfg, "embeddings.tsv", &s)
}

/// Users explained per explainer setting in a sweep.
pub const SWEEP_USERS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub ndcg_at_1: f64,
}

/// Parses `key=v1,v2;key2=v3` into an ordered grid.
pub fn parse_grid(text: &str) -> Result<Vec<(String, Vec<String>)>, CliError> {
    let mut grid = Vec::new();
    for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, vs) = part
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("grid entry {part:?} is not key=values")))?;
        let values: Vec<String> = vs
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(CliError::Config(format!("grid entry {k:?} has no values")));
        }
        grid.push((k.trim().to_string(), values));
    }
    if grid.is_empty() {
        return Err(CliError::Config("empty grid".into()));
    }
    Ok(grid)
}

fn is_explainer_key(key: &str) -> bool {
    matches!(key, "k" | "strategy" | "budget" | "m")
}

/// One-at-a-time sweep: each row changes one key from the base config.
/// Model keys retrain and report the model's nDCG@1. Explainer keys reuse
/// one base model and report nDCG@1 after removing each user's top-`m`
/// explained edges, over the first [`SWEEP_USERS`] users with relevance.
/// Writes `sweep.tsv`.
pub fn cmd_sweep(
    cfg: &RunConfig,
    grid: &[(String, Vec<String>)],
) -> Result<Vec<SweepRow>, CliError> {
    let ds = load(cfg)?;
    let feats = ds.features();
    let fit = |c: &RunConfig| -> Result<ModelParams, CliError> {
        c.validate()?;
        let hyper = Hyper {
            margin: c.margin,
            learning_rate: c.lr,
            weight_decay: c.weight_decay,
        };
        let p = init_params(ds.feature_dims(), c.dim, hyper, c.seed)?;
        let tc = TrainConfig {
            epochs: c.epochs,
            neg_ratio: c.neg_ratio,
            seed: c.seed,
            ..TrainConfig::default()
        };
        Ok(train(p, &ds.graph, &feats, &tc, None)?.params)
    };
    let mut settings = Vec::new();
    for (key, values) in grid {
        for v in values {
            let mut c = cfg.clone();
            c.set(key, v)?;
            c.validate()?;
            settings.push((key.clone(), v.clone(), c));
        }
    }
    let mut base: Option<ModelParams> = None;
    let mut rows = Vec::new();
    for (key, value, c) in settings {
        let t = Instant::now();
        let ndcg = if is_explainer_key(&key.replace('-', "_")) {
            if base.is_none() {
                base = Some(fit(cfg)?);
            }
            let params = base.as_ref().expect("base model");
            let ctx = ExplainContext::new(params, &ds.graph, &feats)?;
            let users: Vec<usize> = ds
                .relevance
                .iter()
                .filter(|(_, r)| !r.is_empty())
                .map(|(&u, _)| u)
                .take(SWEEP_USERS)
                .collect();
            let rep = fidelity_eval(
                &ctx,
                |u, city| structural_perturb(&ctx, u, city, c.k, c.strategy, c.budget),
                &ds.relevance,
                &users,
                c.m,
                1,
            )?;
            rep.ndcg_perturbed
        } else {
            let params = fit(&c)?;
            let t = metric_tables(&c, &ds, &params)?;
            t[0].ndcg_at(1).expect("K=1 evaluated")
        };
        log::info!(
            "{key}={value}: nDCG@1 {ndcg:.4} ({:.1}s)",
            t.elapsed().as_secs_f64()
        );
        rows.push(SweepRow {
            param: key,
            value,
            ndcg_at_1: ndcg,
        });
    }
    let mut tsv = String::from("param\tvalue\tndcg@1\n");
    for r in &rows {
        let _ = writeln!(tsv, "{}\t{}\t{:.6}", r.param, r.value, r.ndcg_at_1);
    }
    write(cfg, "sweep.tsv", &tsv)?;
    Ok(rows)
}
