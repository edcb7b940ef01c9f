//! Run configuration: defaults, flat `key=value` files, flag overrides.

use std::path::{Path, PathBuf};

use zrex_core::pipeline::RelevanceMode;
use zrex_core::synthgen::PlantedMode;
use zrex_core::zrex::{Strategy, DEFAULT_HOPS};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub events: Option<PathBuf>,
    pub regions: Option<PathBuf>,
    /// City population table; listing counts stand in when absent.
    pub cities: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: PathBuf,

    pub dim: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub margin: f64,
    pub neg_ratio: usize,

    /// nDCG cutoff.
    pub big_k: usize,
    /// Hops of the explanation subgraph.
    pub k: usize,
    pub strategy: Strategy,
    pub budget: Option<usize>,
    pub m: usize,
    pub relevance: RelevanceMode,

    pub mode: PlantedMode,
    pub strength: f64,
    pub users: usize,
    pub listings: usize,
    pub n_cities: usize,
    pub days: usize,

    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            events: None,
            regions: None,
            cities: None,
            checkpoint: None,
            out: PathBuf::from("out"),
            dim: 32,
            lr: 1e-2,
            weight_decay: 1e-5,
            epochs: 100,
            margin: 1.0,
            neg_ratio: 5,
            big_k: 10,
            k: DEFAULT_HOPS,
            strategy: Strategy::Hid,
            budget: None,
            m: 5,
            relevance: RelevanceMode::All,
            mode: PlantedMode::None,
            strength: 0.8,
            users: 1000,
            listings: 2000,
            n_cities: 50,
            days: 4,
            seed: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("bad value {value:?} for {key}")))
}

impl RunConfig {
    /// Sets one key. `dataset=DIR` points events, regions and cities at the
    /// files `synth` writes into DIR.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.replace('-', "_");
        match key.as_str() {
            "events" => self.events = Some(value.into()),
            "regions" => self.regions = Some(value.into()),
            "cities" => self.cities = Some(value.into()),
            "dataset" => {
                let d = Path::new(value);
                self.events = Some(d.join("events.csv"));
                self.regions = Some(d.join("regions.csv"));
                let c = d.join("cities.csv");
                self.cities = c.exists().then_some(c);
            }
            "checkpoint" => self.checkpoint = Some(value.into()),
            "out" => self.out = value.into(),
            "dim" => self.dim = parse(&key, value)?,
            "lr" => self.lr = parse(&key, value)?,
            "weight_decay" => self.weight_decay = parse(&key, value)?,
            "epochs" => self.epochs = parse(&key, value)?,
            "margin" => self.margin = parse(&key, value)?,
            "neg_ratio" => self.neg_ratio = parse(&key, value)?,
            "K" => self.big_k = parse(&key, value)?,
            "k" => self.k = parse(&key, value)?,
            "strategy" => {
                self.strategy = value
                    .parse()
                    .map_err(|e: zrex_core::zrex::ExplainError| CliError::Config(e.to_string()))?
            }
            "budget" => {
                self.budget = match value {
                    "" | "none" => None,
                    v => Some(parse(&key, v)?),
                }
            }
            "m" => self.m = parse(&key, value)?,
            "relevance" => {
                self.relevance = match value {
                    "all" => RelevanceMode::All,
                    "unseen" => RelevanceMode::Unseen,
                    _ => return Err(CliError::Config(format!("bad relevance mode {value:?}"))),
                }
            }
            "mode" => self.mode = value.parse().map_err(CliError::Config)?,
            "strength" => self.strength = parse(&key, value)?,
            "users" => self.users = parse(&key, value)?,
            "listings" => self.listings = parse(&key, value)?,
            "n_cities" => self.n_cities = parse(&key, value)?,
            "days" => self.days = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a flat `key=value` text. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key=value", i + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|_| CliError::MissingFile(path.into()))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.into()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay must be non-negative");
        }
        if !(self.margin >= 0.0) {
            return bad("margin must be non-negative");
        }
        if self.neg_ratio == 0 {
            return bad("neg_ratio must be at least 1");
        }
        if self.big_k == 0 || self.k == 0 || self.m == 0 {
            return bad("K, k and m must be at least 1");
        }
        if self.budget == Some(0) {
            return bad("budget must be at least 1");
        }
        Ok(())
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out.join("model.zgnn"))
    }

    /// Canonical `key=value` dump, loadable by [`RunConfig::apply_text`].
    pub fn to_text(&self) -> String {
        let p = |x: &Option<PathBuf>| {
            x.as_ref()
                .map_or(String::new(), |p| p.display().to_string())
        };
        let relevance = match self.relevance {
            RelevanceMode::All => "all",
            RelevanceMode::Unseen => "unseen",
        };
        let mode = match self.mode {
            PlantedMode::None => "none",
            PlantedMode::FeatureSignal => "feature_signal",
            PlantedMode::HubStructure => "hub_structure",
        };
        let mut lines = Vec::new();
        for (k, v) in [
            ("events", p(&self.events)),
            ("regions", p(&self.regions)),
            ("cities", p(&self.cities)),
            ("checkpoint", p(&self.checkpoint)),
            ("out", self.out.display().to_string()),
            ("dim", self.dim.to_string()),
            ("lr", self.lr.to_string()),
            ("weight_decay", self.weight_decay.to_string()),
            ("epochs", self.epochs.to_string()),
            ("margin", self.margin.to_string()),
            ("neg_ratio", self.neg_ratio.to_string()),
            ("K", self.big_k.to_string()),
            ("k", self.k.to_string()),
            ("strategy", self.strategy.to_string()),
            (
                "budget",
                self.budget.map_or("none".into(), |b| b.to_string()),
            ),
            ("m", self.m.to_string()),
            ("relevance", relevance.into()),
            ("mode", mode.into()),
            ("strength", self.strength.to_string()),
            ("users", self.users.to_string()),
            ("listings", self.listings.to_string()),
            ("n_cities", self.n_cities.to_string()),
            ("days", self.days.to_string()),
            ("seed", self.seed.to_string()),
        ] {
            if !v.is_empty() {
                lines.push(format!("{k}={v}"));
            }
        }
        lines.join("\n") + "\n"
    }
}
