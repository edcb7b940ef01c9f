//! Synthetic event/region data with planted ground truth.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hetgraph::regions::{column_index, LISTING_COLUMNS};
use crate::hetgraph::{
    CityTable, ColumnKind, Event, EventTable, EventType, GraphError, RegionRow, RegionTable,
};

pub mod lognormal;
pub mod verify;

pub use lognormal::CountDistribution;
pub use verify::{verify, Check, VerifyReport};

pub const BASE_TIMESTAMP: i64 = 1_715_904_000;
pub const DAY: i64 = 86_400;
pub const PLANTED_FEATURE: &str = "year_built";
/// Listing columns held constant so they carry no information.
pub const DECOY_COLUMNS: [&str; 6] = [
    "floors",
    "waterfront",
    "spa",
    "carport",
    "pool",
    "new_construction",
];

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("infeasible targets: {0}")]
    InfeasibleTargets(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlantedMode {
    #[default]
    None,
    FeatureSignal,
    HubStructure,
}

impl std::str::FromStr for PlantedMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "feature_signal" => Ok(Self::FeatureSignal),
            "hub_structure" => Ok(Self::HubStructure),
            _ => Err(format!("unknown planted mode {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_listings: usize,
    pub n_cities: usize,
    pub views_mean: f64,
    pub views_median: f64,
    /// Only checked by [`verify`]; the fitted family is pinned by mean and median.
    pub views_p75: f64,
    pub max_views: usize,
    /// View / save / tour shares of all events.
    pub split: [f64; 3],
    pub mode: PlantedMode,
    pub strength: f64,
    /// Width of the preference kernel over the planted feature.
    pub kernel_width: f64,
    /// Days of data; the last one is the evaluation day.
    pub days: usize,
    pub n_hub_edges: usize,
    pub hub_groups: usize,
    pub bridge_users: usize,
    /// Fraction of heavy users and their count multiplier.
    pub cohort_fraction: f64,
    pub cohort_scale: f64,
    /// Per-day growth of activity.
    pub daily_drift: f64,
    pub outlier_rate: f64,
    pub missing_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_users: 1000,
            n_listings: 2000,
            n_cities: 50,
            views_mean: 7.97,
            views_median: 3.0,
            views_p75: 8.0,
            max_views: 200,
            split: [0.70, 0.17, 0.13],
            mode: PlantedMode::None,
            strength: 0.8,
            kernel_width: 0.08,
            days: 4,
            n_hub_edges: 20,
            hub_groups: 4,
            bridge_users: 25,
            cohort_fraction: 0.0,
            cohort_scale: 1.0,
            daily_drift: 0.0,
            outlier_rate: 0.002,
            missing_rate: 0.01,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.n_users == 0 || self.n_cities == 0 || self.n_listings == 0 {
            return bad("counts must be at least 1".into());
        }
        if self.n_listings < self.n_cities {
            return bad("every city needs a listing: n_listings < n_cities".into());
        }
        if (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9
            || self.split.iter().any(|&x| x < 0.0)
        {
            return bad("split ratios must be non-negative and sum to 1".into());
        }
        if self.split[0] <= 0.0 {
            return bad("views share must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.strength) {
            return bad("strength must lie in [0, 1]".into());
        }
        if self.days < 2 {
            return bad("need at least one training day and one evaluation day".into());
        }
        if !(self.kernel_width > 0.0) {
            return bad("kernel_width must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.cohort_fraction) || !(self.cohort_scale >= 1.0) {
            return bad("cohort_fraction in [0,1] and cohort_scale >= 1 required".into());
        }
        if self.mode == PlantedMode::HubStructure {
            if self.hub_groups == 0 || self.n_hub_edges < self.hub_groups {
                return bad("need n_hub_edges >= hub_groups >= 1".into());
            }
            if self.n_cities < 2 * self.hub_groups + 2 {
                return bad("too few cities for the hub groups".into());
            }
            if self.n_users < self.n_hub_edges + self.hub_groups * self.bridge_users {
                return bad("too few users for planted and bridge users".into());
            }
        }
        Ok(())
    }
}

/// One planted hub group: users routed to `target` through `hub`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HubGroup {
    pub hub: String,
    pub target: String,
    pub users: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub mode: PlantedMode,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub planted_feature: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub strength: Option<f64>,
    /// `(user, hub city)` pairs.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hub_edges: Option<Vec<(String, String)>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hub_groups: Option<Vec<HubGroup>>,
    pub relevance: BTreeMap<String, Vec<String>>,
}

impl GroundTruth {
    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let f = File::open(path).map_err(|_| GraphError::MissingFile(path.to_path_buf()))?;
        Ok(serde_json::from_reader(f)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub events: EventTable,
    pub regions: RegionTable,
    pub cities: CityTable,
    pub truth: GroundTruth,
}

impl SynthData {
    /// Writes `events.csv`, `regions.csv`, `cities.csv` and `ground_truth.json`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), SynthError> {
        std::fs::create_dir_all(dir)?;
        self.events
            .write_csv(BufWriter::new(File::create(dir.join("events.csv"))?))?;
        self.regions
            .write_csv(BufWriter::new(File::create(dir.join("regions.csv"))?))?;
        self.cities
            .write_csv(BufWriter::new(File::create(dir.join("cities.csv"))?))?;
        let mut json = serde_json::to_string_pretty(&self.truth)?;
        json.push('\n');
        std::fs::write(dir.join("ground_truth.json"), json)?;
        Ok(())
    }
}

fn user_key(u: usize) -> String {
    format!("u{u}")
}

fn listing_key(l: usize) -> String {
    format!("l{l}")
}

fn city_key(c: usize) -> String {
    format!("c{c}")
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; one value per call keeps the stream simple.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn pick_weighted<R: Rng>(rng: &mut R, cumulative: &[f64]) -> usize {
    let total = *cumulative.last().expect("non-empty weights");
    let x = rng.gen::<f64>() * total;
    cumulative
        .partition_point(|&c| c <= x)
        .min(cumulative.len() - 1)
}

fn cumulative(weights: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .into_iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

struct World {
    population: Vec<f64>,
    /// Planted-feature axis per city, in `[-1, 1]`.
    axis: Vec<f64>,
    listings_of: Vec<Vec<usize>>,
    regions: RegionTable,
}

fn build_world(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> World {
    let n_c = cfg.n_cities;
    let population: Vec<f64> = (0..n_c)
        .map(|_| (9.0 + 1.0 * normal(rng)).exp().round().max(100.0))
        .collect();
    let axis: Vec<f64> = (0..n_c).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let centers: Vec<(f64, f64)> = (0..n_c)
        .map(|_| (rng.gen_range(25.0..48.0), rng.gen_range(-122.0..-70.0)))
        .collect();

    let mut city_of = Vec::with_capacity(cfg.n_listings);
    city_of.extend(0..n_c);
    let pop_cum = cumulative(population.iter().copied());
    while city_of.len() < cfg.n_listings {
        city_of.push(pick_weighted(rng, &pop_cum));
    }
    city_of.sort_unstable();
    let mut listings_of = vec![Vec::new(); n_c];
    for (l, &c) in city_of.iter().enumerate() {
        listings_of[c].push(l);
    }

    let col = |name: &str| column_index(name).expect("known column");
    let bernoulli_p: BTreeMap<&str, f64> = [
        ("heating", 0.9),
        ("basement", 0.4),
        ("fireplace", 0.3),
        ("cooling", 0.6),
        ("view", 0.2),
        ("vacant", 0.1),
    ]
    .into();
    let mut rows = Vec::with_capacity(cfg.n_listings);
    for (l, &c) in city_of.iter().enumerate() {
        let mut v = vec![Some(0.0); LISTING_COLUMNS.len()];
        let bedrooms = (3.0 + normal(rng)).round().clamp(1.0, 6.0);
        let bathrooms = (bedrooms * 0.6 + 0.5 * normal(rng)).round().clamp(1.0, 5.0);
        let sqft = (400.0 + 450.0 * bedrooms + 200.0 * normal(rng))
            .round()
            .max(300.0);
        let price = (sqft * (250.0 + 40.0 * normal(rng)).max(50.0)).round();
        v[col("bedrooms")] = Some(bedrooms);
        v[col("bathrooms")] = Some(bathrooms);
        v[col("year_built")] = Some((1990.0 + 25.0 * axis[c] + 2.0 * normal(rng)).round());
        v[col("sqft")] = Some(sqft);
        v[col("price")] = Some(price);
        v[col("binned_sqft")] = Some((sqft / 500.0).floor());
        v[col("binned_price")] = Some((price / 100_000.0).floor());
        v[col("price_per_bedroom")] = Some((price / bedrooms).round());
        v[col("days_on_market")] = Some((-30.0 * (1.0 - rng.gen::<f64>()).ln()).floor());
        v[col("floors")] = Some(1.0);
        for (name, kind) in LISTING_COLUMNS.iter() {
            if *kind == ColumnKind::Boolean {
                let p = bernoulli_p.get(name).copied().unwrap_or(0.0);
                v[col(name)] = Some(if rng.gen::<f64>() < p { 1.0 } else { 0.0 });
            }
        }
        let (lat, lon) = centers[c];
        let lat = lat + 0.05 * normal(rng);
        let lon = lon + 0.05 * normal(rng);
        for (name, dl, dn) in [
            ("top_left", 0.005, -0.005),
            ("top_right", 0.005, 0.005),
            ("bottom_left", -0.005, -0.005),
            ("bottom_right", -0.005, 0.005),
        ] {
            v[col(&format!("lat_{name}"))] = Some(((lat + dl) * 1e6).round() / 1e6);
            v[col(&format!("lon_{name}"))] = Some(((lon + dn) * 1e6).round() / 1e6);
        }
        if rng.gen::<f64>() < cfg.outlier_rate {
            v[col("bedrooms")] = Some(1000.0 + rng.gen_range(0.0..500.0f64).round());
            v[col("sqft")] = Some(sqft * 100.0);
        }
        for (i, (name, kind)) in LISTING_COLUMNS.iter().enumerate() {
            if *kind != ColumnKind::Boolean
                && !DECOY_COLUMNS.contains(name)
                && rng.gen::<f64>() < cfg.missing_rate
            {
                v[i] = None;
            }
        }
        rows.push(RegionRow {
            listing_id: listing_key(l),
            city_id: city_key(c),
            values: v,
        });
    }
    World {
        population,
        axis,
        listings_of,
        regions: RegionTable::new(rows),
    }
}

struct EventSink {
    rows: Vec<Event>,
    p_save: f64,
    p_tour: f64,
}

impl EventSink {
    /// A view, possibly followed by a save and a tour of the same listing.
    fn view(&mut self, rng: &mut ChaCha8Rng, user: usize, listing: usize, day: usize) {
        let ts = BASE_TIMESTAMP + day as i64 * DAY + rng.gen_range(0..DAY - 7200);
        let mut push = |ty: EventType, t: i64| {
            self.rows.push(Event {
                user_id: user_key(user),
                listing_id: listing_key(listing),
                event_type: ty,
                timestamp: t,
            })
        };
        push(EventType::View, ts);
        if rng.gen::<f64>() < self.p_save {
            push(EventType::Save, ts + rng.gen_range(60..3600));
        }
        if rng.gen::<f64>() < self.p_tour {
            push(EventType::Tour, ts + rng.gen_range(60..3600));
        }
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData, SynthError> {
    cfg.validate()?;
    let views = CountDistribution::fit(cfg.views_mean, cfg.views_median, cfg.max_views)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let world = build_world(cfg, &mut rng);
    let n_c = cfg.n_cities;
    let mut sink = EventSink {
        rows: Vec::new(),
        p_save: cfg.split[1] / cfg.split[0],
        p_tour: cfg.split[2] / cfg.split[0],
    };
    let day_cum = cumulative((0..cfg.days).map(|d| (1.0 + cfg.daily_drift).powi(d as i32)));
    let eval_day = cfg.days - 1;
    let random_listing = |rng: &mut ChaCha8Rng, c: usize| {
        let ls = &world.listings_of[c];
        ls[rng.gen_range(0..ls.len())]
    };

    let mut truth = GroundTruth {
        mode: cfg.mode,
        planted_feature: None,
        strength: None,
        hub_edges: None,
        hub_groups: None,
        relevance: BTreeMap::new(),
    };

    // Hub layout: planted users first, then bridge users, then background.
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut excluded = vec![false; n_c];
    if cfg.mode == PlantedMode::HubStructure {
        let mut order: Vec<usize> = (0..n_c).collect();
        order.shuffle(&mut rng);
        for g in 0..cfg.hub_groups {
            let (h, t) = (order[2 * g], order[2 * g + 1]);
            excluded[h] = true;
            excluded[t] = true;
            groups.push((h, t));
        }
    }
    let background_cum =
        cumulative(
            world
                .population
                .iter()
                .enumerate()
                .map(|(c, &p)| if excluded[c] { 0.0 } else { p }),
        );
    let n_special = if cfg.mode == PlantedMode::HubStructure {
        cfg.n_hub_edges + cfg.hub_groups * cfg.bridge_users
    } else {
        0
    };

    let mut hub_groups: Vec<HubGroup> = groups
        .iter()
        .map(|&(h, t)| HubGroup {
            hub: city_key(h),
            target: city_key(t),
            users: Vec::new(),
        })
        .collect();
    let mut hub_edges = Vec::new();
    for u in 0..n_special.min(cfg.n_users) {
        if u < cfg.n_hub_edges {
            let g = u % cfg.hub_groups;
            let (h, t) = groups[g];
            hub_groups[g].users.push(user_key(u));
            hub_edges.push((user_key(u), city_key(h)));
            let train_day = |rng: &mut ChaCha8Rng| rng.gen_range(0..eval_day);
            for _ in 0..rng.gen_range(3..=6) {
                let d = train_day(&mut rng);
                let l = random_listing(&mut rng, h);
                sink.view(&mut rng, u, l, d);
            }
            let c = pick_weighted(&mut rng, &background_cum);
            for _ in 0..rng.gen_range(1..=2) {
                let d = train_day(&mut rng);
                let l = random_listing(&mut rng, c);
                sink.view(&mut rng, u, l, d);
            }
            for _ in 0..rng.gen_range(1..=3) {
                let l = random_listing(&mut rng, t);
                sink.view(&mut rng, u, l, eval_day);
            }
        } else {
            let (h, t) = groups[(u - cfg.n_hub_edges) / cfg.bridge_users];
            for c in [h, t] {
                for _ in 0..rng.gen_range(1..=3) {
                    let d = rng.gen_range(0..eval_day);
                    let l = random_listing(&mut rng, c);
                    sink.view(&mut rng, u, l, d);
                }
            }
        }
    }

    for u in n_special..cfg.n_users {
        let mut n = views.sample(&mut rng);
        if rng.gen::<f64>() < cfg.cohort_fraction {
            n = ((n as f64) * cfg.cohort_scale).round() as usize;
        }
        let preference = rng.gen_range(-1.0..1.0);
        let kernel = if cfg.mode == PlantedMode::FeatureSignal {
            let w2 = 2.0 * cfg.kernel_width * cfg.kernel_width;
            Some(cumulative(world.axis.iter().map(|&a| {
                (-(a - preference) * (a - preference) / w2).exp() + 1e-300
            })))
        } else {
            None
        };
        for _ in 0..n {
            let c = match &kernel {
                Some(k) if rng.gen::<f64>() < cfg.strength => pick_weighted(&mut rng, k),
                _ => pick_weighted(&mut rng, &background_cum),
            };
            let d = pick_weighted(&mut rng, &day_cum);
            let l = random_listing(&mut rng, c);
            sink.view(&mut rng, u, l, d);
        }
    }

    let mut rows = sink.rows;
    rows.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.user_id.cmp(&b.user_id))
            .then_with(|| a.listing_id.cmp(&b.listing_id))
            .then_with(|| a.event_type.as_str().cmp(b.event_type.as_str()))
    });
    let events = EventTable::new(rows);

    let cutoff = BASE_TIMESTAMP + eval_day as i64 * DAY;
    let city_of_listing: BTreeMap<&str, &str> = world
        .regions
        .rows
        .iter()
        .map(|r| (r.listing_id.as_str(), r.city_id.as_str()))
        .collect();
    let mut relevance: BTreeMap<String, std::collections::BTreeSet<String>> = BTreeMap::new();
    for e in events.rows.iter().filter(|e| e.timestamp >= cutoff) {
        relevance
            .entry(e.user_id.clone())
            .or_default()
            .insert(city_of_listing[e.listing_id.as_str()].to_string());
    }
    truth.relevance = relevance
        .into_iter()
        .map(|(u, s)| (u, s.into_iter().collect()))
        .collect();
    match cfg.mode {
        PlantedMode::FeatureSignal => {
            truth.planted_feature = Some(PLANTED_FEATURE.to_string());
            truth.strength = Some(cfg.strength);
        }
        PlantedMode::HubStructure => {
            truth.hub_edges = Some(hub_edges);
            truth.hub_groups = Some(hub_groups);
        }
        PlantedMode::None => {}
    }

    let cities = CityTable {
        population: (0..n_c)
            .map(|c| (city_key(c), world.population[c]))
            .collect(),
    };
    Ok(SynthData {
        events,
        regions: world.regions,
        cities,
        truth,
    })
}
