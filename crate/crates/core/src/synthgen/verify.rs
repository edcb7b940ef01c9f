//! Recomputes summary statistics and planted signals from emitted tables.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{GroundTruth, PlantedMode, SynthConfig, BASE_TIMESTAMP, DAY};
use crate::hetgraph::regions::column_index;
use crate::hetgraph::{EventTable, EventType, RegionTable};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: String,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub users: usize,
    pub views: usize,
    pub saves: usize,
    pub tours: usize,
    pub views_per_user_mean: f64,
    pub views_per_user_median: f64,
    pub views_per_user_p75: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planted_correlation: Option<f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Nearest-rank quantile of sorted values.
fn quantile(sorted: &[usize], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1] as f64
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Pearson correlation of the planted column's city mean between
/// consecutive views of the same user.
pub fn planted_correlation(
    events: &EventTable,
    regions: &RegionTable,
    feature: &str,
) -> Option<f64> {
    let col = column_index(feature)?;
    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    let mut city_of: BTreeMap<&str, &str> = BTreeMap::new();
    for r in &regions.rows {
        city_of.insert(&r.listing_id, &r.city_id);
        if let Some(v) = r.values[col] {
            let s = sums.entry(&r.city_id).or_default();
            s.0 += v;
            s.1 += 1;
        }
    }
    let city_value: BTreeMap<&str, f64> = sums
        .into_iter()
        .map(|(c, (s, n))| (c, s / n as f64))
        .collect();
    let mut per_user: BTreeMap<&str, Vec<(i64, f64)>> = BTreeMap::new();
    for e in events
        .rows
        .iter()
        .filter(|e| e.event_type == EventType::View)
    {
        let Some(v) = city_of
            .get(e.listing_id.as_str())
            .and_then(|c| city_value.get(c))
        else {
            continue;
        };
        per_user
            .entry(&e.user_id)
            .or_default()
            .push((e.timestamp, *v));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for seq in per_user.values_mut() {
        seq.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        for w in seq.windows(2) {
            xs.push(w[0].1);
            ys.push(w[1].1);
        }
    }
    Some(pearson(&xs, &ys))
}

/// Acceptable band for the planted correlation at a given strength.
pub fn correlation_band(strength: f64) -> (f64, f64) {
    let s2 = strength * strength;
    (s2 - 0.05 - 0.2 * s2, s2 + 0.05 + 0.1 * s2)
}

pub fn verify(
    events: &EventTable,
    regions: &RegionTable,
    truth: &GroundTruth,
    targets: &SynthConfig,
) -> VerifyReport {
    let mut checks = Vec::new();
    let mut check = |name: &str, value: f64, expected: String, ok: bool| {
        checks.push(Check {
            name: name.to_string(),
            value,
            expected,
            ok,
        })
    };

    let mut per_user: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &events.rows {
        let c = per_user.entry(&e.user_id).or_default();
        if e.event_type == EventType::View {
            *c += 1;
        }
    }
    let mut counts: Vec<usize> = per_user.values().copied().collect();
    counts.sort_unstable();
    let users = counts.len();
    let mean = counts.iter().sum::<usize>() as f64 / users.max(1) as f64;
    let median = quantile(&counts, 0.5);
    let p75 = quantile(&counts, 0.75);
    let views = events.count(EventType::View);
    let saves = events.count(EventType::Save);
    let tours = events.count(EventType::Tour);

    let tol = 0.15;
    let within = |v: f64, t: f64| (v - t).abs() <= tol * t;
    check(
        "views_per_user_mean",
        mean,
        format!("{} ± 15%", targets.views_mean),
        within(mean, targets.views_mean),
    );
    check(
        "views_per_user_median",
        median,
        format!("{} ± 15%", targets.views_median),
        within(median, targets.views_median),
    );
    check(
        "views_per_user_p75",
        p75,
        format!("{} ± 15%", targets.views_p75),
        within(p75, targets.views_p75),
    );
    check(
        "views_exceed_saves",
        (views as f64) - (saves as f64),
        "> 0".into(),
        views > saves,
    );
    check(
        "views_exceed_tours",
        (views as f64) - (tours as f64),
        "> 0".into(),
        views > tours,
    );

    let mut planted = None;
    match truth.mode {
        PlantedMode::FeatureSignal => {
            let feature = truth
                .planted_feature
                .as_deref()
                .unwrap_or(super::PLANTED_FEATURE);
            let s = truth.strength.unwrap_or(0.0);
            let r = planted_correlation(events, regions, feature).unwrap_or(f64::NAN);
            let (lo, hi) = correlation_band(s);
            check(
                "planted_correlation",
                r,
                format!("[{lo:.3}, {hi:.3}]"),
                r >= lo && r <= hi,
            );
            planted = Some(r);
        }
        PlantedMode::HubStructure => {
            let cutoff = BASE_TIMESTAMP + (targets.days as i64 - 1) * DAY;
            let city_of: BTreeMap<&str, &str> = regions
                .rows
                .iter()
                .map(|r| (r.listing_id.as_str(), r.city_id.as_str()))
                .collect();
            let mut train_cities: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
            for e in events.rows.iter().filter(|e| e.timestamp < cutoff) {
                if let Some(c) = city_of.get(e.listing_id.as_str()) {
                    train_cities.entry(&e.user_id).or_default().insert(c);
                }
            }
            let groups = truth.hub_groups.as_deref().unwrap_or(&[]);
            let consistent = groups.iter().all(|g| {
                g.users.iter().all(|u| {
                    let seen = train_cities.get(u.as_str());
                    seen.is_some_and(|s| {
                        s.contains(g.hub.as_str()) && !s.contains(g.target.as_str())
                    }) && truth
                        .relevance
                        .get(u)
                        .is_some_and(|r| r == &vec![g.target.clone()])
                })
            });
            check(
                "hub_groups_consistent",
                groups.len() as f64,
                "planted users reach targets only through hubs".into(),
                consistent && !groups.is_empty(),
            );
        }
        PlantedMode::None => {}
    }
    let passed = checks.iter().all(|c| c.ok);
    VerifyReport {
        users,
        views,
        saves,
        tours,
        views_per_user_mean: mean,
        views_per_user_median: median,
        views_per_user_p75: p75,
        planted_correlation: planted,
        checks,
        passed,
    }
}
