//! Listing metadata (the regions file) and the optional city population file.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::GraphError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Boolean,
    Geographic,
}

/// Listing attribute columns, in file order.
pub const LISTING_COLUMNS: [(&str, ColumnKind); 29] = [
    ("bedrooms", ColumnKind::Numeric),
    ("bathrooms", ColumnKind::Numeric),
    ("year_built", ColumnKind::Numeric),
    ("sqft", ColumnKind::Numeric),
    ("price", ColumnKind::Numeric),
    ("binned_sqft", ColumnKind::Numeric),
    ("binned_price", ColumnKind::Numeric),
    ("price_per_bedroom", ColumnKind::Numeric),
    ("days_on_market", ColumnKind::Numeric),
    ("floors", ColumnKind::Numeric),
    ("waterfront", ColumnKind::Boolean),
    ("heating", ColumnKind::Boolean),
    ("basement", ColumnKind::Boolean),
    ("fireplace", ColumnKind::Boolean),
    ("cooling", ColumnKind::Boolean),
    ("view", ColumnKind::Boolean),
    ("vacant", ColumnKind::Boolean),
    ("spa", ColumnKind::Boolean),
    ("carport", ColumnKind::Boolean),
    ("pool", ColumnKind::Boolean),
    ("new_construction", ColumnKind::Boolean),
    ("lat_top_left", ColumnKind::Geographic),
    ("lat_top_right", ColumnKind::Geographic),
    ("lat_bottom_left", ColumnKind::Geographic),
    ("lat_bottom_right", ColumnKind::Geographic),
    ("lon_top_left", ColumnKind::Geographic),
    ("lon_top_right", ColumnKind::Geographic),
    ("lon_bottom_left", ColumnKind::Geographic),
    ("lon_bottom_right", ColumnKind::Geographic),
];

pub const NUM_LISTING_COLUMNS: usize = LISTING_COLUMNS.len();

pub const CITIES_HEADER: [&str; 2] = ["city_id", "population"];

pub fn column_index(name: &str) -> Option<usize> {
    LISTING_COLUMNS.iter().position(|(n, _)| *n == name)
}

pub fn regions_header() -> Vec<&'static str> {
    let mut h = vec!["listing_id", "city_id"];
    h.extend(LISTING_COLUMNS.iter().map(|(n, _)| *n));
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionRow {
    pub listing_id: String,
    pub city_id: String,
    /// One entry per [`LISTING_COLUMNS`] column; `None` marks a missing value.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegionTable {
    pub rows: Vec<RegionRow>,
}

impl RegionTable {
    pub fn new(rows: Vec<RegionRow>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// listing_id -> city_id, failing when a listing appears twice.
    pub fn membership(&self) -> Result<HashMap<&str, &str>, GraphError> {
        let mut map: HashMap<&str, &str> = HashMap::with_capacity(self.rows.len());
        for row in &self.rows {
            if let Some(prev) = map.insert(&row.listing_id, &row.city_id) {
                return Err(GraphError::InconsistentMembership {
                    listing: row.listing_id.clone(),
                    first: prev.to_string(),
                    second: row.city_id.clone(),
                });
            }
        }
        Ok(map)
    }

    pub fn column(&self, idx: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.values[idx]).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), GraphError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(regions_header())?;
        for row in &self.rows {
            let mut rec = vec![row.listing_id.clone(), row.city_id.clone()];
            for (v, (_, kind)) in row.values.iter().zip(LISTING_COLUMNS.iter()) {
                rec.push(match (v, kind) {
                    (None, _) => String::new(),
                    (Some(x), ColumnKind::Boolean) => format!("{}", *x as i64),
                    (Some(x), _) => format!("{x}"),
                });
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn load_regions(path: &Path) -> Result<RegionTable, GraphError> {
    let file = File::open(path).map_err(|_| GraphError::MissingFile(path.to_path_buf()))?;
    read_regions(file)
}

pub fn read_regions<R: std::io::Read>(input: R) -> Result<RegionTable, GraphError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = reader.headers()?.clone();
    let expected = regions_header();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(GraphError::MalformedRow {
            line: 1,
            reason: "regions header does not match the listing schema".into(),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |reason: String| GraphError::MalformedRow { line, reason };
        if record.len() != expected.len() {
            return Err(malformed(format!(
                "expected {} fields, found {}",
                expected.len(),
                record.len()
            )));
        }
        if record[0].is_empty() || record[1].is_empty() {
            return Err(malformed("empty identifier".into()));
        }
        let mut values = Vec::with_capacity(NUM_LISTING_COLUMNS);
        for (i, (name, kind)) in LISTING_COLUMNS.iter().enumerate() {
            let field = record[i + 2].trim();
            if field.is_empty() {
                values.push(None);
                continue;
            }
            let v: f64 = field
                .parse()
                .map_err(|_| malformed(format!("column {name}: bad number {field:?}")))?;
            if !v.is_finite() {
                return Err(malformed(format!("column {name}: non-finite value")));
            }
            if *kind == ColumnKind::Boolean && v != 0.0 && v != 1.0 {
                return Err(malformed(format!("column {name}: boolean must be 0 or 1")));
            }
            values.push(Some(v));
        }
        rows.push(RegionRow {
            listing_id: record[0].to_string(),
            city_id: record[1].to_string(),
            values,
        });
    }
    let table = RegionTable { rows };
    table.membership()?;
    Ok(table)
}

/// city_id -> population count.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CityTable {
    pub population: BTreeMap<String, f64>,
}

impl CityTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), GraphError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(CITIES_HEADER)?;
        for (city, pop) in &self.population {
            w.write_record([city.clone(), format!("{pop}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn load_cities(path: &Path) -> Result<CityTable, GraphError> {
    let file = File::open(path).map_err(|_| GraphError::MissingFile(path.to_path_buf()))?;
    read_cities(file)
}

pub fn read_cities<R: std::io::Read>(input: R) -> Result<CityTable, GraphError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CITIES_HEADER {
        return Err(GraphError::MalformedRow {
            line: 1,
            reason: format!("expected header {}", CITIES_HEADER.join(",")),
        });
    }
    let mut population = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let pop: f64 = record[1]
            .trim()
            .parse()
            .map_err(|_| GraphError::MalformedRow {
                line,
                reason: format!("bad population {:?}", &record[1]),
            })?;
        if !pop.is_finite() || pop < 0.0 {
            return Err(GraphError::MalformedRow {
                line,
                reason: "population must be a non-negative number".into(),
            });
        }
        population.insert(record[0].to_string(), pop);
    }
    Ok(CityTable { population })
}
