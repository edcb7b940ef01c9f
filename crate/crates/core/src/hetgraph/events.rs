use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use super::GraphError;

pub const EVENTS_HEADER: [&str; 4] = ["user_id", "listing_id", "event_type", "timestamp"];

const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventType {
    View,
    Save,
    Tour,
}

impl EventType {
    pub const ALL: [EventType; 3] = [EventType::View, EventType::Save, EventType::Tour];

    pub fn as_str(self) -> &'static str {
        match self {
            EventType::View => "view",
            EventType::Save => "save",
            EventType::Tour => "tour",
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "view" => Ok(EventType::View),
            "save" => Ok(EventType::Save),
            "tour" => Ok(EventType::Tour),
            other => Err(format!("unknown event_type {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub user_id: String,
    pub listing_id: String,
    pub event_type: EventType,
    pub timestamp: i64,
}

/// Raw interaction log. Duplicate rows are kept; multiplicity matters downstream.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventTable {
    pub rows: Vec<Event>,
}

impl EventTable {
    pub fn new(rows: Vec<Event>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn max_timestamp(&self) -> Option<i64> {
        self.rows.iter().map(|e| e.timestamp).max()
    }

    /// Start of the last calendar day (UTC) present in the log.
    pub fn last_day_start(&self) -> Option<i64> {
        self.max_timestamp()
            .map(|t| t.div_euclid(SECONDS_PER_DAY) * SECONDS_PER_DAY)
    }

    /// Splits into (training, evaluation) at `cutoff`: rows with
    /// `timestamp >= cutoff` go to evaluation.
    pub fn split_at(&self, cutoff: i64) -> (EventTable, EventTable) {
        let (eval, train): (Vec<_>, Vec<_>) = self
            .rows
            .iter()
            .cloned()
            .partition(|e| e.timestamp >= cutoff);
        (EventTable::new(train), EventTable::new(eval))
    }

    pub fn count(&self, ty: EventType) -> usize {
        self.rows.iter().filter(|e| e.event_type == ty).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), GraphError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(EVENTS_HEADER)?;
        for e in &self.rows {
            w.write_record([
                e.user_id.as_str(),
                e.listing_id.as_str(),
                e.event_type.as_str(),
                &e.timestamp.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn load_events(path: &Path) -> Result<EventTable, GraphError> {
    let file = File::open(path).map_err(|_| GraphError::MissingFile(path.to_path_buf()))?;
    read_events(file)
}

pub fn read_events<R: std::io::Read>(input: R) -> Result<EventTable, GraphError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != EVENTS_HEADER {
        return Err(GraphError::MalformedRow {
            line: 1,
            reason: format!("expected header {}", EVENTS_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |reason: String| GraphError::MalformedRow { line, reason };
        if record.len() != EVENTS_HEADER.len() {
            return Err(malformed(format!(
                "expected {} fields, found {}",
                EVENTS_HEADER.len(),
                record.len()
            )));
        }
        let user_id = record[0].to_string();
        let listing_id = record[1].to_string();
        if user_id.is_empty() || listing_id.is_empty() {
            return Err(malformed("empty identifier".into()));
        }
        let event_type = record[2].parse::<EventType>().map_err(malformed)?;
        let timestamp: i64 = record[3]
            .trim()
            .parse()
            .map_err(|_| malformed(format!("bad timestamp {:?}", &record[3])))?;
        if timestamp < 0 {
            return Err(malformed("negative timestamp".into()));
        }
        rows.push(Event {
            user_id,
            listing_id,
            event_type,
            timestamp,
        });
    }
    Ok(EventTable { rows })
}
