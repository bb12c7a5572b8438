use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One trip request: planar origin and destination in miles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub origin: [f64; 2],
    pub destination: [f64; 2],
    pub timestamp: Option<String>,
}

impl TripRecord {
    pub fn new(origin: [f64; 2], destination: [f64; 2]) -> Self {
        Self {
            origin,
            destination,
            timestamp: None,
        }
    }

    pub fn length(&self) -> f64 {
        distance(self.origin, self.destination)
    }

    /// Origin and destination coincide. Such trips are kept but their type
    /// gets a floored solo length.
    pub fn is_zero_length(&self) -> bool {
        self.origin == self.destination
    }

    /// `(origin_x, origin_y, dest_x, dest_y)`, the clustering feature vector.
    pub fn features(&self) -> [f64; 4] {
        [
            self.origin[0],
            self.origin[1],
            self.destination[0],
            self.destination[1],
        ]
    }
}

pub(crate) fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

const REQUIRED: [&str; 4] = ["origin_x", "origin_y", "dest_x", "dest_y"];

/// Parses trips CSV with header `origin_x,origin_y,dest_x,dest_y` and an
/// optional `timestamp` column, in any order. `source` names the input in
/// error messages.
pub fn parse_trips_csv<R: Read>(reader: R, source: &str) -> Result<Vec<TripRecord>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(parse_err(1, "empty file".into()));
    }
    let mut cols = [0usize; 4];
    for (slot, name) in cols.iter_mut().zip(REQUIRED) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("missing column `{name}`")))?;
    }
    let ts_col = headers.iter().position(|h| h == "timestamp");

    let mut trips = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let mut v = [0.0; 4];
        for (k, (&c, name)) in cols.iter().zip(REQUIRED).enumerate() {
            let cell = rec.get(c).unwrap_or("");
            v[k] = cell
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| {
                    parse_err(line, format!("`{name}` is not a finite number: {cell:?}"))
                })?;
        }
        let timestamp = ts_col
            .and_then(|c| rec.get(c))
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        trips.push(TripRecord {
            origin: [v[0], v[1]],
            destination: [v[2], v[3]],
            timestamp,
        });
    }
    if trips.is_empty() {
        return Err(parse_err(1, "no trip rows".into()));
    }
    Ok(trips)
}

pub fn read_trips_csv(path: &Path) -> Result<Vec<TripRecord>> {
    let f = File::open(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_trips_csv(f, &path.display().to_string())
}

/// Writes trips with a `timestamp` column only when some trip carries one.
pub fn write_trips_csv<W: Write>(trips: &[TripRecord], out: W) -> Result<()> {
    let with_ts = trips.iter().any(|t| t.timestamp.is_some());
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io {
        path: "<trips csv>".into(),
        source: std::io::Error::other(e),
    };
    let mut header = REQUIRED.to_vec();
    if with_ts {
        header.push("timestamp");
    }
    w.write_record(&header).map_err(io)?;
    for t in trips {
        let mut row: Vec<String> = t.features().iter().map(|x| x.to_string()).collect();
        if with_ts {
            row.push(t.timestamp.clone().unwrap_or_default());
        }
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<trips csv>".into(),
        source: e,
    })
}

pub fn save_trips_csv(trips: &[TripRecord], path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    write_trips_csv(trips, f)
}
