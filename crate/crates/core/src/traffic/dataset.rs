//! CSV dataset schema.
//!
//! Columns, in written order: `id, arrival_s, device_class, ue_category, qci,
//! packet_loss_rate, packet_delay_budget, day_of_week, hour_of_day, weather,
//! ttl_s, slice_type`. Column order on input is free; `slice_type` may be absent
//! or empty.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::record::{DeviceClass, LossRate, RequestRecord, Weather};
use crate::slicing::SliceKind;
use crate::time::SimTime;

pub const COLUMNS: [&str; 12] = [
    "id",
    "arrival_s",
    "device_class",
    "ue_category",
    "qci",
    "packet_loss_rate",
    "packet_delay_budget",
    "day_of_week",
    "hour_of_day",
    "weather",
    "ttl_s",
    "slice_type",
];
const OPTIONAL: &str = "slice_type";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset is missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// A row that failed to parse or validate; `line` is 1-based with the header on line 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<RequestRecord>,
    pub row_errors: Vec<RowError>,
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    read_dataset(File::open(path)?)
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut index = [usize::MAX; COLUMNS.len()];
    for (slot, name) in index.iter_mut().zip(COLUMNS) {
        match headers.iter().position(|h| h.eq_ignore_ascii_case(name)) {
            Some(i) => *slot = i,
            None if name == OPTIONAL => {}
            None => return Err(DatasetError::MissingColumn(name)),
        }
    }

    let mut out = Dataset::default();
    let mut seen = HashSet::new();
    for row in rdr.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                out.row_errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        let parsed = parse_row(&row, &index).and_then(|r| {
            if seen.insert(r.id) {
                Ok(r)
            } else {
                Err(format!("duplicate id {}", r.id))
            }
        });
        match parsed {
            Ok(r) => out.records.push(r),
            Err(message) => out.row_errors.push(RowError { line, message }),
        }
    }
    Ok(out)
}

fn parse_row(
    row: &csv::StringRecord,
    index: &[usize; COLUMNS.len()],
) -> Result<RequestRecord, String> {
    let cell = |col: usize| row.get(index[col]).unwrap_or("");
    fn field<T: FromStr>(name: &str, raw: &str) -> Result<T, String> {
        raw.parse().map_err(|_| format!("invalid {name} `{raw}`"))
    }
    let slice_type = match index[11] {
        usize::MAX => None,
        _ if cell(11).is_empty() => None,
        _ => Some(field::<SliceKind>(COLUMNS[11], cell(11))?),
    };
    let record = RequestRecord {
        id: field(COLUMNS[0], cell(0))?,
        arrival: field::<SimTime>(COLUMNS[1], cell(1))?,
        device_class: field::<DeviceClass>(COLUMNS[2], cell(2))?,
        ue_category: field(COLUMNS[3], cell(3))?,
        qci: field(COLUMNS[4], cell(4))?,
        packet_loss_rate: field::<LossRate>(COLUMNS[5], cell(5))?,
        packet_delay_budget_ms: field(COLUMNS[6], cell(6))?,
        day_of_week: field(COLUMNS[7], cell(7))?,
        hour_of_day: field(COLUMNS[8], cell(8))?,
        weather: field::<Weather>(COLUMNS[9], cell(9))?,
        ttl_s: field(COLUMNS[10], cell(10))?,
        slice_type,
    };
    record.validate().map_err(|e| e.to_string())?;
    Ok(record)
}

pub fn write_dataset<W: Write>(writer: W, records: &[RequestRecord]) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COLUMNS)?;
    for r in records {
        w.write_record([
            r.id.to_string(),
            r.arrival.to_string(),
            r.device_class.to_string(),
            r.ue_category.to_string(),
            r.qci.to_string(),
            r.packet_loss_rate.to_string(),
            r.packet_delay_budget_ms.to_string(),
            r.day_of_week.to_string(),
            r.hour_of_day.to_string(),
            r.weather.as_str().to_owned(),
            r.ttl_s.to_string(),
            r.slice_type.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
