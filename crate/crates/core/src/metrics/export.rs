use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use super::MetricsError;
use crate::sim::{Counters, SampleRow};
use crate::slicing::SliceKind;
use crate::time::SimTime;

/// Which projection of the samples to export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    /// `time_s,embb,mmtc,urllc,master` with active connection counts.
    ActiveUsers,
    /// Same columns with utilization percentages.
    Utilization,
    /// `time_s` followed by the cumulative counters.
    Counters,
}

impl FromStr for SeriesKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "active-users" => Ok(SeriesKind::ActiveUsers),
            "utilization" => Ok(SeriesKind::Utilization),
            "counters" => Ok(SeriesKind::Counters),
            _ => Err(format!(
                "unknown series `{s}` (active-users, utilization, counters)"
            )),
        }
    }
}

impl SeriesKind {
    pub fn columns(self) -> Vec<&'static str> {
        let mut cols = vec!["time_s"];
        match self {
            SeriesKind::ActiveUsers | SeriesKind::Utilization => {
                cols.extend(SliceKind::ALL.iter().map(|k| k.as_str()))
            }
            SeriesKind::Counters => cols.extend(Counters::NAMES),
        }
        cols
    }
}

/// Writes the rows at or after `skip` and returns how many were written.
pub fn write_series<W: Write>(
    out: W,
    samples: &[SampleRow],
    kind: SeriesKind,
    skip: SimTime,
) -> Result<usize, MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(kind.columns())?;
    let mut n = 0;
    for s in samples.iter().filter(|s| s.time >= skip) {
        let mut row = vec![s.time.to_string()];
        match kind {
            SeriesKind::ActiveUsers => row.extend(s.active.iter().map(u32::to_string)),
            SeriesKind::Utilization => row.extend(s.utilization.iter().map(f64::to_string)),
            SeriesKind::Counters => row.extend(s.counters.values().iter().map(u64::to_string)),
        }
        w.write_record(row)?;
        n += 1;
    }
    w.flush()?;
    Ok(n)
}

/// Exports one series to `path`, skipping rows before `skip`. Nothing is
/// created when no rows remain.
pub fn export_series(
    samples: &[SampleRow],
    kind: SeriesKind,
    skip: SimTime,
    path: impl AsRef<Path>,
) -> Result<usize, MetricsError> {
    if !samples.iter().any(|s| s.time >= skip) {
        return Err(MetricsError::EmptySeries);
    }
    write_series(File::create(path)?, samples, kind, skip)
}
