//! CSV and JSON output of simulation results.

use std::io::{Read, Write};

use super::engine::{Counters, DecisionRecord, SampleRow, SimulationResult};
use crate::slicing::SliceKind;
use crate::time::SimTime;

pub const DECISION_COLUMNS: [&str; 10] = [
    "request_id",
    "time_s",
    "need",
    "target",
    "reason",
    "outcome",
    "assigned",
    "pre_active",
    "capacity",
    "expires_s",
];

/// Header of the samples file: time, then per-slice active, utilization and
/// health, then the cumulative counters.
pub fn sample_columns() -> Vec<String> {
    let mut cols = vec!["time_s".to_owned()];
    for prefix in ["active", "util", "healthy"] {
        cols.extend(SliceKind::ALL.iter().map(|k| format!("{prefix}_{k}")));
    }
    cols.extend(Counters::NAMES.iter().map(|s| s.to_string()));
    cols
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_decisions<W: Write>(out: W, decisions: &[DecisionRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DECISION_COLUMNS)?;
    for d in decisions {
        w.write_record([
            d.request_id.to_string(),
            d.time.to_string(),
            d.need.to_string(),
            opt(d.target),
            d.reason.to_string(),
            d.outcome.as_str().to_owned(),
            opt(d.assigned),
            d.pre_active.to_string(),
            d.capacity.to_string(),
            opt(d.expires_at),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_samples<W: Write>(out: W, samples: &[SampleRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(sample_columns())?;
    for s in samples {
        let mut row = vec![s.time.to_string()];
        row.extend(s.active.iter().map(u32::to_string));
        row.extend(s.utilization.iter().map(f64::to_string));
        row.extend(s.healthy.iter().map(|&h| u8::from(h).to_string()));
        row.extend(s.counters.values().iter().map(u64::to_string));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_samples`].
pub fn read_samples<R: Read>(input: R) -> Result<Vec<SampleRow>, String> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_owned)
        .collect();
    if header != sample_columns() {
        return Err("unexpected samples header".into());
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = i + 2;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let bad = |j: usize| {
            format!(
                "line {line}: bad value {:?} in column {}",
                field(j),
                sample_columns()[j]
            )
        };
        let time: SimTime = field(0).parse().map_err(|_| bad(0))?;
        let mut row = SampleRow {
            time,
            active: [0; 4],
            utilization: [0.0; 4],
            healthy: [true; 4],
            counters: Counters::default(),
        };
        for k in 0..4 {
            row.active[k] = field(1 + k).parse().map_err(|_| bad(1 + k))?;
            row.utilization[k] = field(5 + k).parse().map_err(|_| bad(5 + k))?;
            row.healthy[k] = match field(9 + k) {
                "1" => true,
                "0" => false,
                _ => return Err(bad(9 + k)),
            };
        }
        let mut values = [0u64; 9];
        for (k, v) in values.iter_mut().enumerate() {
            *v = field(13 + k).parse().map_err(|_| bad(13 + k))?;
        }
        row.counters = Counters::from_values(values);
        rows.push(row);
    }
    Ok(rows)
}

/// `truth,predicted` rows, with the oracle label as truth.
pub fn write_pairs<W: Write>(out: W, pairs: &[(SliceKind, SliceKind)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["truth", "predicted"])?;
    for (predicted, truth) in pairs {
        w.write_record([truth.as_str(), predicted.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `truth,predicted` file into `(truth, predicted)` pairs. Errors
/// carry the 1-based line number.
pub fn read_pairs<R: Read>(input: R) -> Result<Vec<(SliceKind, SliceKind)>, String> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| format!("missing column `{name}`"))
    };
    let (t, p) = (col("truth")?, col("predicted")?);
    let mut pairs = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = rec.position().map_or(0, |p| p.line());
        let parse = |j: usize| -> Result<SliceKind, String> {
            let token = rec.get(j).unwrap_or("");
            match token.parse::<SliceKind>() {
                Ok(SliceKind::Master) | Err(_) => {
                    Err(format!("line {line}: unknown class `{token}`"))
                }
                Ok(k) => Ok(k),
            }
        };
        pairs.push((parse(t)?, parse(p)?));
    }
    Ok(pairs)
}

pub fn write_totals<W: Write>(mut out: W, result: &SimulationResult) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, &result.totals_json())?;
    writeln!(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_round_trip() {
        let row = SampleRow {
            time: SimTime::from_secs(600),
            active: [10, 0, 3, 400],
            utilization: [4.0, 0.0, 1.5, 100.0],
            healthy: [true, false, true, true],
            counters: Counters::from_values([9, 8, 7, 6, 5, 4, 3, 2, 1]),
        };
        let mut buf = Vec::new();
        write_samples(&mut buf, std::slice::from_ref(&row)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.starts_with("time_s,active_embb,active_mmtc,active_urllc,active_master,util_embb")
        );
        assert_eq!(read_samples(buf.as_slice()).unwrap(), vec![row]);
        assert!(read_samples("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn pairs_round_trip() {
        // stored as (predicted, oracle), read back as (truth, predicted)
        let stored = [
            (SliceKind::Embb, SliceKind::Urllc),
            (SliceKind::Mmtc, SliceKind::Mmtc),
        ];
        let mut buf = Vec::new();
        write_pairs(&mut buf, &stored).unwrap();
        let read = read_pairs(buf.as_slice()).unwrap();
        assert_eq!(
            read,
            [
                (SliceKind::Urllc, SliceKind::Embb),
                (SliceKind::Mmtc, SliceKind::Mmtc)
            ]
        );
        let err = read_pairs("truth,predicted\nembb,embb\nembb,6g\n".as_bytes()).unwrap_err();
        assert!(err.starts_with("line 3:"), "{err}");
    }
}
