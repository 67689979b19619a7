use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};

/// One predicted value: `series_id,horizon_time,location_id,predicted_value,method`.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRecord {
    pub series_id: String,
    pub horizon_time: f64,
    pub location_id: usize,
    pub predicted_value: f64,
    pub method: String,
}

pub const RECORD_HEADER: &str = "series_id,horizon_time,location_id,predicted_value,method";

pub fn write_prediction_records<W: Write>(records: &[PredictionRecord], mut w: W) -> Result<()> {
    writeln!(w, "{RECORD_HEADER}")?;
    for r in records {
        if r.series_id.contains([',', '\n']) || r.method.contains([',', '\n']) {
            return Err(Error::invalid(format!("identifier '{}' cannot contain commas or newlines", r.series_id)));
        }
        writeln!(w, "{},{},{},{},{}", r.series_id, r.horizon_time, r.location_id, r.predicted_value, r.method)?;
    }
    Ok(())
}

pub fn read_prediction_records<R: Read>(r: R) -> Result<Vec<PredictionRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let no = i + 1;
        if i == 0 {
            if line != RECORD_HEADER {
                return Err(Error::format(Some(1), format!("expected header '{RECORD_HEADER}'")));
            }
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(Error::format(Some(no), format!("expected 5 fields, got {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::format(Some(no), format!("bad number '{s}': {e}")));
        out.push(PredictionRecord {
            series_id: f[0].to_string(),
            horizon_time: num(f[1])?,
            location_id: f[2].parse().map_err(|e| Error::format(Some(no), format!("bad location '{}': {e}", f[2])))?,
            predicted_value: num(f[3])?,
            method: f[4].to_string(),
        });
    }
    Ok(out)
}
