//! Line-delimited JSON dataset files.
//!
//! Line 1 is a header object:
//! `{"format_version":1,"mask":[12 rows of '#'/'.'],"bounds":{"lower":..,"upper":..},
//!   "provenance":{..},"n_visits":N}`.
//! Each following line is one visit:
//! `{"series_id":..,"visit_index":i,"time":t,"values":[52 dB values]}`,
//! with optional `label` and `truth` keys on a series' first visit.
//! Visits of one series are contiguous and in order.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassLabel, Dataset, Provenance, Series, Truth};
use crate::error::{Error, Result};
use crate::field::{Bounds, Mask, N_LOCATIONS};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    mask: Vec<String>,
    bounds: Bounds,
    provenance: Provenance,
    n_visits: usize,
}

#[derive(Serialize, Deserialize)]
struct VisitRecord<'a> {
    series_id: std::borrow::Cow<'a, str>,
    visit_index: usize,
    time: f64,
    values: std::borrow::Cow<'a, [f64]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<ClassLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth: Option<Truth>,
}

pub fn write_dataset<W: Write>(dataset: &Dataset, mut w: W) -> Result<()> {
    dataset.validate()?;
    let header = Header {
        format_version: FORMAT_VERSION,
        mask: dataset.mask.to_rows(),
        bounds: dataset.bounds,
        provenance: dataset.provenance.clone(),
        n_visits: dataset.series.iter().map(Series::len).sum(),
    };
    serde_json::to_writer(&mut w, &header).map_err(|e| Error::format(Some(1), e.to_string()))?;
    w.write_all(b"\n")?;
    for s in &dataset.series {
        for (i, (t, v)) in s.times.iter().zip(&s.visits).enumerate() {
            let rec = VisitRecord {
                series_id: s.id.as_str().into(),
                visit_index: i,
                time: *t,
                values: v.as_slice().into(),
                label: if i == 0 { s.label } else { None },
                truth: if i == 0 { s.truth.clone() } else { None },
            };
            serde_json::to_writer(&mut w, &rec).map_err(|e| Error::format(None, e.to_string()))?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(r: R) -> Result<Dataset> {
    let reader = BufReader::new(r);
    let mut lines = reader.lines().enumerate();
    let header: Header = match lines.next() {
        Some((_, line)) => serde_json::from_str(&line?)
            .map_err(|e| Error::format(Some(1), format!("bad header: {e}")))?,
        None => return Err(Error::format(Some(1), "empty file")),
    };
    if header.format_version != FORMAT_VERSION {
        return Err(Error::format(
            Some(1),
            format!("unsupported format_version {} (expected {FORMAT_VERSION})", header.format_version),
        ));
    }
    let mask = Mask::from_rows(&header.mask).map_err(|e| Error::format(Some(1), e.to_string()))?;
    mask.validate_field_mask()
        .map_err(|e| Error::format(Some(1), e.to_string()))?;
    header.bounds.validate().map_err(|e| Error::format(Some(1), e.to_string()))?;

    let mut series: Vec<Series> = Vec::new();
    let mut n_visits = 0;
    let mut last_line = 1;
    for (idx, line) in lines {
        let lineno = idx + 1;
        last_line = lineno;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: VisitRecord = serde_json::from_str(&line)
            .map_err(|e| Error::format(Some(lineno), e.to_string()))?;
        if rec.values.len() != N_LOCATIONS {
            return Err(Error::format(
                Some(lineno),
                format!("expected {N_LOCATIONS} values, found {}", rec.values.len()),
            ));
        }
        if rec.values.iter().any(|v| !v.is_finite()) || !rec.time.is_finite() {
            return Err(Error::format(Some(lineno), "non-finite value"));
        }
        let continues = series
            .last()
            .map(|s| s.id == rec.series_id.as_ref())
            .unwrap_or(false);
        if continues {
            let s = series.last_mut().expect("checked above");
            if rec.visit_index != s.len() {
                return Err(Error::format(
                    Some(lineno),
                    format!("visit_index {} out of order (expected {})", rec.visit_index, s.len()),
                ));
            }
            if !(rec.time > *s.times.last().expect("non-empty")) {
                return Err(Error::format(Some(lineno), "times not strictly increasing"));
            }
            s.times.push(rec.time);
            s.visits.push(rec.values.into_owned());
        } else {
            if rec.visit_index != 0 {
                return Err(Error::format(
                    Some(lineno),
                    format!("series {} starts at visit_index {}", rec.series_id, rec.visit_index),
                ));
            }
            if series.iter().any(|s| s.id == rec.series_id.as_ref()) {
                return Err(Error::format(
                    Some(lineno),
                    format!("series {} is not contiguous", rec.series_id),
                ));
            }
            series.push(Series {
                id: rec.series_id.into_owned(),
                times: vec![rec.time],
                visits: vec![rec.values.into_owned()],
                label: rec.label,
                truth: rec.truth,
            });
        }
        n_visits += 1;
    }
    if n_visits != header.n_visits {
        return Err(Error::format(
            Some(last_line + 1),
            format!("truncated: header declares {} visits, found {n_visits}", header.n_visits),
        ));
    }
    let d = Dataset {
        mask,
        bounds: header.bounds,
        provenance: header.provenance,
        series,
    };
    d.validate()?;
    Ok(d)
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_dataset(dataset, &mut buf)?;
    crate::util::write_atomic(path, &buf)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::car::CarParams;

    fn sample() -> Dataset {
        let mut a = Series::new(
            "a",
            vec![0.0, 0.5, 2.0],
            (0..3).map(|t| (0..N_LOCATIONS).map(|l| (l as f64) * 0.1 - t as f64 / 3.0).collect()).collect(),
        )
        .unwrap();
        a.label = Some(ClassLabel::Suspect);
        a.truth = Some(Truth::St(CarParams { beta: 0.1, tau2: 1.0 / 3.0, eta2: 2.0, rho: 0.5, psi: 0.25 }));
        let b = Series::new("b", vec![1.0], vec![vec![-36.999999999; N_LOCATIONS]]).unwrap();
        let mut p = Provenance::new("unit-test");
        p.seed = Some(42);
        Dataset::new(Mask::visual_field_24_2(), p, vec![a, b]).unwrap()
    }

    fn bytes(d: &Dataset) -> Vec<u8> {
        let mut buf = Vec::new();
        write_dataset(d, &mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip_is_exact() {
        let d = sample();
        let buf = bytes(&d);
        let back = read_dataset(&buf[..]).unwrap();
        assert_eq!(back, d);
        assert_eq!(bytes(&back), buf);
    }

    #[test]
    fn truncated_file_names_a_line() {
        let buf = bytes(&sample());
        let text = String::from_utf8(buf).unwrap();
        // cut in the middle of the last line
        let cut = &text[..text.len() - 20];
        let err = read_dataset(cut.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 5"), "{err}");
        // drop the last line entirely
        let lines: Vec<&str> = text.lines().collect();
        let cut = lines[..lines.len() - 1].join("\n");
        let err = read_dataset(cut.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn wrong_value_count_rejected_with_line() {
        let text = String::from_utf8(bytes(&sample())).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[2] = lines[2].replacen("\"values\":[", "\"values\":[1.0,", 1);
        let err = read_dataset(lines.join("\n").as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3") && err.to_string().contains("53"), "{err}");
    }

    #[test]
    fn non_monotone_times_rejected() {
        let text = String::from_utf8(bytes(&sample())).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[3] = lines[3].replacen("\"time\":2.0", "\"time\":0.25", 1);
        let err = read_dataset(lines.join("\n").as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
    }

    #[test]
    fn unknown_version_and_bad_mask_rejected() {
        let text = String::from_utf8(bytes(&sample())).unwrap();
        let v2 = text.replacen("\"format_version\":1", "\"format_version\":2", 1);
        assert!(read_dataset(v2.as_bytes()).unwrap_err().to_string().contains("format_version"));
        let bad = text.replacen("\"............\"", "\"...........#\"", 1);
        let err = read_dataset(bad.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("52"), "{err}");
    }
}
