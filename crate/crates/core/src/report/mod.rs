//! Report emission: CSV helpers, SVG figures and run manifests.

mod manifest;
pub mod svg;

pub use manifest::Manifest;

/// Formats an optional number for CSV; missing values are empty.
pub fn csv_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Makes free text safe for a single CSV cell.
pub fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}
