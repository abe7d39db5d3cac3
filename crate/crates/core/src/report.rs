//! Report schema and CSV emission shared by the library and the CLI.

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Closed form.
    Exact,
    /// Sampled extremal value.
    Est,
    /// Bisection pair.
    Bracket,
}

/// A reported number with its provenance; brackets carry both ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bracket: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub samples: Option<usize>,
}

impl Quantity {
    pub fn exact(value: f64) -> Self {
        Quantity { value, provenance: Provenance::Exact, bracket: None, samples: None }
    }

    pub fn est(value: f64, samples: usize) -> Self {
        Quantity { value, provenance: Provenance::Est, bracket: None, samples: Some(samples) }
    }

    pub fn bracket(value: f64, lo: f64, hi: f64) -> Self {
        Quantity { value, provenance: Provenance::Bracket, bracket: Some([lo, hi]), samples: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub status: Status,
    /// Ordered name → quantity map.
    pub constants: Vec<(String, Quantity)>,
    pub violations: Vec<Value>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seconds: Option<f64>,
}

impl Stage {
    pub fn new(name: &str, status: Status) -> Self {
        Stage { name: name.into(), status, constants: Vec::new(), violations: Vec::new(), note: None, seconds: None }
    }

    pub fn with(mut self, key: &str, q: Quantity) -> Self {
        self.constants.push((key.into(), q));
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.note = Some(text.into());
        self
    }

    pub fn constant(&self, key: &str) -> Option<&Quantity> {
        self.constants.iter().find(|(k, _)| k == key).map(|(_, q)| q)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub config: Value,
    pub stages: Vec<Stage>,
}

impl Report {
    pub fn new(config: Value) -> Self {
        Report { version: env!("CARGO_PKG_VERSION").into(), config, stages: Vec::new() }
    }

    pub fn all_passed(&self) -> bool {
        self.stages.iter().all(|s| matches!(s.status, Status::Pass | Status::Skipped))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Decimal with 17 significant digits; `inf`, `-inf` and `NaN` otherwise.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Numeric CSV table with a header row.
pub fn csv_table<I>(header: &[String], rows: I) -> String
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row.iter().map(|&v| fmt17(v))).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
}

/// Parses a numeric CSV produced by [`csv_table`].
pub fn parse_csv_table(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        rows.push(rec.iter().map(|s| s.parse::<f64>().map_err(|e| format!("{s}: {e}"))).collect::<Result<Vec<_>, _>>()?);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_lossless() {
        let vals = [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, f64::INFINITY, 3f64.sqrt()];
        let csv = csv_table(&["a".into(), "b".into()], vals.chunks(1).map(|c| vec![c[0], -c[0]]));
        let (h, rows) = parse_csv_table(&csv).unwrap();
        assert_eq!(h, vec!["a", "b"]);
        for (row, &v) in rows.iter().zip(&vals) {
            assert_eq!(row[0].to_bits(), v.to_bits());
            assert_eq!(row[1], -v);
        }
    }

    #[test]
    fn quantities_serialize_with_provenance() {
        let s = serde_json::to_string(&Quantity::bracket(1.0, 0.999, 1.0)).unwrap();
        assert!(s.contains("\"provenance\":\"bracket\"") && s.contains("[0.999,1.0]"));
        let s = serde_json::to_string(&Quantity::est(4.0, 12)).unwrap();
        assert!(s.contains("\"est\"") && s.contains("\"samples\":12"));
    }
}
