//! Output artifacts: schema-tagged CSV, JSON run manifests, and bundled reference data.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{Constants, Model, CONSTANTS};

/// Floats are written with 17 significant digits so they round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// A CSV file whose first line is `# schema: <name>/v<version>`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub schema: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(schema: &str, header: &[&str]) -> Self {
        Self {
            schema: schema.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = format!("# schema: {}\n", self.schema).into_bytes();
        {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut out);
            w.write_record(&self.header).map_err(csv_error)?;
            for r in &self.rows {
                w.write_record(r).map_err(csv_error)?;
            }
            w.flush()?;
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub params: serde_json::Value,
    pub constants: Constants,
    pub version: String,
    pub timestamp: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new<P: Serialize>(command: &str, params: &P) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            params: serde_json::to_value(params).map_err(|e| Error::Config(e.to_string()))?,
            constants: CONSTANTS,
            version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            outputs: Vec::new(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// One printed Table 1 cell.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct ReferenceSpread {
    pub mass_kg: f64,
    pub model: Model,
    pub ms_ev: Option<f64>,
    pub sigma_m: f64,
}

const TABLE1_TARGETS: &str = include_str!("../data/table1_targets.csv");

/// Bundled Table 1 targets in printed row order.
pub fn table1_targets() -> Result<Vec<ReferenceSpread>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(TABLE1_TARGETS.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<ReferenceSpread>, _>>()
        .map_err(csv_error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [1.0 / 3.0, 3.0193e-16, -0.054256988832075095, 1e300] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_layout() {
        let mut t = CsvTable::new("demo/v1", &["a", "b"]);
        t.push(vec!["1".into(), fmt_f64(0.5)]);
        let text = String::from_utf8(t.to_bytes().unwrap()).unwrap();
        assert_eq!(text, "# schema: demo/v1\na,b\n1,5.0000000000000000e-1\n");
    }

    #[test]
    fn targets_load_in_order() {
        let t = table1_targets().unwrap();
        assert_eq!(t.len(), 20);
        assert_eq!(t[0].model, Model::Newtonian);
        assert_eq!(t[0].ms_ev, None);
        assert_eq!(t[7].sigma_m, 5.06e-11);
        assert_eq!(t[19].mass_kg, 1e-16);
    }
}
