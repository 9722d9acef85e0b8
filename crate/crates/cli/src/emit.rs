use serde::Serialize;

use crate::args::Format;
use crate::config::RunConfig;
use crate::CliError;

/// A finished result: a table for CSV and a document for JSON.
pub struct Artifact {
    pub schema: &'static str,
    /// Short `key: value` notes, written as `##` lines in CSV.
    pub notes: Vec<(String, String)>,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub json: serde_json::Value,
}

impl Artifact {
    pub fn new<T: Serialize>(schema: &'static str, header: &[&'static str], result: &T) -> Result<Self, CliError> {
        Ok(Self {
            schema,
            notes: Vec::new(),
            header: header.to_vec(),
            rows: Vec::new(),
            json: serde_json::to_value(result).map_err(|e| CliError::Output(e.to_string()))?,
        })
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn render(&self, cfg: &RunConfig, format: Format) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Csv => self.render_csv(cfg),
            Format::Json => {
                #[derive(Serialize)]
                struct Doc<'a> {
                    schema: &'a str,
                    config: &'a RunConfig,
                    notes: serde_json::Map<String, serde_json::Value>,
                    result: &'a serde_json::Value,
                }
                let notes = self.notes.iter().map(|(k, v)| (k.clone(), v.clone().into())).collect();
                let doc = Doc { schema: self.schema, config: cfg, notes, result: &self.json };
                let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Output(e.to_string()))?;
                out.push(b'\n');
                Ok(out)
            }
        }
    }

    fn render_csv(&self, cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
        let mut out = format!("## schema: {}\n", self.schema).into_bytes();
        for (k, v) in cfg {
            out.extend(format!("# {k}={v}\n").bytes());
        }
        for (k, v) in &self.notes {
            out.extend(format!("## {k}: {v}\n").bytes());
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let err = |e: csv::Error| CliError::Output(e.to_string());
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        w.into_inner().map_err(|e| CliError::Output(e.to_string()))
    }
}

/// Shortest round-trip decimal, `inf`, `-inf` or `NaN`.
pub fn num(v: f64) -> String {
    format!("{v}")
}
