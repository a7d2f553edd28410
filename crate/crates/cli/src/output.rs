use crate::config::Format;
use anyhow::{Context, Result};
use pfvar::VarianceReport;
use serde_json::{Map, Value};
use std::path::{Path, PathBuf};

/// 17 significant digits.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

/// An in-memory CSV table with a fixed column order.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

/// Labelled per-replicate reports.
pub struct Reports {
    label_names: Vec<String>,
    rows: Vec<(Vec<String>, VarianceReport)>,
}

impl Reports {
    pub fn new(label_names: &[&str]) -> Self {
        Self { label_names: label_names.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, labels: Vec<String>, report: VarianceReport) {
        self.rows.push((labels, report));
    }

    pub fn to_csv(&self) -> Result<String> {
        let horizon = self.rows.first().map(|r| r.1.horizon).unwrap_or(0);
        let mut table = Table::new(self.label_names.iter().cloned().chain(VarianceReport::csv_header(horizon)));
        for (labels, report) in &self.rows {
            table.push(labels.iter().cloned().chain(report.csv_record()).collect());
        }
        table.to_csv()
    }

    pub fn to_json(&self) -> Result<String> {
        let rows = self
            .rows
            .iter()
            .map(|(labels, report)| {
                let mut obj = Map::new();
                for (name, value) in self.label_names.iter().zip(labels) {
                    obj.insert(name.clone(), Value::String(value.clone()));
                }
                obj.insert("report".into(), serde_json::to_value(report)?);
                Ok(Value::Object(obj))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(serde_json::to_string_pretty(&rows)? + "\n")
    }
}

/// Writes into one output directory, recording what was written.
pub struct Sink {
    dir: PathBuf,
    format: Format,
    pub written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: &Path, format: Format) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), format, written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    pub fn table(&mut self, name: &str, table: &Table) -> Result<()> {
        self.write(name, &table.to_csv()?)
    }

    pub fn reports(&mut self, stem: &str, reports: &Reports) -> Result<()> {
        match self.format {
            Format::Csv => self.write(&format!("{stem}.csv"), &reports.to_csv()?),
            Format::Json => self.write(&format!("{stem}.json"), &reports.to_json()?),
        }
    }
}
