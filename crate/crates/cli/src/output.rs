//! Rendering of command results as JSON, aligned tables or CSV.

use std::io::Write;

use anyhow::Result;
use serde_json::Value;

use crate::config::Format;

/// A command result: the JSON document, plus optional rows for the
/// tabular formats. Without rows, tables show the top-level fields.
pub struct Report {
    pub json: Value,
    pub rows: Option<(Vec<String>, Vec<Vec<String>>)>,
}

impl Report {
    pub fn new(json: Value) -> Self {
        Self { json, rows: None }
    }

    pub fn with_rows(mut self, header: Vec<String>, rows: Vec<Vec<String>>) -> Self {
        self.rows = Some((header, rows));
        self
    }

    fn fields(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let rows = match &self.json {
            Value::Object(map) => map.iter().map(|(k, v)| vec![k.clone(), cell(v)]).collect(),
            other => vec![vec!["value".to_string(), cell(other)]],
        };
        (vec!["field".into(), "value".into()], rows)
    }

    pub fn render(&self, format: Format, out: &mut dyn Write) -> Result<()> {
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, &self.json)?;
                writeln!(out)?;
            }
            Format::Table => {
                let (header, rows) = self.rows.clone().unwrap_or_else(|| self.fields());
                write_table(&header, &rows, out)?;
            }
            Format::Csv => {
                let (header, rows) = self.rows.clone().unwrap_or_else(|| self.fields());
                write_csv(&header, &rows, out)?;
            }
        }
        Ok(())
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn write_csv(header: &[String], rows: &[Vec<String>], out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_table(header: &[String], rows: &[Vec<String>], out: &mut dyn Write) -> Result<()> {
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    writeln!(out, "{}", line(header))?;
    for r in rows {
        writeln!(out, "{}", line(r))?;
    }
    Ok(())
}

/// Shortest round-tripping decimal form.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
