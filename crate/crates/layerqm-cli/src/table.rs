use crate::config::Format;
use crate::CliError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub metadata: BTreeMap<String, String>,
}

/// JSON form; non-finite numbers become null.
#[derive(Serialize, Deserialize)]
struct JsonTable {
    metadata: BTreeMap<String, String>,
    columns: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

impl ResultTable {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, ..Default::default() }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<(), CliError> {
        if row.len() != self.columns.len() {
            return Err(CliError::Domain(format!(
                "row of length {} in a table with {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.insert(key.to_string(), value.to_string());
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let t: JsonTable = serde_json::from_str(text).map_err(|e| CliError::Config(format!("table json: {e}")))?;
        Ok(Self {
            columns: t.columns,
            rows: t.rows.into_iter().map(|r| r.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect()).collect(),
            metadata: t.metadata,
        })
    }

    /// Reads back the CSV written by [`emit`].
    pub fn from_csv(text: &str) -> Result<Self, CliError> {
        let bad = |m: String| CliError::Config(format!("table csv: {m}"));
        let mut t = ResultTable::default();
        let mut header = false;
        for line in text.lines() {
            if let Some(m) = line.strip_prefix("# ") {
                let (k, v) = m.split_once(" = ").ok_or_else(|| bad(format!("bad metadata line '{line}'")))?;
                t.metadata.insert(k.to_string(), v.replace("\\n", "\n"));
            } else if !header {
                t.columns = if line.is_empty() { vec![] } else { line.split(',').map(str::to_string).collect() };
                header = true;
            } else {
                let row = line
                    .split(',')
                    .map(|s| s.parse::<f64>().map_err(|e| bad(format!("'{s}': {e}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                t.push(row).map_err(|e| bad(e.to_string()))?;
            }
        }
        Ok(t)
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn emit(table: &ResultTable, format: Format, out: &mut impl Write) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    match format {
        Format::Csv => {
            for (k, v) in &table.metadata {
                writeln!(out, "# {k} = {}", v.replace('\n', "\\n")).map_err(io)?;
            }
            writeln!(out, "{}", table.columns.join(",")).map_err(io)?;
            for r in &table.rows {
                let cells: Vec<String> = r.iter().map(|&v| format_number(v)).collect();
                writeln!(out, "{}", cells.join(",")).map_err(io)?;
            }
        }
        Format::Json => {
            let j = JsonTable {
                metadata: table.metadata.clone(),
                columns: table.columns.clone(),
                rows: table.rows.iter().map(|r| r.iter().map(|&v| v.is_finite().then_some(v)).collect()).collect(),
            };
            serde_json::to_writer_pretty(&mut *out, &j).map_err(|e| CliError::Io(e.to_string()))?;
            writeln!(out).map_err(io)?;
        }
    }
    Ok(())
}
