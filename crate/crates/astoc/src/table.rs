//! In-memory CSV tables, serialized once per output file.

use std::fs;
use std::path::Path;

use crate::error::{CliError, CliResult};

/// Reals are written in shortest round-trip scientific notation.
pub fn real(v: f64) -> String {
    format!("{v:e}")
}

pub fn opt_real(v: Option<f64>) -> String {
    v.map(real).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    /// Emitted as `# line` before the header.
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            comments: Vec::new(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for c in &self.comments {
            out.extend_from_slice(b"# ");
            out.extend_from_slice(c.as_bytes());
            out.push(b'\n');
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header).expect("write to memory");
        for r in &self.rows {
            w.write_record(r).expect("write to memory");
        }
        w.into_inner().expect("flush to memory")
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        fs::write(path, self.to_bytes()).map_err(|e| CliError::io(path, e))
    }

    /// Parses a table written by [`Table::to_bytes`].
    pub fn parse(bytes: &[u8]) -> CliResult<Table> {
        let text = std::str::from_utf8(bytes).map_err(|e| CliError::Validation(e.to_string()))?;
        let mut comments = Vec::new();
        let mut body = text;
        while let Some(rest) = body.strip_prefix("# ") {
            let end = rest.find('\n').unwrap_or(rest.len());
            comments.push(rest[..end].to_string());
            body = rest.get(end + 1..).unwrap_or("");
        }
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let header = r
            .headers()
            .map_err(|e| CliError::Validation(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|x| x.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(Table { comments, header, rows })
    }

    /// Column by name, as reals. Empty fields become NaN.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| *h == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| r[i].parse().unwrap_or(f64::NAN))
                .collect(),
        )
    }
}
