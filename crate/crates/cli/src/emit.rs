//! Versioned CSV tables. The first line is `# qhbmo-csv v1 <kind>`; numbers use
//! the shortest round-trip formatting and `NA` marks undefined values.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

pub const SCHEMA: &str = "qhbmo-csv v1";

pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else {
        format!("{x}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), num)
}

pub struct Table {
    pub kind: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(kind: &str, header: &[&str]) -> Self {
        Table { kind: kind.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path, file: &str) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(file);
        let mut f = File::create(&path)?;
        writeln!(f, "# {SCHEMA} {}", self.kind)?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        let first = text.lines().next().unwrap_or("");
        let kind = first
            .strip_prefix("# ")
            .and_then(|s| s.strip_prefix(SCHEMA))
            .map(|s| s.trim().to_string())
            .ok_or_else(|| CliError::Usage(format!("{}: not a {SCHEMA} file", path.display())))?;
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header = r.headers()?.iter().map(String::from).collect();
        let rows = r.records().map(|rec| rec.map(|rec| rec.iter().map(String::from).collect())).collect::<Result<_, _>>()?;
        Ok(Table { kind, header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Usage(format!("{} table has no column {name:?}", self.kind)))
    }

    /// Values of a numeric column; `NA` becomes NaN.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let k = self.column(name)?;
        self.rows
            .iter()
            .map(|r| if r[k] == "NA" { Ok(f64::NAN) } else { r[k].parse().map_err(|_| CliError::Usage(format!("bad number {:?}", r[k]))) })
            .collect()
    }
}
