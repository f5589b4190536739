//! CSV tables and where they go.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Shortest round-trip representation; NaN becomes an empty cell.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<I, S>(name: &str, header: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { name: name.into(), header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(CliError::csv)?;
        for r in &self.rows {
            w.write_record(r).map_err(CliError::csv)?;
        }
        w.into_inner().map_err(|e| CliError::csv(e.into_error()))
    }
}

/// Writes `<dir>/<name>.csv` for every table, or all tables to stdout (each
/// preceded by a `# name` line when there are several).
pub fn emit(tables: &[Table], dir: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    match dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            tables
                .iter()
                .map(|t| {
                    let path = dir.join(format!("{}.csv", t.name));
                    std::fs::write(&path, t.to_csv()?).map_err(|e| CliError::io(&path, e))?;
                    Ok(path)
                })
                .collect()
        }
        None => {
            let mut out = std::io::stdout().lock();
            for (k, t) in tables.iter().enumerate() {
                if tables.len() > 1 {
                    if k > 0 {
                        writeln!(out).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
                    }
                    writeln!(out, "# {}", t.name).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
                }
                out.write_all(&t.to_csv()?).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
            }
            Ok(Vec::new())
        }
    }
}
