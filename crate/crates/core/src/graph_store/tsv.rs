//! `head<TAB>relation<TAB>tail` text format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use super::{GraphStore, Symbols, Tuple, NA_STR};
use crate::error::{Error, Result};

/// Splits a data line into its tab-separated fields. Returns `None` for blank
/// lines and `#` comments.
pub fn parse_tuple_line(line: &str) -> Option<Vec<&str>> {
    let line = line.trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() || line.starts_with('#') {
        return None;
    }
    Some(line.split('\t').collect())
}

/// Reads tuples from a graph file. NA relations are rejected with the line number.
pub fn read_tuples(path: &Path, symbols: &Symbols) -> Result<Vec<Tuple>> {
    let reader = BufReader::new(File::open(path)?);
    let mut tuples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let Some(fields) = parse_tuple_line(&line) else {
            continue;
        };
        let [h, r, t] = fields[..] else {
            return Err(Error::format(
                path,
                lineno,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        };
        if h.is_empty() || r.is_empty() || t.is_empty() {
            return Err(Error::format(path, lineno, "empty field"));
        }
        if r == NA_STR {
            return Err(Error::format(path, lineno, "relation NA cannot be loaded into a graph"));
        }
        tuples.push(symbols.tuple(h, r, t));
    }
    Ok(tuples)
}

/// Writes tuples, one per line, in the order given.
pub fn write_tuples<'a>(
    out: &mut impl Write,
    symbols: &Symbols,
    tuples: impl IntoIterator<Item = &'a Tuple>,
) -> std::io::Result<()> {
    for s in tuples {
        writeln!(out, "{}", symbols.display(s))?;
    }
    Ok(())
}

impl GraphStore {
    pub fn load(path: &Path, symbols: Arc<Symbols>) -> Result<Self> {
        let tuples = read_tuples(path, &symbols)?;
        GraphStore::from_tuples(symbols, tuples)
    }

    /// Saves in canonical (string-sorted) order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_canonical(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_canonical(&self, out: &mut impl Write) -> std::io::Result<()> {
        write_tuples(out, &self.symbols, &self.sorted_tuples())
    }
}
