//! CSV and JSON persistence helpers shared by datasets, ensembles and the
//! command-line tables.
//!
//! Every CSV starts with a `# schema: <name>/<version>` comment line, then a
//! header row. Floats are written in Rust's shortest round-trip form so a
//! save/load cycle is exact and reruns are byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const MATRIX_SCHEMA: &str = "kslab-matrix/1";

/// Streaming CSV table writer with the schema comment already emitted.
pub struct CsvTable {
    inner: csv::Writer<BufWriter<File>>,
}

impl CsvTable {
    pub fn create(path: &Path, schema: &str, header: &[&str]) -> Result<Self> {
        let mut file = BufWriter::new(File::create(path)?);
        write!(file, "# schema: {schema}\r\n")?;
        let mut inner = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(file);
        inner.write_record(header)?;
        Ok(Self { inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Reads a schema-commented CSV into its header and string records.
pub fn read_table(path: &Path) -> Result<(Option<String>, Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path)?;
    let schema = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# schema: "))
        .map(str::to_owned);
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?.iter().map(str::to_owned).collect());
    }
    Ok((schema, header, rows))
}

pub fn write_matrix(path: &Path, a: &Matrix) -> Result<()> {
    let header: Vec<String> = (1..=a.ncols()).map(|j| format!("c{j}")).collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = CsvTable::create(path, MATRIX_SCHEMA, &header_refs)?;
    for row in a.row_iter() {
        t.row(row.iter().map(|v| format!("{v}")))?;
    }
    t.finish()
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let malformed = |reason: String| Error::Malformed {
        path: path.display().to_string(),
        reason,
    };
    let (_, header, rows) = read_table(path)?;
    let cols = header.len();
    if rows.is_empty() || cols == 0 {
        return Err(malformed("empty matrix".into()));
    }
    let mut data = Vec::with_capacity(rows.len() * cols);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            return Err(malformed(format!("row {} has {} fields", i + 1, r.len())));
        }
        for f in r {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| malformed(format!("not a number: {f:?}")))?;
            data.push(v);
        }
    }
    let a = Matrix::from_row_slice(rows.len(), cols, &data);
    crate::linalg::check_finite(&a)?;
    Ok(a)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
