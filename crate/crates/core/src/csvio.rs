//! Small helpers shared by every CSV writer in the crate.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::{Error, Result};

/// Formats a float with 17 significant digits.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) struct CsvFile {
    path: std::path::PathBuf,
    inner: BufWriter<File>,
}

impl CsvFile {
    pub(crate) fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            inner: BufWriter::new(file),
        })
    }

    pub(crate) fn line(&mut self, line: &str) -> Result<()> {
        writeln!(self.inner, "{line}").map_err(|e| Error::io(&self.path, e))
    }

    pub(crate) fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> Result<()> {
        let joined = fields
            .iter()
            .map(|f| f.as_ref())
            .collect::<Vec<_>>()
            .join(",");
        self.line(&joined)
    }

    pub(crate) fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Reads a comma-separated file, skipping `#` comment lines. Returns the
/// header and the data rows.
pub(crate) fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::Csv {
            path: path.to_path_buf(),
            msg: "missing header".into(),
        })?
        .split(',')
        .map(str::to_owned)
        .collect::<Vec<_>>();
    let rows = lines
        .map(|l| l.split(',').map(|f| f.trim().to_owned()).collect())
        .collect();
    Ok((header, rows))
}

pub(crate) fn parse_field<T: std::str::FromStr>(path: &Path, field: &str) -> Result<T> {
    field.parse().map_err(|_| Error::Csv {
        path: path.to_path_buf(),
        msg: format!("cannot parse field {field:?}"),
    })
}
