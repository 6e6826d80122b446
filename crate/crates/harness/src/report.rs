//! CSV assembly and report output.
//!
//! Every report file starts with a documented header row and is written in
//! one shot by a single writer. Floats are formatted with Rust's shortest
//! round-trip `Display`, so a report is a byte-level pure function of its
//! inputs.

use std::fs;
use std::path::{Path, PathBuf};

use crate::HarnessError;

/// An in-memory CSV table: a fixed header and formatted rows.
#[derive(Debug, Clone)]
pub struct Csv {
    header: String,
    rows: Vec<String>,
}

impl Csv {
    pub fn new(header: &str) -> Csv {
        Csv {
            header: header.to_string(),
            rows: Vec::new(),
        }
    }

    /// Append one row from pre-formatted fields.
    pub fn row(&mut self, fields: &[String]) {
        debug_assert_eq!(
            fields.len(),
            self.header.split(',').count(),
            "row width must match the header"
        );
        self.rows.push(fields.join(","));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_string(&self) -> String {
        let mut out = String::with_capacity(self.header.len() + 1 + self.rows.len() * 32);
        out.push_str(&self.header);
        out.push('\n');
        for r in &self.rows {
            out.push_str(r);
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip decimal formatting for a float field.
pub fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Ensure `dir` exists and write `name` inside it, replacing any previous
/// content.
pub fn write_report(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

/// Mean of a slice; zero for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Median of a slice; zero for an empty slice.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("median of NaN"));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Root-mean-square of a slice; zero for an empty slice.
pub fn rms(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt()
    }
}
