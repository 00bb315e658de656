//! CSV layout: `# key=value` lines in key order, one header row, fixed-precision rows.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub meta: BTreeMap<String, String>,
    pub columns: Vec<String>,
    /// Column-major data; all columns have equal length.
    pub data: Vec<Vec<f64>>,
}

impl Table {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn column(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        self.columns.push(name.into());
        self.data.push(values);
        self
    }

    pub fn meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.meta.insert(key.into(), value.to_string());
        self
    }

    pub fn rows(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn render(&self, precision: usize) -> CliResult<String> {
        let n = self.rows();
        if self.data.iter().any(|c| c.len() != n) {
            return Err(CliError::Numerical("table columns differ in length".into()));
        }
        let mut out = String::new();
        for (k, v) in &self.meta {
            let v = v.replace(['\n', '\r'], " ");
            out.push_str(&format!("# {k}={v}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for i in 0..n {
            let row: Vec<String> = self.data.iter().map(|c| format_number(c[i], precision)).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path, precision: usize) -> CliResult<()> {
        let text = self.render(precision)?;
        write_file(path, text.as_bytes())
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

/// Fixed decimals; negative zero prints unsigned; NaN prints `nan`.
pub fn format_number(v: f64, precision: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    let s = format!("{v:.precision$}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// First two numeric columns of a CSV; `#` lines and a non-numeric header row are skipped.
pub fn read_two_columns(path: &Path) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let (mut t, mut y) = (Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        if record.len() < 2 {
            return Err(CliError::config(format!("{}: row {} has fewer than two columns", path.display(), i + 1)));
        }
        match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
            (Ok(a), Ok(b)) => {
                t.push(a);
                y.push(b);
            }
            _ if i == 0 => {}
            _ => {
                return Err(CliError::config(format!("{}: row {} is not numeric", path.display(), i + 1)));
            }
        }
    }
    Ok((t, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let t = Table::new()
            .column("x", vec![1.0, 2.0])
            .column("y", vec![-0.0000001, 0.5])
            .meta("b", 2)
            .meta("a", "one");
        assert_eq!(t.render(3).unwrap(), "# a=one\n# b=2\nx,y\n1.000,0.000\n2.000,0.500\n");
        assert_eq!(format_number(f64::NAN, 2), "nan");
        assert_eq!(format_number(-1.5, 1), "-1.5");
    }

    #[test]
    fn read_back() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "# note\ntime_us,value\n0,1\n1, 0.5\n").unwrap();
        assert_eq!(read_two_columns(&p).unwrap(), (vec![0.0, 1.0], vec![1.0, 0.5]));
        std::fs::write(&p, "0,1\nx,2\n").unwrap();
        assert!(read_two_columns(&p).is_err());
    }
}
