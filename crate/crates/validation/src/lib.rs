//! Helpers for the acceptance target: run scenarios in-process, read their
//! CSV output back and format pass/fail checks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use sicspin_cli::{execute, Overrides, Scenario};

/// One sub-check: whether it holds and a one-line description.
pub type Check = (bool, String);

/// A scenario CSV: `# key=value` meta lines, a header row, numeric rows.
#[derive(Debug, Clone, Default)]
pub struct Csv {
    pub meta: BTreeMap<String, String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Csv {
    pub fn parse(text: &str) -> Result<Csv, String> {
        let mut csv = Csv::default();
        for line in text.lines() {
            if let Some(kv) = line.strip_prefix("# ") {
                let (k, v) = kv.split_once('=').ok_or_else(|| format!("bad meta line `{line}`"))?;
                csv.meta.insert(k.to_string(), v.to_string());
            } else if csv.header.is_empty() {
                csv.header = line.split(',').map(str::to_string).collect();
            } else {
                let row = line
                    .split(',')
                    .map(|x| x.parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
                    .collect::<Result<Vec<_>, _>>()?;
                csv.rows.push(row);
            }
        }
        Ok(csv)
    }

    pub fn read(path: &Path) -> Result<Csv, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Csv::parse(&text)
    }

    pub fn num(&self, key: &str) -> Result<f64, String> {
        self.meta
            .get(key)
            .ok_or_else(|| format!("meta `{key}` missing"))?
            .parse()
            .map_err(|e| format!("meta `{key}`: {e}"))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, String> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("column `{name}` missing"))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Values of meta keys `{prefix}{k}{suffix}` for k = 1, 2, ... up to the first gap.
    pub fn indexed(&self, prefix: &str, suffix: &str) -> Vec<f64> {
        (1..)
            .map_while(|k| self.num(&format!("{prefix}{k}{suffix}")).ok())
            .collect()
    }
}

/// Runs `scenario` with `--set` style overrides, writing `<dir>/<name>.csv`, and reads it back.
pub fn run_scenario(dir: &Path, name: &str, scenario: &str, sets: &[&str]) -> Result<Csv, String> {
    let scenario = Scenario::parse(scenario).ok_or_else(|| format!("unknown scenario `{scenario}`"))?;
    let csv = dir.join(format!("{name}.csv"));
    let overrides = Overrides {
        sets: sets.iter().map(|s| s.to_string()).collect(),
        csv: Some(csv.clone()),
        plot: None,
    };
    execute(scenario, None, &overrides).map_err(|e| e.to_string())?;
    Csv::read(&csv)
}

/// Runs a shipped example config with paths relative to the current directory.
pub fn run_example(config: &Path) -> Result<(), String> {
    let stem = config.file_stem().and_then(|s| s.to_str()).ok_or("bad example name")?;
    let name = stem.split('_').next().unwrap_or(stem);
    let scenario = Scenario::parse(name).ok_or_else(|| format!("{stem}: no scenario named `{name}`"))?;
    execute(scenario, Some(config), &Overrides::default())
        .map(|_| ())
        .map_err(|e| format!("{stem}: {e}"))
}

/// Shipped example configs, sorted by name.
pub fn example_configs() -> Result<Vec<PathBuf>, String> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/examples");
    let mut configs: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    configs.sort();
    Ok(configs)
}

/// Every `.csv` below `dir`, sorted.
pub fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    if let Ok(entries) = std::fs::read_dir(dir) {
        for e in entries.flatten() {
            let p = e.path();
            if p.is_dir() {
                out.extend(csv_files(&p));
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

pub fn within(label: &str, got: f64, want: f64, tol: f64) -> Check {
    ((got - want).abs() <= tol, format!("{label}: {got:.4} vs {want:.4} (|Δ| ≤ {tol})"))
}

pub fn within_rel(label: &str, got: f64, want: f64, rel: f64) -> Check {
    let err = (got - want).abs() / want.abs();
    (err <= rel, format!("{label}: {got:.4} vs {want:.4} ({:.3}% ≤ {}%)", 100.0 * err, 100.0 * rel))
}

pub fn timed(label: &str, elapsed: Duration, limit_s: f64) -> Check {
    let s = elapsed.as_secs_f64();
    (s < limit_s, format!("{label}runtime {s:.3} s < {limit_s} s"))
}

/// Prints the PASS/FAIL line and its sub-checks; returns whether all hold.
pub fn report(id: u32, title: &str, checks: &[Check]) -> bool {
    let pass = checks.iter().all(|(ok, _)| *ok);
    println!("{} criterion {id}: {title}", if pass { "PASS" } else { "FAIL" });
    for (ok, detail) in checks {
        println!("    [{}] {detail}", if *ok { "ok" } else { "FAIL" });
    }
    pass
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_layout() {
        let c = Csv::parse("# a=1.5\n# line_1_G=3\n# line_2_G=4\nx,y\n1,2\n3,nan\n").unwrap();
        assert_eq!(c.num("a").unwrap(), 1.5);
        assert_eq!(c.indexed("line_", "_G"), vec![3.0, 4.0]);
        assert_eq!(c.column("x").unwrap(), vec![1.0, 3.0]);
        assert!(c.column("y").unwrap()[1].is_nan());
        assert!(c.column("z").is_err());
    }

    #[test]
    fn check_helpers() {
        assert!(within("a", 1.0, 1.05, 0.1).0);
        assert!(!within_rel("b", 1.0, 1.05, 0.01).0);
        assert!(timed("", Duration::from_millis(1), 1.0).0);
    }
}
