//! Config loading: defaults < config file < `--set`, checked against the schema.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use toml::Value;

use crate::error::{CliError, CliResult};
use crate::schema::{output_keys, Fallback, KeySpec, Scenario, ValueKind};

/// Validated values of one key set (scenario keys or one nested table).
#[derive(Debug, Clone, PartialEq)]
pub struct Values {
    context: String,
    map: BTreeMap<String, Value>,
}

impl Values {
    fn get(&self, key: &str) -> CliResult<&Value> {
        self.map
            .get(key)
            .ok_or_else(|| CliError::config(format!("{}: key `{key}` has no value", self.context)))
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn raw(&self) -> &BTreeMap<String, Value> {
        &self.map
    }

    pub fn f64(&self, key: &str) -> CliResult<f64> {
        self.opt_f64(key)?
            .ok_or_else(|| CliError::config(format!("{}: key `{key}` has no value", self.context)))
    }

    pub fn opt_f64(&self, key: &str) -> CliResult<Option<f64>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(Value::Float(v)) => Ok(Some(*v)),
            Some(Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(_) => Err(self.type_error(key, "number")),
        }
    }

    pub fn usize(&self, key: &str) -> CliResult<usize> {
        match self.get(key)? {
            Value::Integer(v) if *v >= 0 => Ok(*v as usize),
            Value::Integer(_) => Err(CliError::config(format!("{}: key `{key}` must be ≥ 0", self.context))),
            _ => Err(self.type_error(key, "integer")),
        }
    }

    pub fn u64(&self, key: &str) -> CliResult<u64> {
        self.usize(key).map(|v| v as u64)
    }

    pub fn bool(&self, key: &str) -> CliResult<bool> {
        match self.get(key)? {
            Value::Boolean(b) => Ok(*b),
            _ => Err(self.type_error(key, "boolean")),
        }
    }

    pub fn str(&self, key: &str) -> CliResult<&str> {
        match self.get(key)? {
            Value::String(s) => Ok(s),
            _ => Err(self.type_error(key, "string")),
        }
    }

    pub fn opt_str(&self, key: &str) -> CliResult<Option<&str>> {
        if self.is_set(key) {
            self.str(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn opt_f64_list(&self, key: &str) -> CliResult<Option<Vec<f64>>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(x) => Ok(*x as f64),
                    _ => Err(self.type_error(key, "number list")),
                })
                .collect::<CliResult<Vec<f64>>>()
                .map(Some),
            Some(_) => Err(self.type_error(key, "number list")),
        }
    }

    pub fn f64_list(&self, key: &str) -> CliResult<Vec<f64>> {
        self.opt_f64_list(key)?
            .ok_or_else(|| CliError::config(format!("{}: key `{key}` has no value", self.context)))
    }

    pub fn opt_str_list(&self, key: &str) -> CliResult<Option<Vec<String>>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| v.as_str().map(str::to_string).ok_or_else(|| self.type_error(key, "string list")))
                .collect::<CliResult<Vec<_>>>()
                .map(Some),
            Some(_) => Err(self.type_error(key, "string list")),
        }
    }

    /// Nested tables, already validated against their sub-schema.
    pub fn opt_tables(&self, key: &str, schema: &[KeySpec]) -> CliResult<Option<Vec<Values>>> {
        let Some(Value::Array(items)) = self.map.get(key) else {
            return Ok(None);
        };
        items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                let Value::Table(t) = item else {
                    return Err(self.type_error(key, "table list"));
                };
                resolve(&format!("{}.{key}[{i}]", self.context), schema, t.clone().into_iter().collect())
            })
            .collect::<CliResult<Vec<_>>>()
            .map(Some)
    }

    fn type_error(&self, key: &str, expected: &str) -> CliError {
        CliError::config(format!("{}: key `{key}` must be a {expected}", self.context))
    }
}

fn check_kind(context: &str, spec: &KeySpec, value: &Value) -> CliResult<Value> {
    let fail = || CliError::config(format!("{context}: key `{}` must be a {}", spec.name, spec.kind.type_name()));
    let numeric = |v: &Value| matches!(v, Value::Float(_) | Value::Integer(_));
    Ok(match (spec.kind, value) {
        (ValueKind::Float, Value::Integer(v)) => Value::Float(*v as f64),
        (ValueKind::Float, Value::Float(v)) if v.is_finite() => value.clone(),
        (ValueKind::Int, Value::Integer(_)) | (ValueKind::Bool, Value::Boolean(_)) | (ValueKind::Text, Value::String(_)) => {
            value.clone()
        }
        (ValueKind::Choice(options), Value::String(s)) => {
            if !options.contains(&s.as_str()) {
                return Err(CliError::config(format!(
                    "{context}: key `{}` is \"{s}\", expected one of {}",
                    spec.name,
                    options.join("|")
                )));
            }
            value.clone()
        }
        (ValueKind::FloatList, Value::Array(a)) if a.iter().all(numeric) => value.clone(),
        (ValueKind::TextList, Value::Array(a)) if a.iter().all(Value::is_str) => value.clone(),
        (ValueKind::Tables(sub), Value::Array(a)) => {
            for (i, item) in a.iter().enumerate() {
                let Value::Table(t) = item else { return Err(fail()) };
                resolve(&format!("{context}.{}[{i}]", spec.name), &sub(), t.clone().into_iter().collect())?;
            }
            value.clone()
        }
        _ => return Err(fail()),
    })
}

/// Reject unknown keys, type-check, fill defaults, require required keys.
fn resolve(context: &str, schema: &[KeySpec], given: BTreeMap<String, Value>) -> CliResult<Values> {
    for key in given.keys() {
        if !schema.iter().any(|s| s.name == key) {
            return Err(CliError::config(format!("{context}: unknown key `{key}`")));
        }
    }
    let mut map = BTreeMap::new();
    for spec in schema {
        match given.get(spec.name) {
            Some(v) => {
                map.insert(spec.name.to_string(), check_kind(context, spec, v)?);
            }
            None => {
                if spec.default == Fallback::Required {
                    return Err(CliError::config(format!("{context}: missing required key `{}`", spec.name)));
                }
                if let Some(v) = spec.default.to_value() {
                    map.insert(spec.name.to_string(), v);
                }
            }
        }
    }
    Ok(Values {
        context: context.to_string(),
        map,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub csv_path: PathBuf,
    pub plot_path: Option<PathBuf>,
    pub precision: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub scenario: Scenario,
    pub values: Values,
    pub output: OutputSpec,
    /// Directory of the config file; relative input paths resolve against it.
    pub base_dir: PathBuf,
}

impl Params {
    pub fn input_path(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// `key=value` pairs; the value is read as a TOML value, else as a bare string.
    pub sets: Vec<String>,
    pub csv: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

fn parse_set(item: &str) -> CliResult<(Vec<String>, Value)> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("--set `{item}`: expected key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::config(format!("--set `{item}`: empty key")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key.split('.').map(str::to_string).collect(), value))
}

pub fn parse_toml(text: &str, origin: &str) -> CliResult<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| CliError::config(format!("{origin}: {}", e.message())))
}

pub fn load(scenario: Scenario, config: Option<&Path>, overrides: &Overrides) -> CliResult<Params> {
    let (mut table, base_dir) = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (parse_toml(&text, &path.display().to_string())?, dir)
        }
        None => (toml::Table::new(), PathBuf::new()),
    };
    let base_dir = if base_dir.as_os_str().is_empty() { PathBuf::from(".") } else { base_dir };
    from_table(scenario, &mut table, overrides, base_dir)
}

pub fn from_table(
    scenario: Scenario,
    table: &mut toml::Table,
    overrides: &Overrides,
    base_dir: PathBuf,
) -> CliResult<Params> {
    for item in &overrides.sets {
        let (path, value) = parse_set(item)?;
        match path.as_slice() {
            [key] => {
                table.insert(key.clone(), value);
            }
            [section, key] if section == "output" => {
                let out = table
                    .entry("output")
                    .or_insert_with(|| Value::Table(toml::Table::new()));
                let Value::Table(out) = out else {
                    return Err(CliError::config("key `output` must be a table"));
                };
                out.insert(key.clone(), value);
            }
            _ => return Err(CliError::config(format!("--set `{item}`: unsupported key path"))),
        }
    }
    match table.remove("scenario") {
        None => {}
        Some(Value::String(s)) if s == scenario.name() => {}
        Some(other) => {
            return Err(CliError::config(format!(
                "key `scenario` is {other} but the command runs `{}`",
                scenario.name()
            )))
        }
    }
    let output_table = match table.remove("output") {
        None => BTreeMap::new(),
        Some(Value::Table(t)) => t.into_iter().collect(),
        Some(_) => return Err(CliError::config("key `output` must be a table")),
    };
    let values = resolve(scenario.name(), &scenario.keys(), table.clone().into_iter().collect())?;
    let out = resolve("output", &output_keys(), output_table)?;
    let precision = out.usize("precision")?;
    if precision > 17 {
        return Err(CliError::config("output: key `precision` must be ≤ 17"));
    }
    let csv_path = overrides
        .csv
        .clone()
        .or_else(|| out.opt_str("csvPath").ok().flatten().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", scenario.name())));
    let plot_path = overrides
        .plot
        .clone()
        .or_else(|| out.opt_str("plotPath").ok().flatten().map(PathBuf::from));
    Ok(Params {
        scenario,
        values,
        output: OutputSpec {
            csv_path,
            plot_path,
            precision,
        },
        base_dir,
    })
}

/// Scalar and list values rendered for CSV metadata; nested tables are skipped.
pub fn render_value(v: &Value) -> Option<String> {
    match v {
        Value::Float(x) => Some(format!("{x}")),
        Value::Integer(x) => Some(format!("{x}")),
        Value::Boolean(b) => Some(format!("{b}")),
        Value::String(s) => Some(s.clone()),
        Value::Array(a) => {
            let parts: Option<Vec<String>> = a.iter().map(|x| match x {
                Value::Table(_) => None,
                other => render_value(other),
            }).collect();
            parts.map(|p| format!("[{}]", p.join(";")))
        }
        _ => None,
    }
}
