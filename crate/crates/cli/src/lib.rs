//! Scenario runner: TOML config plus `--set` overrides in, CSV and SVG out.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod plot;
pub mod scenarios;
pub mod schema;
pub mod sequence;
pub mod table;

use std::path::{Path, PathBuf};

pub use config::Overrides;
pub use error::{CliError, CliResult};
pub use schema::Scenario;

#[derive(Debug, Clone)]
pub struct RunReport {
    pub csv_path: PathBuf,
    pub plot_path: Option<PathBuf>,
    pub extra_paths: Vec<PathBuf>,
    pub rows: usize,
    pub notes: Vec<String>,
}

/// Load the config, run the scenario and write every output file.
pub fn execute(scenario: Scenario, config: Option<&Path>, overrides: &Overrides) -> CliResult<RunReport> {
    let params = config::load(scenario, config, overrides)?;
    let out = scenarios::run(&params)?;
    let precision = params.output.precision;
    out.table.write(&params.output.csv_path, precision)?;
    let mut extra_paths = Vec::new();
    for (path, table) in &out.extra {
        table.write(path, precision)?;
        extra_paths.push(path.clone());
    }
    if let Some(path) = &params.output.plot_path {
        table::write_file(path, out.plot.render_svg()?.as_bytes())?;
    }
    Ok(RunReport {
        csv_path: params.output.csv_path,
        plot_path: params.output.plot_path,
        extra_paths,
        rows: out.table.rows(),
        notes: out.notes,
    })
}
