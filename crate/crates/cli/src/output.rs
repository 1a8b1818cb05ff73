//! CSV files, plot scripts and run manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use lbt_coex::Config;
use serde::Serialize;

use crate::error::CliError;

pub const TRACES_SCHEMA: &str = "# lbt-coex traces v1";
pub const TRACES_HEADER: [&str; 8] = [
    "q_w",
    "q_c",
    "z",
    "s_co_w_bps",
    "s_co_c_bps",
    "s_only_w_bps",
    "constraint_met",
    "s_total_bps",
];

pub const GRID_SCHEMA: &str = "# lbt-coex grid v1";
pub const GRID_HEADER: [&str; 6] = [
    "q_w",
    "q_c",
    "z_star",
    "feasible",
    "s_total_bps",
    "improvement",
];

pub const SUMMARY_SCHEMA: &str = "# lbt-coex sweep-summary v1";
pub const SUMMARY_HEADER: [&str; 5] = [
    "r_c_bps",
    "cells",
    "feasible_cells",
    "mean_improvement",
    "reference_z",
];

pub const ANALYZE_SCHEMA: &str = "# lbt-coex analyze v1";
pub const ANALYZE_HEADER: [&str; 14] = [
    "q_w",
    "q_c",
    "z",
    "tau_w",
    "tau_c",
    "p_w",
    "p_c",
    "residual",
    "iterations",
    "converged",
    "t_state_us",
    "s_w_bps",
    "s_c_bps",
    "s_total_bps",
];

pub const DIVERGENCE_SCHEMA: &str = "# lbt-coex divergence v1";
pub const DIVERGENCE_HEADER: [&str; 7] = [
    "quantity",
    "analytic",
    "simulated",
    "half_width",
    "z_score",
    "rel_error",
    "within_ci",
];

pub const EPOCH_TRACE_SCHEMA: &str = "# lbt-coex epoch-trace v1";

pub const CHAIN_SCHEMA: &str = "# lbt-coex chain v1";
pub const CHAIN_HEADER: [&str; 3] = ["from", "to", "probability"];
pub const STATIONARY_SCHEMA: &str = "# lbt-coex stationary v1";
pub const STATIONARY_HEADER: [&str; 2] = ["state", "probability"];

/// Collects the files a command writes so the manifest can list them.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_csv<R, I>(
        &mut self,
        name: &str,
        schema: &str,
        header: &[&str],
        rows: R,
    ) -> Result<PathBuf, CliError>
    where
        R: IntoIterator<Item = I>,
        I: IntoIterator<Item = String>,
    {
        let path = self.path(name);
        let mut buf = Vec::new();
        buf.extend_from_slice(schema.as_bytes());
        buf.push(b'\n');
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let fail = |e: csv::Error| CliError::io(&path, e);
            w.write_record(header).map_err(fail)?;
            for row in rows {
                w.write_record(row).map_err(fail)?;
            }
            w.flush().map_err(|e| CliError::io(&path, e))?;
        }
        self.write_bytes(name, &buf)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Writes `<command>.manifest.json` covering every file written so far.
    pub fn finish(self, manifest: ManifestInput<'_>) -> Result<PathBuf, CliError> {
        let path = self.path(&format!("{}.manifest.json", manifest.command));
        let m = RunManifest {
            command: manifest.command,
            tool_version: env!("CARGO_PKG_VERSION"),
            timestamp_unix_s: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            argv: std::env::args().collect(),
            config_file: manifest.config.to_config_string(),
            config: manifest.config,
            options: manifest.options,
            prng: manifest.prng,
            outputs: self
                .written
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
        };
        let json = serde_json::to_string_pretty(&m).expect("manifest serializes");
        fs::write(&path, json + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

#[derive(Debug, Serialize)]
pub struct Prng {
    pub algorithm: &'static str,
    pub seed: u64,
}

pub struct ManifestInput<'a> {
    pub command: &'static str,
    pub config: &'a Config,
    pub options: serde_json::Value,
    pub prng: Option<Prng>,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'static str,
    tool_version: &'static str,
    timestamp_unix_s: u64,
    argv: Vec<String>,
    /// Resolved scenario in config-file syntax, loadable with `--config`.
    config_file: String,
    config: &'a Config,
    options: serde_json::Value,
    prng: Option<Prng>,
    outputs: Vec<String>,
}

/// Gnuplot script drawing one column of a grid CSV as a heatmap.
pub fn heatmap_script(csv_name: &str, column: usize, title: &str, png_name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set datafile missing ''\n\
         set terminal pngcairo size 640,520\n\
         set output '{png_name}'\n\
         set title '{title}'\n\
         set xlabel 'q_C'\n\
         set ylabel 'q_W'\n\
         set view map\n\
         plot '{csv_name}' every ::1 using 2:1:{column} with image notitle\n"
    )
}

pub fn num(x: f64) -> String {
    format!("{x}")
}
