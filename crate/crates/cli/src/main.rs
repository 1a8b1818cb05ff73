mod commands;
mod error;
mod grid;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

pub const THREADS_ENV: &str = "LBT_COEX_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "lbt-coex",
    version,
    about = "Wi-Fi / LBT cellular coexistence analysis"
)]
pub struct Cli {
    /// Scenario file of `key = value` lines. Built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Directory for CSV, plot and manifest files.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out_dir: PathBuf,

    #[command(flatten)]
    pub overrides: Overrides,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the coupled model at one operating point.
    Analyze,
    /// Search the cellular contention window that maximizes total throughput
    /// under graceful coexistence.
    Optimize(ZRange),
    /// Run the window search over a (q_W, q_C) grid.
    Sweep(SweepArgs),
    /// Compare the analysis against the Monte Carlo simulator.
    Validate(ValidateArgs),
    /// Write one chain's transition matrix and stationary distribution.
    DumpChain(DumpChainArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ZRange {
    #[arg(long, default_value_t = 2)]
    pub z_min: usize,
    #[arg(long, default_value_t = 64)]
    pub z_max: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Grid spec such as `q_w=0.1:0.9:0.1,q_c=0.1:0.9:0.1`.
    #[arg(long, default_value = "q_w=0.1:0.9:0.1,q_c=0.1:0.9:0.1")]
    pub grid: String,
    /// Comma-separated cellular rates in bit/s, one grid each. Defaults to
    /// the configured R_C.
    #[arg(long, value_delimiter = ',')]
    pub rates: Vec<f64>,
    #[command(flatten)]
    pub z: ZRange,
    /// Window the improvement is measured against.
    #[arg(long, default_value_t = 16)]
    pub reference_z: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Epochs per replication, warmup included.
    #[arg(long, default_value_t = 1_000_000)]
    pub slots: u64,
    #[arg(long, default_value_t = 10_000)]
    pub warmup: u64,
    #[arg(long, default_value_t = 20)]
    pub replications: usize,
    /// Also dump the first N epochs of replication 0 (capped at 100000).
    #[arg(long, value_name = "N")]
    pub trace: Option<u64>,
    /// Exit with status 2 when any analytic value leaves its interval.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Tech {
    Wifi,
    Cell,
}

#[derive(Debug, Clone, Args)]
pub struct DumpChainArgs {
    #[arg(long, value_enum)]
    pub tech: Tech,
    /// Conditional collision probability fed to the chain.
    #[arg(long)]
    pub p: f64,
    /// Idle probability seen while silent; `1 - p` when omitted.
    #[arg(long)]
    pub p_idle: Option<f64>,
}

macro_rules! overrides {
    ($($field:ident => $key:literal [$($alias:literal),*];)*) => {
        /// Per-key overrides, named exactly like the config file keys.
        #[derive(Debug, Clone, Default, Args)]
        pub struct Overrides {
            $(
                #[arg(long = $key, aliases = [$($alias),*], value_name = "VALUE",
                      global = true, help_heading = "Config overrides")]
                pub $field: Option<String>,
            )*
        }

        impl Overrides {
            pub fn pairs(&self) -> Vec<(&'static str, &str)> {
                let mut out = Vec::new();
                $(
                    if let Some(v) = &self.$field {
                        out.push(($key, v.as_str()));
                    }
                )*
                out
            }
        }
    };
}

overrides! {
    n_wifi => "n_W" ["n-w", "n_w"];
    n_cell => "n_C" ["n-c", "n_c"];
    q_wifi => "q_W" ["q-w", "q_w"];
    q_cell => "q_C" ["q-c", "q_c"];
    w0 => "W0" ["w0"];
    max_stage => "m" ["max-stage"];
    cw_cell => "Z" ["z"];
    rate_wifi => "R_W" ["r-w", "r_w"];
    rate_cell => "R_C" ["r-c", "r_c"];
    payload_wifi => "D_W" ["d-w", "d_w"];
    payload_cell => "D_C" ["d-c", "d_c"];
    phy_header_bits => "phy_header_bits" ["phy-header-bits"];
    mac_header_bits => "mac_header_bits" ["mac-header-bits"];
    ack_bits => "ack_bits" ["ack-bits"];
    sigma_us => "sigma_us" ["sigma-us"];
    sifs_us => "sifs_us" ["sifs-us"];
    difs_us => "difs_us" ["difs-us"];
    prop_delay_us => "prop_delay_us" ["prop-delay-us"];
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "{THREADS_ENV} must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size worker pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(CliError::USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match configure_threads().and_then(|()| commands::run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
