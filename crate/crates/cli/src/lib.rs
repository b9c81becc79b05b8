//! The `pulsecloud` command line.
//!
//! Every command writes one machine-readable result (JSON or CSV) to the
//! writer it is handed; diagnostics go through `log` to stderr.

pub mod commands;
pub mod transport;

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use transport::HttpTransport;

#[derive(Debug, Parser)]
#[command(name = "pulsecloud", version, about = "Wearable vital-signs simulator and telemetry service")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the telemetry server.
    Serve(ServeArgs),
    /// Run a simulated device against a server over virtual time.
    Simulate(SimulateArgs),
    /// Estimate BPM from a `t_s,volts` capture.
    Pipeline(PipelineArgs),
    /// Derive the scaling factor from paired readings.
    Calibrate(CalibrateArgs),
    /// Dump a channel's feed as CSV.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, env = "PULSECLOUD_LISTEN", default_value = "127.0.0.1:3000")]
    pub listen: SocketAddr,
    #[arg(long, env = "PULSECLOUD_DATA_DIR", default_value = "pulsecloud-data")]
    pub data_dir: PathBuf,
    /// Seconds required between entries on one channel.
    #[arg(long, env = "PULSECLOUD_MIN_UPDATE_INTERVAL", default_value_t = 15.0)]
    pub min_update_interval: f64,
    /// Login session lifetime in seconds.
    #[arg(long, env = "PULSECLOUD_SESSION_TTL", default_value_t = 3600.0)]
    pub session_ttl: f64,
    /// Seed for API key generation.
    #[arg(long, env = "PULSECLOUD_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "PULSECLOUD_FSYNC", default_value_t = true, action = clap::ArgAction::Set)]
    pub fsync: bool,
    /// Create a `temperature_c,pulse_bpm` channel with this name unless one exists.
    #[arg(long = "channel", value_name = "NAME")]
    pub channels: Vec<String>,
    /// Login account as `USER:PASSWORD:ID[,ID...]`.
    #[arg(long = "user", value_name = "SPEC")]
    pub users: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Device configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Virtual seconds to run.
    #[arg(long)]
    pub duration: f64,
    /// JSON list of `[start_s, end_s]` link outages.
    #[arg(long)]
    pub outages: Option<PathBuf>,
    /// Overrides `server_url` from the config.
    #[arg(long, env = "PULSECLOUD_SERVER_URL")]
    pub server_url: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub hp_cutoff: f64,
    #[arg(long, default_value_t = 3.5)]
    pub lp_cutoff: f64,
    /// First-order sections per side.
    #[arg(long, default_value_t = 2)]
    pub stages: usize,
    #[arg(long, default_value_t = 250.0)]
    pub refractory_ms: f64,
    /// Scaling factor; adds `scaled_bpm` to the output.
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub warmup_s: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    /// Device readings, one per line.
    #[arg(long)]
    pub device: PathBuf,
    /// Reference readings, one per line.
    #[arg(long)]
    pub reference: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub channel_id: u64,
    #[arg(long, default_value_t = 100)]
    pub results: usize,
    #[arg(long, env = "PULSECLOUD_READ_KEY")]
    pub read_key: String,
    #[arg(long, env = "PULSECLOUD_SERVER_URL", default_value = "http://127.0.0.1:3000")]
    pub server_url: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, files or configuration.
    #[error("{0}")]
    Input(String),
    /// The server refused us or could not be reached.
    #[error("{0}")]
    Remote(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Remote(_) => 3,
        }
    }
}

impl From<pulsecloud_core::Error> for CliError {
    fn from(e: pulsecloud_core::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Runs one parsed command, writing its result to `out`.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> CliResult<()> {
    match cli.command {
        Command::Serve(a) => commands::serve(&a, out),
        Command::Simulate(a) => commands::simulate(&a, out),
        Command::Pipeline(a) => commands::pipeline(&a, out),
        Command::Calibrate(a) => commands::calibrate(&a, out),
        Command::Export(a) => commands::export(&a, out),
    }
}
