//! Command-line front end: named scenarios (figure sweeps, the
//! validation suite, the quantizer table) configured by flags and an
//! optional TOML file, with CSV/JSON curve data written per run.

mod scenarios;

use anyhow::{bail, Context, Result};
use clap::Parser;
use qmimo::config::{CombinerMethod, Resolution};
use serde::Deserialize;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Parser)]
#[command(
    name = "qmimo",
    about = "Uplink massive MIMO-OFDM sum-rate experiments with low-resolution ADCs and oversampling",
    after_help = "Scenarios: quantizer-table | fig1 | fig2 | fig3 | validate.\n\
                  Flags override values from --config; unset values fall back to\n\
                  scenario defaults."
)]
struct Cli {
    /// Named experiment to run.
    #[arg(long)]
    scenario: Option<String>,

    /// TOML file mirroring the flags below.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Master seed for all random streams.
    #[arg(long)]
    seed: Option<u64>,

    /// SNR axis in dB, comma separated.
    #[arg(long, value_delimiter = ',')]
    snr_db: Option<Vec<f64>>,

    /// ADC resolution axis: integers or "inf", comma separated.
    #[arg(long, value_delimiter = ',')]
    bits: Option<Vec<String>>,

    /// Oversampling-ratio axis, comma separated integers.
    #[arg(long, value_delimiter = ',')]
    osr: Option<Vec<usize>>,

    /// Base-station antennas M.
    #[arg(long)]
    antennas: Option<usize>,

    /// Single-antenna users U.
    #[arg(long)]
    users: Option<usize>,

    /// Active subcarriers K.
    #[arg(long)]
    subcarriers: Option<usize>,

    /// Channel realizations per axis point.
    #[arg(long)]
    realizations: Option<usize>,

    /// OFDM blocks per realization (empirical evaluations).
    #[arg(long)]
    blocks: Option<usize>,

    /// Linear combiner: mrc or zf.
    #[arg(long)]
    combiner: Option<String>,

    /// Pulse-shaping roll-off in [0, 1].
    #[arg(long)]
    rolloff: Option<f64>,

    /// Output directory for curve files and manifests.
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Curve-file format: csv or json (the manifest is always JSON).
    #[arg(long)]
    format: Option<String>,

    /// Largest resolution in the quantizer table (1..=8).
    #[arg(long)]
    max_bits: Option<u32>,
}

/// TOML mirror of the command-line flags; unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    scenario: Option<String>,
    seed: Option<u64>,
    snr_db: Option<Vec<f64>>,
    bits: Option<Vec<String>>,
    osr: Option<Vec<usize>>,
    antennas: Option<usize>,
    users: Option<usize>,
    subcarriers: Option<usize>,
    realizations: Option<usize>,
    blocks: Option<usize>,
    combiner: Option<String>,
    rolloff: Option<f64>,
    out_dir: Option<PathBuf>,
    format: Option<String>,
    max_bits: Option<u32>,
}

/// Output format of the curve files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => bail!("unknown format {other:?} (expected csv or json)"),
        }
    }
}

/// Fully resolved run options: defaults, then file values, then flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: String,
    pub seed: u64,
    pub snr_db: Option<Vec<f64>>,
    pub bits: Option<Vec<Resolution>>,
    pub osr: Option<Vec<usize>>,
    pub antennas: Option<usize>,
    pub users: Option<usize>,
    pub subcarriers: Option<usize>,
    pub realizations: Option<usize>,
    pub blocks: Option<usize>,
    pub combiner: CombinerMethod,
    pub rolloff: Option<f64>,
    pub out_dir: PathBuf,
    pub format: Format,
    pub max_bits: u32,
}

fn parse_bits(raw: &[String]) -> Result<Vec<Resolution>> {
    raw.iter()
        .map(|s| Resolution::from_str(s).map_err(anyhow::Error::from))
        .collect()
}

fn resolve(cli: Cli) -> Result<RunConfig> {
    let file: FileConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => FileConfig::default(),
    };

    let scenario = cli
        .scenario
        .or(file.scenario)
        .context("--scenario is required (quantizer-table | fig1 | fig2 | fig3 | validate)")?;
    let bits = match cli.bits.or(file.bits) {
        Some(raw) => Some(parse_bits(&raw)?),
        None => None,
    };
    let combiner = match cli.combiner.or(file.combiner) {
        Some(raw) => CombinerMethod::from_str(&raw)?,
        None => CombinerMethod::Mrc,
    };
    let format = match cli.format.or(file.format) {
        Some(raw) => raw.parse()?,
        None => Format::Csv,
    };
    let max_bits = cli.max_bits.or(file.max_bits).unwrap_or(5);
    if !(1..=8).contains(&max_bits) {
        bail!("--max-bits must be in 1..=8, got {max_bits}");
    }
    Ok(RunConfig {
        scenario,
        seed: cli.seed.or(file.seed).unwrap_or(42),
        snr_db: cli.snr_db.or(file.snr_db),
        bits,
        osr: cli.osr.or(file.osr),
        antennas: cli.antennas.or(file.antennas),
        users: cli.users.or(file.users),
        subcarriers: cli.subcarriers.or(file.subcarriers),
        realizations: cli.realizations.or(file.realizations),
        blocks: cli.blocks.or(file.blocks),
        combiner,
        rolloff: cli.rolloff.or(file.rolloff),
        out_dir: cli.out_dir.or(file.out_dir).unwrap_or_else(|| PathBuf::from("out")),
        format,
        max_bits,
    })
}

fn main() {
    let cli = Cli::parse();
    let exit = match resolve(cli).and_then(run) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            2
        }
    };
    std::process::exit(exit);
}

fn run(config: RunConfig) -> Result<i32> {
    match config.scenario.as_str() {
        "quantizer-table" => {
            let table = scenarios::quantizer_table(config.max_bits)?;
            print!("{table}");
            Ok(0)
        }
        "fig1" | "fig2" | "fig3" => {
            scenarios::run_figure(&config)?;
            Ok(0)
        }
        "validate" => scenarios::run_validate(&config),
        other => bail!("unknown scenario {other:?} (quantizer-table | fig1 | fig2 | fig3 | validate)"),
    }
}
