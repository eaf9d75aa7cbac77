use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

mod config;
mod design_cmd;
mod fits;
mod report;
mod synth_cmd;

use config::{load, DesignConfig, ExtractConfig, SynthConfig, TablesConfig};
use fits::DecayKind;
use report::{Format, Run};

/// Design and analysis toolkit for van der Waals merged-element transmons.
#[derive(Debug, Parser)]
#[command(name = "metkit", version)]
struct Cli {
    /// TOML run configuration (unit-suffixed keys).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "METKIT_OUT", default_value = "metkit-out")]
    out: PathBuf,
    /// Seed for synthetic data.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Pass/fail tolerance for check-tables loss tangents, in units of 1e-5.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Format of the result file.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the physical constants used everywhere (CODATA 2018).
    Constants,
    /// Qubit parameters from junction geometry, plus the layer sensitivity chart.
    Design,
    /// Recompute the built-in device tables and report agreement.
    CheckTables,
    /// Circle-fit notch-type S21 traces.
    FitS21 {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Loss tangent of a termination from open/terminated resonator pairs listed in --config.
    ExtractTand,
    /// Fit T1, Ramsey or echo traces; a directory is treated as a repetition set.
    FitDecay {
        #[arg(value_enum)]
        kind: DecayKind,
        path: PathBuf,
    },
    /// Fit a Rabi chevron.
    FitChevron { file: PathBuf },
    /// Fit the spin-boson temperature dependence of T1.
    FitTempdep {
        file: PathBuf,
        #[arg(long)]
        f01_ghz: f64,
    },
    /// Generate synthetic data from the sections of --config.
    Synth,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::Design => "design",
            Command::CheckTables => "check-tables",
            Command::FitS21 { .. } => "fit-s21",
            Command::ExtractTand => "extract-tand",
            Command::FitDecay { .. } => "fit-decay",
            Command::FitChevron { .. } => "fit-chevron",
            Command::FitTempdep { .. } => "fit-tempdep",
            Command::Synth => "synth",
        }
    }
}

fn required_config(cli: &Cli) -> Result<&Path> {
    match &cli.config {
        Some(p) => Ok(p),
        None => bail!("`{}` needs --config", cli.command.name()),
    }
}

fn check_inputs(files: &[&Path]) -> Result<()> {
    for f in files {
        if !f.exists() {
            bail!("{} does not exist", f.display());
        }
    }
    Ok(())
}

/// Number of failed fits.
fn execute(cli: &Cli) -> Result<usize> {
    if let Command::Constants = cli.command {
        print!("{}", design_cmd::constants(cli.format));
        return Ok(0);
    }
    let config_text = match &cli.config {
        Some(p) => Some(std::fs::read(p).map_err(|e| anyhow::anyhow!("reading config {}: {e}", p.display()))?),
        None => None,
    };
    let provenance = config_text.unwrap_or_else(|| format!("{:?}", cli.command).into_bytes());
    let mut run = Run::new(cli.out.clone(), cli.format, cli.seed, cli.tolerance, cli.command.name(), &provenance);

    match &cli.command {
        Command::Constants => unreachable!(),
        Command::Design => {
            let cfg = match &cli.config {
                Some(p) => load::<DesignConfig>(p)?.value,
                None => DesignConfig::default(),
            };
            design_cmd::design(&mut run, &cfg)?;
        }
        Command::CheckTables => {
            let cfg = match &cli.config {
                Some(p) => Some(load::<TablesConfig>(p)?.value),
                None => None,
            };
            design_cmd::check_tables(&mut run, cfg.as_ref())?;
        }
        Command::FitS21 { files } => {
            check_inputs(&files.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
            fits::fit_s21(&mut run, files)?;
        }
        Command::ExtractTand => {
            let loaded = load::<ExtractConfig>(required_config(cli)?)?;
            let cfg = loaded.value.resolved(&loaded.dir)?;
            fits::extract_tand(&mut run, &cfg)?;
        }
        Command::FitDecay { kind, path } => {
            check_inputs(&[path])?;
            fits::fit_decay(&mut run, *kind, path)?;
        }
        Command::FitChevron { file } => {
            check_inputs(&[file])?;
            fits::fit_chevron_cmd(&mut run, file)?;
        }
        Command::FitTempdep { file, f01_ghz } => {
            check_inputs(&[file])?;
            fits::fit_tempdep(&mut run, file, *f01_ghz)?;
        }
        Command::Synth => {
            let cfg = load::<SynthConfig>(required_config(cli)?)?.value;
            synth_cmd::synth(&mut run, &cfg)?;
        }
    }
    run.finish()?;
    Ok(run.failures())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} fit(s) failed or did not converge");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
