//! Batch front end: configuration files, scans, reports and presets.

pub mod config;
pub mod presets;
pub mod report;
pub mod scan;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::error::Error;
use config::{load_config, RunConfig};
use presets::RunMode;

#[derive(Error, Debug)]
pub enum CliError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error("at scan value {value}: {source}")]
    Numerical { value: f64, source: Error },
}

impl CliError {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        CliError::Parse { line, msg: msg.into() }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "parse",
            CliError::Validation(_) => "validation",
            CliError::Io { .. } => "io",
            CliError::Csv(_) => "csv",
            CliError::Numerical { .. } => "numerical",
        }
    }

    /// 2 for configuration and I/O problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical { .. } => 3,
            _ => 2,
        }
    }

    /// Single-line, machine-parsable diagnostic.
    pub fn diagnostic(&self) -> String {
        let msg = self.to_string().replace('\n', " ");
        match self {
            CliError::Parse { line, .. } => format!("error: kind=parse line={line} msg={msg}"),
            CliError::Numerical { value, .. } => {
                format!("error: kind=numerical scan_value={value} msg={msg}")
            }
            _ => format!("error: kind={} msg={msg}", self.kind()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "multilambda", version, about = "Adiabatic passage through parallel Lambda systems")]
pub struct Args {
    /// Worker threads for scans (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Suppress progress and summary output.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Propagate once per pulse width and write population time series.
    Simulate { config: PathBuf },
    /// Run the configured scan and write the CSV table.
    Scan { config: PathBuf },
    /// Print the analytic classification report.
    Analyze { config: PathBuf },
    /// Track the instantaneous eigenvalues.
    Spectrum { config: PathBuf },
    /// Run a figure-reproduction preset.
    Preset {
        name: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// List available presets.
    List,
}

/// Output path for width `w` when a run produces `count` files.
fn numbered(path: &Path, w: f64, count: usize) -> PathBuf {
    if count <= 1 {
        return path.to_path_buf();
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_T{w}.{ext}"),
        None => format!("{stem}_T{w}"),
    };
    path.with_file_name(name)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes()).and_then(|_| f.flush()).map_err(|e| CliError::io(path, e))
}

/// Runs a scan and writes CSVs (to `output.csv` or stdout). Returns the
/// files written.
pub fn do_scan(cfg: &RunConfig, quiet: bool) -> Result<Vec<PathBuf>, CliError> {
    let tables = scan::run_scan(cfg)?;
    let mut written = Vec::new();
    for t in &tables {
        match &cfg.output.csv {
            Some(path) => {
                let p = numbered(path, t.width.unwrap_or(0.0), tables.len());
                scan::write_scan_csv(t, create(&p)?)?;
                written.push(p);
            }
            None => scan::write_scan_csv(t, io::stdout().lock())?,
        }
        if !quiet && cfg.output.csv.is_some() {
            let best = t.rows.iter().map(|r| r.pf).fold(f64::NAN, f64::max);
            let worst = t.rows.iter().map(|r| r.pf).fold(f64::NAN, f64::min);
            let label = t.width.map(|w| format!(" T={w}")).unwrap_or_default();
            eprintln!("scan{label}: {} points, P_f in [{worst:.6}, {best:.6}]", t.rows.len());
        }
    }
    if let Some(path) = &cfg.output.report {
        write_text(path, &report::report(cfg))?;
        written.push(path.clone());
    }
    Ok(written)
}

pub fn do_simulate(cfg: &RunConfig, quiet: bool) -> Result<Vec<PathBuf>, CliError> {
    let runs = scan::run_simulation(cfg)?;
    let mut written = Vec::new();
    for (w, r) in &runs {
        if !quiet {
            println!(
                "T={w} P_f={} max_intermediate={} norm_drift={:.3e} steps={}",
                scan::format_float(r.final_pf),
                scan::format_float(r.max_intermediate_population),
                r.norm_drift,
                r.accepted_steps
            );
        }
        if let Some(path) = &cfg.output.csv {
            let p = numbered(path, *w, runs.len());
            scan::write_populations_csv(r, create(&p)?)?;
            written.push(p);
        }
    }
    Ok(written)
}

pub fn do_spectrum(cfg: &RunConfig, quiet: bool) -> Result<Vec<PathBuf>, CliError> {
    let runs = scan::run_spectrum(cfg)?;
    let mut written = Vec::new();
    for (w, snaps) in &runs {
        match &cfg.output.csv {
            Some(path) => {
                let p = numbered(path, *w, runs.len());
                scan::write_spectrum_csv(cfg, *w, snaps, create(&p)?)?;
                written.push(p);
            }
            None => scan::write_spectrum_csv(cfg, *w, snaps, io::stdout().lock())?,
        }
        if !quiet && cfg.output.csv.is_some() {
            eprintln!("spectrum T={w}: {} time points", snaps.len());
        }
    }
    Ok(written)
}

pub fn do_preset(name: &str, out: &Path, quiet: bool) -> Result<Vec<PathBuf>, CliError> {
    let preset = presets::find(name).ok_or_else(|| {
        let names: Vec<&str> = presets::PRESETS.iter().map(|p| p.name).collect();
        CliError::Validation(format!("unknown preset `{name}` (available: {})", names.join(", ")))
    })?;
    let mut cfg = preset.config()?;
    cfg.output.csv = Some(out.join(format!("{name}.csv")));
    cfg.output.report = Some(out.join(format!("{name}_report.txt")));
    let cfg_path = out.join(format!("{name}.cfg"));
    write_text(&cfg_path, &preset.config_text())?;
    let mut written = vec![cfg_path];
    written.extend(match preset.mode {
        RunMode::Scan => do_scan(&cfg, quiet)?,
        RunMode::Simulate => do_simulate(&cfg, quiet)?,
        RunMode::Spectrum => do_spectrum(&cfg, quiet)?,
    });
    if preset.mode != RunMode::Scan {
        let path = cfg.output.report.as_ref().expect("set above");
        write_text(path, &report::report(&cfg))?;
        written.push(path.clone());
    }
    Ok(written)
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = args.threads {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| CliError::Validation(format!("thread pool: {e}")))?
    };
    let quiet = args.quiet;
    pool.install(|| {
        let written = match &args.command {
            Command::Simulate { config } => do_simulate(&load_config(config)?, quiet)?,
            Command::Scan { config } => do_scan(&load_config(config)?, quiet)?,
            Command::Spectrum { config } => do_spectrum(&load_config(config)?, quiet)?,
            Command::Analyze { config } => {
                let cfg = load_config(config)?;
                let text = report::report(&cfg);
                print!("{text}");
                match &cfg.output.report {
                    Some(p) => {
                        write_text(p, &text)?;
                        vec![p.clone()]
                    }
                    None => Vec::new(),
                }
            }
            Command::Preset { name, out } => do_preset(name, out, quiet)?,
            Command::List => {
                for p in presets::PRESETS {
                    println!("{}", p.name);
                }
                Vec::new()
            }
        };
        if !quiet {
            for p in written {
                eprintln!("wrote {}", p.display());
            }
        }
        Ok(())
    })
}
