//! `ptns`: run simulations, check the discretisation, and recompute
//! diagnostics for finished runs.

mod verify;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ptns_core::config::{RunConfig, KEYS};
use ptns_core::diagnostics::{DiagnosticsRecord, CSV_HEADER};
use ptns_core::march::{diagnose_run_dir, simulate_observed, Termination};

#[derive(Parser)]
#[command(name = "ptns", version, about = "2D compressible Navier-Stokes in (u, rho, Z) variables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a `key = value` config file.
    Run {
        config: PathBuf,
        /// Print a progress line every this many steps (0 disables).
        #[arg(long, default_value_t = 0)]
        progress: usize,
    },
    /// Manufactured-solution convergence checks and the elliptic estimate scan.
    Verify {
        /// Random samples per level in the estimate scan.
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Also write the full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Recompute diagnostics from the snapshots of a run directory.
    Diag {
        run_dir: PathBuf,
        /// Output CSV; defaults to `diagnostics_recomputed.csv` in the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the accepted config keys.
    Keys,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, progress } => run(&config, progress),
        Command::Verify { samples, seed, json } => verify::run(samples, seed, json.as_deref()),
        Command::Diag { run_dir, out } => diag(&run_dir, out),
        Command::Keys => {
            for (k, doc) in KEYS {
                println!("{k:<20} {doc}");
            }
            Ok(true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

type CliResult = Result<bool, Box<dyn std::error::Error>>;

fn run(path: &Path, progress: usize) -> CliResult {
    let cfg = RunConfig::from_file(path)?;
    let res = simulate_observed(&cfg, |step, t, _| {
        if progress > 0 && step % progress == 0 {
            eprintln!("step {step:>6}  t = {t:.6}");
        }
    })?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "termination      {}", res.termination.as_str())?;
    writeln!(out, "final t          {}", res.final_t)?;
    writeln!(out, "final step       {}", res.final_step)?;
    writeln!(out, "records          {}", res.records.len())?;
    writeln!(out, "windows          {}", res.reports.len())?;
    let shrinks: usize = res.reports.iter().map(|r| r.shrink_count).sum();
    let iters = res.reports.iter().map(|r| r.iterations).max().unwrap_or(0);
    writeln!(out, "picard           max {iters} iterations, {shrinks} shrinks")?;
    writeln!(out, "monitor max      {:.6e} (K = {})", res.monitor_max, cfg.blowup_k)?;
    writeln!(out, "compatibility    {:.3e}", res.compatibility_residual)?;
    if let Some(last) = res.records.last() {
        writeln!(out, "kinetic          {:.6e}", last.kinetic)?;
        writeln!(out, "mass             {:.12}", last.mass)?;
        writeln!(out, "min r            {:.6e}", last.min_r)?;
    }
    if let Some(dir) = &cfg.output_dir {
        writeln!(out, "output           {}", dir.display())?;
    }
    Ok(res.termination == Termination::Completed)
}

fn diag(dir: &Path, out: Option<PathBuf>) -> CliResult {
    let records = diagnose_run_dir(dir)?;
    let path = out.unwrap_or_else(|| dir.join("diagnostics_recomputed.csv"));
    fs::write(&path, csv_text(&records))?;
    let max_res = records.iter().map(|r| r.energy_residual.abs()).fold(0.0, f64::max);
    let max_q = records.iter().map(|r| r.blowup_q).fold(0.0, f64::max);
    println!("snapshots        {}", records.len());
    println!("max |residual|   {max_res:.6e}");
    println!("max blowup_q     {max_q:.6e}");
    println!("written          {}", path.display());
    Ok(records.iter().all(DiagnosticsRecord::is_finite))
}

fn csv_text(records: &[DiagnosticsRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}
