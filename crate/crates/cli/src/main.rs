use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use nvmask_cli::commands::{self, RatioArgs};
use nvmask_cli::config::{parse_quantity, Config, Unit};
use nvmask_cli::output::{diagnostic, json_bytes, resolve_output_dir, write_atomic};

#[derive(Parser)]
#[command(name = "nvmask", version, about = "Ion implantation through nanoscale aperture masks")]
struct Cli {
    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print open-area ratio and effective dose.
    Ratio {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Aperture diameter, nm.
        #[arg(long)]
        da: Option<f64>,
        /// Wall width, nm.
        #[arg(long)]
        wd: Option<f64>,
        /// Nominal dose, ions/cm².
        #[arg(long)]
        dose: Option<f64>,
        #[arg(long)]
        pl_masked: Option<f64>,
        #[arg(long)]
        pl_bare: Option<f64>,
    },
    /// Implant through an EBL hole grid; writes defects.csv and spots.json.
    Implant {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nearest-neighbour statistics over energy × hole × NAA cells.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a range table by binary-collision transport.
    Bca {
        /// Comma-separated energies; keV unless suffixed.
        #[arg(long, value_delimiter = ',', required = true)]
        energies: Vec<String>,
        #[arg(long, default_value_t = 10_000)]
        n_ions: usize,
        #[arg(long)]
        seed: u64,
        /// Output CSV path.
        #[arg(long, default_value = "range_table.csv")]
        out: PathBuf,
    },
    /// Fit a g² trace (`t_ns,g2`) and classify the emitter count.
    FitG2 {
        file: PathBuf,
        /// Seed for the restart draws.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a Hahn-echo trace (`t_us,coherence`).
    FitEcho {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count dips in an ODMR spectrum (`f_mhz,contrast`).
    CountOdmr {
        file: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        prominence: f64,
        /// MHz.
        #[arg(long, default_value_t = 5.0)]
        min_separation: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit_json(value: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let bytes = json_bytes(value)?;
    if let Some(p) = out {
        write_atomic(p, &bytes)?;
    }
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Ratio { config, da, wd, dose, pl_masked, pl_bare } => {
            let cfg = config.as_deref().map(Config::load).transpose()?;
            let row = commands::cmd_ratio(cfg.as_ref(), &RatioArgs { aperture_diameter: da, wall_width: wd, dose, pl_masked, pl_bare })?;
            print!("{}", row.table());
        }
        Command::Implant { config, seed, out } => {
            let cfg = Config::load(&config)?;
            let seed = commands::resolve_seed(seed, Some(&cfg))?;
            let dir = resolve_output_dir(out.as_deref(), commands::configured_output_dir(&cfg));
            let s = commands::cmd_implant(&cfg, seed, &dir)?;
            diagnostic("info", "implant_done", json!({ "holes": s.n_holes, "ions": s.n_ions, "nv": s.n_nv, "occupancy": s.occupancy }));
        }
        Command::Sweep { config, seed, out } => {
            let cfg = Config::load(&config)?;
            let seed = commands::resolve_seed(seed, Some(&cfg))?;
            let dir = resolve_output_dir(out.as_deref(), commands::configured_output_dir(&cfg));
            let rows = commands::cmd_sweep(&cfg, seed, &dir)?;
            diagnostic("info", "sweep_done", json!({ "cells": rows.len() }));
        }
        Command::Bca { energies, n_ions, seed, out } => {
            let e = energies
                .iter()
                .map(|s| parse_quantity(s, Unit::Energy).map_err(|r| anyhow::anyhow!("--energies: {r}")))
                .collect::<Result<Vec<_>>>()?;
            commands::cmd_bca(&e, n_ions, seed, &out)?;
        }
        Command::FitG2 { file, seed, out } => emit_json(&commands::cmd_fit_g2(&file, seed)?, out.as_deref())?,
        Command::FitEcho { file, out } => emit_json(&commands::cmd_fit_echo(&file)?, out.as_deref())?,
        Command::CountOdmr { file, prominence, min_separation, out } => {
            emit_json(&commands::cmd_count_odmr(&file, prominence, min_separation)?, out.as_deref())?
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            diagnostic("error", "failed", json!({ "message": chain.join(": ") }));
            ExitCode::FAILURE
        }
    }
}
