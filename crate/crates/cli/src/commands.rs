//! The subcommands, callable without going through argument parsing.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use nvmask::bca::{build_range_table, BcaParams, RangeTable};
use nvmask::implant::{
    nv_count_distribution, run_implant, ImplantConfig, SpotReport, Transport, Window, DEFAULT_CONVERSION_YIELD,
};
use nvmask::mask::{effective_dose, open_area_ratio, EblLayer, HolePattern, MaskStack, NaaLattice};
use nvmask::spin::{
    count_odmr_dips, couplings, default_t2_distribution, fit_g2, fit_hahn_echo, strong_pair_yield, CouplingReport,
    EchoTrace, G2Trace, OdmrSpectrum,
};
use nvmask::stats::{measured_open_ratio, svg};
use nvmask::sweep::{grid, run_sweep, SweepParams};
use nvmask::Error as CoreError;

use crate::config::{Config, Unit};
use crate::output::{json_bytes, write_atomic, SCHEMA_VERSION};

pub const DEFAULT_APERTURE_NM: f64 = 5.87;
pub const DEFAULT_WALL_NM: f64 = 4.8;
pub const DEFAULT_HOLES_PER_SIDE: usize = 100;

/// Flags that override `[ratio]` and `[mask]` values.
#[derive(Debug, Clone, Default)]
pub struct RatioArgs {
    pub aperture_diameter: Option<f64>,
    pub wall_width: Option<f64>,
    pub dose: Option<f64>,
    pub pl_masked: Option<f64>,
    pub pl_bare: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioRow {
    pub aperture_nm: f64,
    pub wall_nm: f64,
    pub pitch_nm: f64,
    pub rho: f64,
    pub rho_measured: Option<f64>,
    pub dose: Option<f64>,
    pub effective_dose: Option<f64>,
}

impl RatioRow {
    pub fn table(&self) -> String {
        let opt = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |x| format!("{x:.prec$}"));
        let sci = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4e}"));
        format!(
            "{:<12}{:<10}{:<10}{:<10}{:<14}{:<12}{}\n{:<12}{:<10}{:<10}{:<10.4}{:<14}{:<12}{}\n",
            "aperture_nm",
            "wall_nm",
            "pitch_nm",
            "rho",
            "rho_measured",
            "dose",
            "effective_dose",
            self.aperture_nm,
            self.wall_nm,
            self.pitch_nm,
            self.rho,
            opt(self.rho_measured, 4),
            sci(self.dose),
            sci(self.effective_dose),
        )
    }
}

/// Open-area ratio, and when a dose is given the effective dose it implies.
/// A measured ratio (from the two PL values) takes precedence over the
/// calculated one for the effective dose.
pub fn cmd_ratio(cfg: Option<&Config>, args: &RatioArgs) -> Result<RatioRow> {
    let from_cfg = |section: &str, key: &str, unit: Unit| -> Result<Option<f64>> {
        Ok(match cfg {
            Some(c) => c.f64(section, key, unit)?,
            None => None,
        })
    };
    let d = match args.aperture_diameter {
        Some(v) => v,
        None => from_cfg("mask", "aperture_diameter", Unit::Length)?.unwrap_or(DEFAULT_APERTURE_NM),
    };
    let w = match args.wall_width {
        Some(v) => v,
        None => from_cfg("mask", "wall_width", Unit::Length)?.unwrap_or(DEFAULT_WALL_NM),
    };
    let dose = args.dose.or(from_cfg("ratio", "dose", Unit::Plain)?);
    let pl_masked = args.pl_masked.or(from_cfg("ratio", "pl_masked", Unit::Plain)?);
    let pl_bare = args.pl_bare.or(from_cfg("ratio", "pl_bare", Unit::Plain)?);
    let rho = open_area_ratio(d, d + w)?;
    let rho_measured = match (pl_masked, pl_bare) {
        (Some(m), Some(b)) => Some(measured_open_ratio(m, b)?),
        (None, None) => None,
        _ => bail!("pl_masked and pl_bare must be given together"),
    };
    let effective = dose.map(|q| effective_dose(q, rho_measured.unwrap_or(rho))).transpose()?;
    Ok(RatioRow {
        aperture_nm: d,
        wall_nm: w,
        pitch_nm: d + w,
        rho,
        rho_measured,
        dose,
        effective_dose: effective,
    })
}

fn load_range_table(path: &Path) -> Result<RangeTable> {
    let f = std::fs::File::open(path).with_context(|| format!("opening range table {}", path.display()))?;
    RangeTable::read_csv(f).with_context(|| format!("reading range table {}", path.display()))
}

fn build_mask(cfg: &Config) -> Result<MaskStack> {
    let mut mask = MaskStack::new();
    if cfg.bool("mask", "naa")?.unwrap_or(true) {
        let d = cfg.f64("mask", "aperture_diameter", Unit::Length)?.unwrap_or(DEFAULT_APERTURE_NM);
        let w = cfg.f64("mask", "wall_width", Unit::Length)?.unwrap_or(DEFAULT_WALL_NM);
        mask = mask.with_naa(NaaLattice::new(d, w)?);
    }
    let hole = cfg
        .f64("mask", "hole_diameter", Unit::Length)?
        .unwrap_or(EblLayer::DEFAULT_HOLE_DIAMETER);
    let pitch = cfg.f64("mask", "hole_pitch", Unit::Length)?.unwrap_or(EblLayer::DEFAULT_PITCH);
    let nx = cfg.usize("mask", "holes_x")?.unwrap_or(DEFAULT_HOLES_PER_SIDE);
    let ny = cfg.usize("mask", "holes_y")?.unwrap_or(nx);
    if nx == 0 || ny == 0 {
        bail!("holes_x and holes_y must be positive");
    }
    mask = mask.with_ebl(EblLayer::new(hole, HolePattern::Grid { origin: [0.0, 0.0], pitch, nx, ny })?);
    let loss = cfg.f64("mask", "dead_layer_loss", Unit::Energy)?.unwrap_or(0.0);
    Ok(mask.with_dead_layer_loss(loss)?)
}

/// Implant configuration assembled from `[mask]` and `[implant]`.
pub fn implant_config(cfg: &Config, seed: u64) -> Result<ImplantConfig> {
    let mask = build_mask(cfg)?;
    let ebl = mask.ebl().expect("build_mask always adds an EBL layer");
    let HolePattern::Grid { pitch, nx, ny, .. } = *ebl.pattern() else { unreachable!() };
    let window = Window::new([-0.5 * pitch, -0.5 * pitch], nx as f64 * pitch, ny as f64 * pitch)?;
    let energy = cfg.require_f64("implant", "energy", Unit::Energy)?;
    let dose = cfg.require_f64("implant", "dose", Unit::Plain)?;
    let transport = match cfg.str("implant", "transport").unwrap_or("gaussian") {
        "gaussian" => {
            let path = cfg.path("implant", "range_table").ok_or_else(|| {
                anyhow!("missing range table: gaussian transport needs `range_table` in [implant] (see `nvmask bca`)")
            })?;
            Transport::Gaussian(load_range_table(&path)?)
        }
        "bca" => Transport::Bca(BcaParams::new(seed)),
        other => bail!(
            "line {}: key `transport`: `{other}` is not one of gaussian, bca",
            cfg.line("implant", "transport").unwrap_or(0)
        ),
    };
    let mut ic = ImplantConfig::new(energy, dose, window, mask, transport, seed);
    ic.conversion_yield = cfg
        .f64("implant", "conversion_yield", Unit::Plain)?
        .unwrap_or(DEFAULT_CONVERSION_YIELD);
    ic.allow_high_yield = cfg.bool("implant", "allow_high_yield")?.unwrap_or(false);
    ic.validate()?;
    Ok(ic)
}

#[derive(Debug, Serialize)]
struct SpotJson<'a> {
    hole_ix: usize,
    hole_center_nm: [f64; 2],
    ion_count: usize,
    nv_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    couplings: Option<&'a [CouplingReport]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImplantSummary {
    pub n_holes: usize,
    pub n_ions: usize,
    pub n_nv: usize,
    pub occupancy: Vec<f64>,
    pub strong_pair_yield: Option<f64>,
}

/// Writes `defects.csv` and `spots.json` into `out`.
pub fn cmd_implant(cfg: &Config, seed: u64, out: &Path) -> Result<ImplantSummary> {
    let ic = implant_config(cfg, seed)?;
    let reports = run_implant(&ic)?;
    let with_couplings = cfg.bool("analysis", "couplings")?.unwrap_or(true);
    let t2 = cfg.f64("analysis", "t2", Unit::Time)?;

    write_atomic(&out.join("defects.csv"), &defects_csv(&reports)?)?;

    let pairs: Vec<Vec<CouplingReport>> = if with_couplings {
        reports.iter().map(|r| couplings(&r.nv_sites, t2)).collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };
    let spots: Vec<SpotJson> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| SpotJson {
            hole_ix: r.hole_ix,
            hole_center_nm: r.hole_center,
            ion_count: r.ion_count,
            nv_count: r.nv_count,
            couplings: pairs.get(i).map(|v| v.as_slice()),
        })
        .collect();
    let occupancy = nv_count_distribution(&reports)?;
    let pair_yield = match strong_pair_yield(&reports, &default_t2_distribution(), seed) {
        Ok(y) => Some(y),
        Err(CoreError::NoPairs) => None,
        Err(e) => return Err(e.into()),
    };
    let n_ions = reports.iter().map(|r| r.ion_count).sum();
    let n_nv = reports.iter().map(|r| r.nv_count).sum();
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "implant",
        "seed": seed,
        "energy_keV": ic.energy_kev,
        "dose": ic.dose,
        "conversion_yield": ic.conversion_yield,
        "n_holes": reports.len(),
        "expected_ions_per_hole": ic.expected_ions_per_hole(),
        "n_ions": n_ions,
        "n_nv": n_nv,
        "occupancy": occupancy,
        "strong_pair_yield": pair_yield,
        "spots": spots,
    });
    write_atomic(&out.join("spots.json"), &json_bytes(&doc)?)?;
    Ok(ImplantSummary {
        n_holes: reports.len(),
        n_ions,
        n_nv,
        occupancy,
        strong_pair_yield: pair_yield,
    })
}

fn defects_csv(reports: &[SpotReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["hole_ix", "x_nm", "y_nm", "z_nm", "kind", "axis"])?;
    for r in reports {
        for s in r.nv_sites.iter().chain(&r.nitrogen_sites) {
            let [x, y, z] = s.position;
            let (kind, axis) = match s.axis() {
                Some(a) => ("nv", a.label()),
                None => ("nitrogen", ""),
            };
            w.write_record([r.hole_ix.to_string(), x.to_string(), y.to_string(), z.to_string(), kind.into(), axis.into()])?;
        }
    }
    Ok(w.into_inner().map_err(|e| anyhow!("{e}"))?)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub cell_id: usize,
    pub energy_kev: f64,
    pub hole_nm: f64,
    pub naa: bool,
    pub fwhm_nm: f64,
    pub n_ions: usize,
    pub n_nv: usize,
}

/// Writes `sweep.csv`, `sweep.json` and per-cell histogram, density and
/// (optionally) SVG files under `out/cells`.
pub fn cmd_sweep(cfg: &Config, seed: u64, out: &Path) -> Result<Vec<SweepRow>> {
    let energies = cfg
        .list("sweep", "energies", Unit::Energy)?
        .ok_or_else(|| anyhow!("missing key `energies` in [sweep]"))?;
    let holes = cfg
        .list("sweep", "hole_diameters", Unit::Length)?
        .ok_or_else(|| anyhow!("missing key `hole_diameters` in [sweep]"))?;
    let naa = cfg.bool_list("sweep", "naa")?.unwrap_or_else(|| vec![false, true]);
    let path = cfg
        .path("sweep", "range_table")
        .or_else(|| cfg.path("implant", "range_table"))
        .ok_or_else(|| anyhow!("missing range table: set `range_table` in [sweep] (see `nvmask bca`)"))?;
    let table = load_range_table(&path)?;
    let mut params = SweepParams::new(seed);
    if let Some(n) = cfg.usize("sweep", "n_ions")? {
        params.n_ions = n;
    }
    if let Some(b) = cfg.f64("sweep", "bin_width", Unit::Length)? {
        params.bin_width = b;
    }
    if let Some(k) = cfg.usize("sweep", "kde_nodes")? {
        params.kde_nodes = k;
    }
    let d = cfg.f64("mask", "aperture_diameter", Unit::Length)?.unwrap_or(DEFAULT_APERTURE_NM);
    let w = cfg.f64("mask", "wall_width", Unit::Length)?.unwrap_or(DEFAULT_WALL_NM);
    params.lattice = NaaLattice::new(d, w)?;
    if let Some(eta) = cfg.f64("implant", "conversion_yield", Unit::Plain)? {
        params.conversion_yield = eta;
    }
    let svg_out = cfg.bool("sweep", "svg")?.unwrap_or(false);

    let cells = grid(&energies, &holes, &naa);
    let results = run_sweep(&cells, &table, &params)?;

    let cell_dir = out.join("cells");
    let mut rows = Vec::with_capacity(results.len());
    for r in &results {
        let stem = format!("cell_{:03}", r.cell_id);
        let mut hist = Vec::new();
        r.distances.histogram.write_csv(&mut hist)?;
        write_atomic(&cell_dir.join(format!("{stem}_nn_hist.csv")), &hist)?;
        if let Some(density) = &r.density {
            let mut buf = Vec::new();
            density.write_csv(&mut buf)?;
            write_atomic(&cell_dir.join(format!("{stem}_density.csv")), &buf)?;
            if svg_out {
                write_atomic(&cell_dir.join(format!("{stem}_density.svg")), svg::heatmap(density).as_bytes())?;
            }
        }
        if svg_out {
            let lateral: Vec<[f64; 2]> = r.positions.iter().map(|p| [p[0], p[1]]).collect();
            let plot = svg::scatter(&lateral, [0.0, 0.0], 2.0 * r.cell.hole_diameter);
            write_atomic(&cell_dir.join(format!("{stem}_positions.svg")), plot.as_bytes())?;
        }
        rows.push(SweepRow {
            cell_id: r.cell_id,
            energy_kev: r.cell.energy_kev,
            hole_nm: r.cell.hole_diameter,
            naa: r.cell.naa,
            fwhm_nm: r.fwhm,
            n_ions: r.n_ions,
            n_nv: r.n_nv,
        });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["cell_id", "energy_keV", "hole_nm", "naa", "fwhm_nm", "n_ions", "n_nv"])?;
    for r in &rows {
        w.write_record([
            r.cell_id.to_string(),
            r.energy_kev.to_string(),
            r.hole_nm.to_string(),
            r.naa.to_string(),
            r.fwhm_nm.to_string(),
            r.n_ions.to_string(),
            r.n_nv.to_string(),
        ])?;
    }
    write_atomic(&out.join("sweep.csv"), &w.into_inner().map_err(|e| anyhow!("{e}"))?)?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "sweep",
        "seed": seed,
        "params": params,
        "cells": rows,
    });
    write_atomic(&out.join("sweep.json"), &json_bytes(&doc)?)?;
    Ok(rows)
}

/// Builds a range table by BCA and writes it to `out`.
pub fn cmd_bca(energies: &[f64], n_ions: usize, seed: u64, out: &Path) -> Result<RangeTable> {
    let table = build_range_table(energies, n_ions, &BcaParams::new(seed))?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    write_atomic(out, &buf)?;
    Ok(table)
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))
}

pub fn cmd_fit_g2(file: &Path, seed: u64) -> Result<serde_json::Value> {
    let trace = G2Trace::read_csv(open(file)?).with_context(|| format!("reading {}", file.display()))?;
    let fit = fit_g2(&trace, seed)?;
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "command": "fit-g2",
        "seed": seed,
        "g2_0": fit.g2_0,
        "tau1_ns": fit.tau1,
        "tau2_ns": fit.tau2,
        "a": fit.a,
        "residual": fit.residual,
        "emitters": fit.emitters(),
    }))
}

pub fn cmd_fit_echo(file: &Path) -> Result<serde_json::Value> {
    let trace = EchoTrace::read_csv(open(file)?).with_context(|| format!("reading {}", file.display()))?;
    let fit = fit_hahn_echo(&trace)?;
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "command": "fit-echo",
        "t2_us": fit.t2,
        "p": fit.p,
        "amplitude": fit.amplitude,
        "offset": fit.offset,
        "residual": fit.residual,
    }))
}

pub fn cmd_count_odmr(file: &Path, prominence: f64, min_separation: f64) -> Result<serde_json::Value> {
    let spectrum = OdmrSpectrum::read_csv(open(file)?).with_context(|| format!("reading {}", file.display()))?;
    let d = count_odmr_dips(&spectrum, prominence, min_separation)?;
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "command": "count-odmr",
        "prominence": prominence,
        "min_separation_mhz": min_separation,
        "dip_count": d.dip_count,
        "nv_estimate": d.nv_estimate,
        "dips_mhz": d.dips,
    }))
}

/// Seed from the flag, else from the config; never defaulted.
pub fn resolve_seed(flag: Option<u64>, cfg: Option<&Config>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match cfg.map(|c| c.u64("", "seed")).transpose()?.flatten() {
        Some(s) => Ok(s),
        None => bail!("no seed: pass --seed or set `seed` in the config"),
    }
}

/// Output directory configured at top level, resolved against the config file.
pub fn configured_output_dir(cfg: &Config) -> Option<PathBuf> {
    cfg.path("", "output_dir")
}
