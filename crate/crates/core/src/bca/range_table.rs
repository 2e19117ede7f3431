use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::transport::transport_ion;
use super::BcaParams;
use crate::error::{invalid, Error, Result};
use crate::rng::{domain, substream};

/// Minimum ion count for stable range moments.
pub const MIN_RANGE_IONS: usize = 1000;

/// One energy row: projected range and its straggles, all in nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeRow {
    #[serde(rename = "energy_keV")]
    pub energy_kev: f64,
    #[serde(rename = "rp_nm")]
    pub rp: f64,
    #[serde(rename = "drp_nm")]
    pub drp: f64,
    #[serde(rename = "drlat_nm")]
    pub drlat: f64,
}

/// Energy-indexed projected range, longitudinal straggle and per-axis
/// lateral straggle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeTable {
    rows: Vec<RangeRow>,
}

impl RangeTable {
    pub fn new(rows: Vec<RangeRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidRangeTable("no rows".into()));
        }
        for r in &rows {
            if !(r.energy_kev > 0.0 && r.rp > 0.0 && r.drp >= 0.0 && r.drlat >= 0.0) {
                return Err(Error::InvalidRangeTable(format!(
                    "row at {} keV has a non-positive energy or range, or a negative straggle",
                    r.energy_kev
                )));
            }
        }
        for w in rows.windows(2) {
            if !(w[1].energy_kev > w[0].energy_kev) {
                return Err(Error::InvalidRangeTable(format!(
                    "energies must be strictly increasing ({} then {})",
                    w[0].energy_kev, w[1].energy_kev
                )));
            }
            if w[1].rp < w[0].rp {
                return Err(Error::InvalidRangeTable(format!(
                    "projected range decreases between {} and {} keV",
                    w[0].energy_kev, w[1].energy_kev
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[RangeRow] {
        &self.rows
    }

    pub fn min_energy(&self) -> f64 {
        self.rows[0].energy_kev
    }

    pub fn max_energy(&self) -> f64 {
        self.rows[self.rows.len() - 1].energy_kev
    }

    /// Moments at `energy_kev`, log-log interpolated between rows. No
    /// extrapolation beyond either end of the table.
    pub fn lookup(&self, energy_kev: f64) -> Result<RangeRow> {
        let (lo, hi) = (self.min_energy(), self.max_energy());
        if !(energy_kev >= lo && energy_kev <= hi) {
            return Err(Error::EnergyOutOfTable {
                energy: energy_kev,
                min: lo,
                max: hi,
            });
        }
        if let Some(r) = self.rows.iter().find(|r| r.energy_kev == energy_kev) {
            return Ok(*r);
        }
        let k = self.rows.partition_point(|r| r.energy_kev < energy_kev);
        let (a, b) = (self.rows[k - 1], self.rows[k]);
        let t = (energy_kev.ln() - a.energy_kev.ln()) / (b.energy_kev.ln() - a.energy_kev.ln());
        let interp = |ya: f64, yb: f64| {
            if ya > 0.0 && yb > 0.0 {
                (ya.ln() + t * (yb.ln() - ya.ln())).exp()
            } else {
                // a zero endpoint has no logarithm
                ya + t * (yb - ya)
            }
        };
        Ok(RangeRow {
            energy_kev,
            rp: interp(a.rp, b.rp),
            drp: interp(a.drp, b.drp),
            drlat: interp(a.drlat, b.drlat),
        })
    }

    /// Parse `energy_keV,rp_nm,drp_nm,drlat_nm` CSV.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["energy_keV", "rp_nm", "drp_nm", "drlat_nm"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Format {
                kind: "range table",
                reason: format!("header must be `{}`", expected.join(",")),
            });
        }
        let rows = rdr
            .deserialize()
            .enumerate()
            .map(|(i, r)| {
                r.map_err(|e| Error::Format {
                    kind: "range table",
                    reason: format!("row {}: {e}", i + 2),
                })
            })
            .collect::<Result<Vec<RangeRow>>>()?;
        Self::new(rows)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Moments of the stopping distribution of `n_ions` point-entry ions at
/// each energy. Backscattered ions are excluded. The lateral straggle is
/// the per-axis standard deviation, pooled over x and y.
pub fn build_range_table(energies_kev: &[f64], n_ions: usize, params: &BcaParams) -> Result<RangeTable> {
    if n_ions < MIN_RANGE_IONS {
        return Err(invalid("n_ions", format!("need at least {MIN_RANGE_IONS} ions, got {n_ions}")));
    }
    if energies_kev.is_empty() {
        return Err(invalid("energies", "no energies given"));
    }
    let mut energies = energies_kev.to_vec();
    energies.sort_by(f64::total_cmp);
    let mut rows = Vec::with_capacity(energies.len());
    for &e in &energies {
        if !(e * 1e3 >= 2.0 * params.stop_energy) {
            return Err(invalid(
                "energies",
                format!("{e} keV is below twice the stop energy ({} eV)", params.stop_energy),
            ));
        }
        let key = domain::RANGE_TABLE ^ e.to_bits();
        let ions = (0..n_ions as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(params.rng_seed, key, i);
                transport_ion(e, [0.0, 0.0], params, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(moments(e, ions.iter().filter(|s| !s.backscattered).map(|s| s.position))?);
    }
    RangeTable::new(rows)
}

fn moments(energy_kev: f64, positions: impl Iterator<Item = [f64; 3]>) -> Result<RangeRow> {
    let (mut n, mut sz, mut szz, mut sl, mut sll) = (0usize, 0.0, 0.0, 0.0, 0.0);
    for p in positions {
        n += 1;
        sz += p[2];
        szz += p[2] * p[2];
        sl += p[0] + p[1];
        sll += p[0] * p[0] + p[1] * p[1];
    }
    if n < 2 {
        return Err(invalid("n_ions", "fewer than two ions stopped inside the target"));
    }
    let nf = n as f64;
    let rp = sz / nf;
    let var_z = (szz - nf * rp * rp) / (nf - 1.0);
    let mean_l = sl / (2.0 * nf);
    let var_l = (sll - 2.0 * nf * mean_l * mean_l) / (2.0 * nf - 1.0);
    Ok(RangeRow {
        energy_kev,
        rp,
        drp: var_z.max(0.0).sqrt(),
        drlat: var_l.max(0.0).sqrt(),
    })
}
