//! Placement statistics over a grid of beam energies, hole diameters and
//! NAA presence.
//!
//! A cell is built from independent holes. Each hole sees the aperture
//! lattice at a fresh random offset and receives one ion per aperture whose
//! centre lies inside it, entering uniformly over that aperture's open
//! area. Without the NAA layer the same number of ions enters uniformly over
//! the whole hole. Nearest-neighbour distances are taken within each hole
//! and pooled over the cell.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bca::RangeTable;
use crate::error::{invalid, Error, Result};
use crate::implant::{convert_to_nv, implant, Transport, DEFAULT_CONVERSION_YIELD};
use crate::mask::{Containment, EblLayer, MaskStack, NaaLattice, Point2};
use crate::rng::{derive_key, domain, substream};
use crate::stats::{kde2d, nearest_neighbor_distances, Bandwidth, DensityGrid, DistanceDistribution, GridSpec};

const MAX_DRAWS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub energy_kev: f64,
    pub hole_diameter: f64,
    pub naa: bool,
}

/// Cartesian product in energy-major, then hole, then NAA (off before on) order.
pub fn grid(energies: &[f64], holes: &[f64], naa: &[bool]) -> Vec<SweepCell> {
    let mut cells = Vec::new();
    for &energy_kev in energies {
        for &hole_diameter in holes {
            for &naa in naa {
                cells.push(SweepCell {
                    energy_kev,
                    hole_diameter,
                    naa,
                });
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    /// Ions per cell.
    pub n_ions: usize,
    /// Histogram bin for nearest-neighbour distances, nm.
    pub bin_width: f64,
    pub lattice: NaaLattice,
    pub conversion_yield: f64,
    /// Nodes per side of the lateral density grid; 0 skips it.
    pub kde_nodes: usize,
    pub kde_bandwidth: Bandwidth,
    pub rng_seed: u64,
}

impl SweepParams {
    pub fn new(rng_seed: u64) -> Self {
        Self {
            n_ions: 10_000,
            bin_width: 0.5,
            lattice: NaaLattice::new(5.87, 4.8).expect("valid default lattice"),
            conversion_yield: DEFAULT_CONVERSION_YIELD,
            kde_nodes: 81,
            kde_bandwidth: Bandwidth::Scott,
            rng_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_ions < 2 {
            return Err(invalid("n_ions", "need at least two ions"));
        }
        if !(0.0..=1.0).contains(&self.conversion_yield) {
            return Err(invalid("conversion_yield", "must lie in [0, 1]"));
        }
        if !(self.bin_width > 0.0) {
            return Err(invalid("bin_width", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell_id: usize,
    pub cell: SweepCell,
    pub fwhm: f64,
    pub n_ions: usize,
    pub n_nv: usize,
    pub distances: DistanceDistribution,
    /// Stopped positions relative to the hole centre.
    pub positions: Vec<[f64; 3]>,
    pub density: Option<DensityGrid>,
}

/// Run one cell.
pub fn run_cell(cell_id: usize, cell: &SweepCell, table: &RangeTable, params: &SweepParams) -> Result<CellResult> {
    params.validate()?;
    if !(cell.hole_diameter > 0.0) {
        return Err(invalid("hole_diameter", "must be positive"));
    }
    // reject out-of-table energies before any sampling
    table.lookup(cell.energy_kev)?;
    let transport = Transport::Gaussian(table.clone());
    let key = derive_key(
        cell.energy_kev.to_bits() ^ cell.hole_diameter.to_bits().rotate_left(21) ^ cell.naa as u64,
        domain::SWEEP_TRIAL,
    );
    // holes needed for about n_ions ions at the mean aperture count per hole
    let per_hole = PI * 0.25 * cell.hole_diameter.powi(2) / params.lattice.site_area();
    let n_trials = (params.n_ions as f64 / per_hole).ceil().max(1.0) as u64;
    let trials = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(params.rng_seed, key, t);
            let entries = hole_entries(cell, &params.lattice, &mut rng)?;
            let ions = implant(&entries, cell.energy_kev, &transport, &mut rng)?;
            let nn = if ions.len() >= 2 { nearest_neighbor_distances(&ions)? } else { Vec::new() };
            let nv = convert_to_nv(&ions, params.conversion_yield, &mut rng)
                .iter()
                .filter(|s| s.is_nv())
                .count();
            Ok((ions, nn, nv))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut positions = Vec::with_capacity(params.n_ions);
    let mut samples = Vec::with_capacity(params.n_ions);
    let mut n_nv = 0;
    for (ions, nn, nv) in trials {
        positions.extend(ions);
        samples.extend(nn);
        n_nv += nv;
    }
    let distances = DistanceDistribution::new(samples, params.bin_width)?;
    let density = if params.kde_nodes >= 2 {
        let lateral: Vec<Point2> = positions.iter().map(|p| [p[0], p[1]]).collect();
        let extent = 2.0 * cell.hole_diameter;
        let grid = GridSpec::centered([0.0, 0.0], extent, params.kde_nodes)?;
        Some(kde2d(&lateral, &grid, params.kde_bandwidth)?)
    } else {
        None
    };
    Ok(CellResult {
        cell_id,
        cell: *cell,
        fwhm: distances.fwhm,
        n_ions: positions.len(),
        n_nv,
        distances,
        positions,
        density,
    })
}

/// Run every cell; the first failure aborts with the cell's coordinates.
pub fn run_sweep(cells: &[SweepCell], table: &RangeTable, params: &SweepParams) -> Result<Vec<CellResult>> {
    if cells.is_empty() {
        return Err(invalid("cells", "sweep has no cells"));
    }
    cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            run_cell(i, c, table, params).map_err(|e| Error::InvalidParameter {
                name: "sweep",
                reason: format!(
                    "cell {i} (energy {} keV, hole {} nm, naa {}): {e}",
                    c.energy_kev, c.hole_diameter, c.naa
                ),
            })
        })
        .collect()
}

/// Entry points for one hole centred on the origin.
fn hole_entries<R: Rng + ?Sized>(cell: &SweepCell, lattice: &NaaLattice, rng: &mut R) -> Result<Vec<Point2>> {
    // a uniformly random point of the unit cell
    let l = lattice.pitch();
    let (u, v): (f64, f64) = (rng.random(), rng.random());
    let lattice = lattice.clone().offset([l * (u + 0.5 * v), l * 0.5 * 3f64.sqrt() * v]);
    let hole = cell.hole_diameter;
    let apertures = lattice.apertures_in_hole([0.0, 0.0], hole, Containment::CenterInside);
    let ebl = MaskStack::new().with_ebl(EblLayer::single(hole, [0.0, 0.0])?);
    if cell.naa {
        let masked = ebl.with_naa(lattice.clone());
        let r = 0.5 * lattice.aperture_diameter();
        apertures
            .iter()
            .map(|c| draw_in_disc(&masked, *c, r, rng))
            .collect()
    } else {
        (0..apertures.len())
            .map(|_| draw_in_disc(&ebl, [0.0, 0.0], 0.5 * hole, rng))
            .collect()
    }
}

/// A transmitted point drawn uniformly from the disc of radius `r` at `c`.
fn draw_in_disc<R: Rng + ?Sized>(mask: &MaskStack, c: Point2, r: f64, rng: &mut R) -> Result<Point2> {
    for _ in 0..MAX_DRAWS {
        let rho = r * rng.random::<f64>().sqrt();
        let phi = 2.0 * PI * rng.random::<f64>();
        let p = [c[0] + rho * phi.cos(), c[1] + rho * phi.sin()];
        if mask.transmits(p) {
            return Ok(p);
        }
    }
    Err(invalid("hole_diameter", "an aperture inside the hole transmits nothing"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bca::RangeRow;

    fn table() -> RangeTable {
        RangeTable::new(vec![
            RangeRow { energy_kev: 2.5, rp: 4.8, drp: 2.2, drlat: 1.9 },
            RangeRow { energy_kev: 10.0, rp: 16.6, drp: 6.5, drlat: 5.6 },
        ])
        .unwrap()
    }

    fn small(seed: u64) -> SweepParams {
        let mut p = SweepParams::new(seed);
        p.n_ions = 600;
        p.kde_nodes = 21;
        p
    }

    #[test]
    fn grid_order() {
        let g = grid(&[2.5, 10.0], &[18.0, 27.0, 41.0], &[false, true]);
        assert_eq!(g.len(), 12);
        assert_eq!(g[1], SweepCell { energy_kev: 2.5, hole_diameter: 18.0, naa: true });
        assert_eq!(g[11].energy_kev, 10.0);
    }

    #[test]
    fn cell_counts_and_geometry() {
        let r = run_cell(0, &SweepCell { energy_kev: 2.5, hole_diameter: 18.0, naa: true }, &table(), &small(1)).unwrap();
        assert!((r.n_ions as f64 - 600.0).abs() < 120.0, "{}", r.n_ions);
        assert!(r.distances.samples.len() <= r.n_ions);
        assert_eq!(r.distances.histogram.total() as usize, r.distances.samples.len());
        assert!(r.positions.iter().all(|p| p[2] > 0.0));
        assert!(r.fwhm > 0.0);
        let d = r.density.unwrap();
        assert!((d.integral() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_table_energy_names_the_bound() {
        let cells = [SweepCell { energy_kev: 1.0, hole_diameter: 18.0, naa: false }];
        let err = run_sweep(&cells, &table(), &small(0)).unwrap_err().to_string();
        assert!(err.contains("cell 0") && err.contains("2.5"), "{err}");
    }

    #[test]
    fn deterministic() {
        let cells = grid(&[2.5], &[18.0], &[false, true]);
        let a = run_sweep(&cells, &table(), &small(3)).unwrap();
        let b = run_sweep(&cells, &table(), &small(3)).unwrap();
        assert_eq!(a, b);
    }
}
