//! Dose to defects: masked entry sampling, stopping, NV conversion and
//! per-hole reports.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bca::{transport_ion, BcaParams, RangeTable};
use crate::constants::NM2_PER_CM2;
use crate::error::{invalid, Result};
use crate::mask::{MaskStack, Point2};
use crate::rng::{domain, substream};

/// Conversion yield that reproduces a 70% empty-hole fraction with the
/// default hole and aperture geometry at 4e13 ions/cm².
pub const DEFAULT_CONVERSION_YIELD: f64 = 0.004;

/// Upper bound on the conversion yield unless explicitly overridden.
pub const MAX_CONVERSION_YIELD: f64 = 0.03;

/// Axis-aligned lateral rectangle, nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub origin: Point2,
    pub size: [f64; 2],
}

impl Window {
    pub fn new(origin: Point2, width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) || !(width.is_finite() && height.is_finite()) {
            return Err(invalid("window", "width and height must be positive"));
        }
        Ok(Self {
            origin,
            size: [width, height],
        })
    }

    /// Square of side `side` centred on `center`.
    pub fn square(center: Point2, side: f64) -> Result<Self> {
        Self::new([center[0] - 0.5 * side, center[1] - 0.5 * side], side, side)
    }

    pub fn area(&self) -> f64 {
        self.size[0] * self.size[1]
    }

    pub fn center(&self) -> Point2 {
        [
            self.origin[0] + 0.5 * self.size[0],
            self.origin[1] + 0.5 * self.size[1],
        ]
    }

    pub fn contains(&self, p: Point2) -> bool {
        p[0] >= self.origin[0]
            && p[0] < self.origin[0] + self.size[0]
            && p[1] >= self.origin[1]
            && p[1] < self.origin[1] + self.size[1]
    }
}

/// How stopped positions are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    /// Independent normal draws from tabulated range moments.
    Gaussian(RangeTable),
    /// Full binary-collision transport for every ion.
    Bca(BcaParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplantConfig {
    /// Beam energy, keV.
    pub energy_kev: f64,
    /// Ions/cm².
    pub dose: f64,
    pub window: Window,
    pub mask: MaskStack,
    pub transport: Transport,
    pub conversion_yield: f64,
    /// Permit a conversion yield above [`MAX_CONVERSION_YIELD`].
    pub allow_high_yield: bool,
    pub rng_seed: u64,
}

impl ImplantConfig {
    pub fn new(energy_kev: f64, dose: f64, window: Window, mask: MaskStack, transport: Transport, rng_seed: u64) -> Self {
        Self {
            energy_kev,
            dose,
            window,
            mask,
            transport,
            conversion_yield: DEFAULT_CONVERSION_YIELD,
            allow_high_yield: false,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.energy_kev > 0.0) {
            return Err(invalid("energy", "must be positive"));
        }
        if !(self.dose >= 0.0) || !self.dose.is_finite() {
            return Err(invalid("dose", "must be finite and non-negative"));
        }
        let eta = self.conversion_yield;
        if !(0.0..=1.0).contains(&eta) {
            return Err(invalid("conversion_yield", "must lie in [0, 1]"));
        }
        if eta > MAX_CONVERSION_YIELD && !self.allow_high_yield {
            return Err(invalid(
                "conversion_yield",
                format!("{eta} exceeds {MAX_CONVERSION_YIELD}; set allow_high_yield to use it"),
            ));
        }
        if !(self.energy_kev - self.mask.dead_layer_energy_loss() > 0.0) {
            return Err(invalid("dead_layer_energy_loss", "leaves no beam energy"));
        }
        Ok(())
    }

    /// Expected ions reaching the diamond through one EBL hole.
    pub fn expected_ions_per_hole(&self) -> Option<f64> {
        let d = self.mask.ebl()?.hole_diameter();
        let area = std::f64::consts::PI * 0.25 * d * d;
        Some(expected_ion_count(self.dose, area) * self.mask.naa_open_fraction())
    }
}

/// One of the four ⟨111⟩ bond directions an NV axis can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NvAxis {
    #[serde(rename = "111")]
    A111,
    #[serde(rename = "1-1-1")]
    A1m1m1,
    #[serde(rename = "-11-1")]
    Am11m1,
    #[serde(rename = "-1-11")]
    Am1m11,
}

impl NvAxis {
    pub const ALL: [NvAxis; 4] = [NvAxis::A111, NvAxis::A1m1m1, NvAxis::Am11m1, NvAxis::Am1m11];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Unit vector along the axis.
    pub fn direction(self) -> [f64; 3] {
        let s = 1.0 / 3f64.sqrt();
        match self {
            NvAxis::A111 => [s, s, s],
            NvAxis::A1m1m1 => [s, -s, -s],
            NvAxis::Am11m1 => [-s, s, -s],
            NvAxis::Am1m11 => [-s, -s, s],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            NvAxis::A111 => "111",
            NvAxis::A1m1m1 => "1-1-1",
            NvAxis::Am11m1 => "-11-1",
            NvAxis::Am1m11 => "-1-11",
        }
    }
}

impl std::fmt::Display for NvAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectKind {
    Nitrogen,
    Nv(NvAxis),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectSite {
    /// nm; z > 0 is inside the diamond.
    pub position: [f64; 3],
    pub kind: DefectKind,
}

impl DefectSite {
    pub fn axis(&self) -> Option<NvAxis> {
        match self.kind {
            DefectKind::Nv(a) => Some(a),
            DefectKind::Nitrogen => None,
        }
    }

    pub fn is_nv(&self) -> bool {
        matches!(self.kind, DefectKind::Nv(_))
    }
}

/// What one EBL hole produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotReport {
    /// Position of the hole in the EBL pattern (row-major).
    pub hole_ix: usize,
    pub hole_center: Point2,
    /// Ions that came to rest in the diamond.
    pub ion_count: usize,
    pub nv_count: usize,
    pub nv_sites: Vec<DefectSite>,
    /// Unconverted nitrogen.
    pub nitrogen_sites: Vec<DefectSite>,
}

/// Mean ion count over `area_nm2` at `dose` ions/cm².
pub fn expected_ion_count(dose: f64, area_nm2: f64) -> f64 {
    dose * area_nm2 / NM2_PER_CM2
}

/// Conversion yield for which a Poisson NV count with `mean_ions` ions per
/// hole leaves a fraction `empty_fraction` of holes without an NV.
pub fn calibrate_conversion_yield(empty_fraction: f64, mean_ions: f64) -> Result<f64> {
    if !(empty_fraction > 0.0 && empty_fraction <= 1.0) {
        return Err(invalid("empty_fraction", "must lie in (0, 1]"));
    }
    if !(mean_ions > 0.0) {
        return Err(invalid("mean_ions", "must be positive"));
    }
    Ok(-empty_fraction.ln() / mean_ions)
}

/// Poisson-distributed ion arrivals over `window`, uniform in position,
/// keeping only those the mask transmits.
pub fn sample_entries<R: Rng + ?Sized>(dose: f64, window: &Window, mask: &MaskStack, rng: &mut R) -> Vec<Point2> {
    let lambda = expected_ion_count(dose, window.area());
    let n = if lambda > 0.0 {
        Poisson::new(lambda).map(|p| p.sample(rng) as u64).unwrap_or(0)
    } else {
        0
    };
    let mut out = Vec::new();
    for _ in 0..n {
        let p = [
            window.origin[0] + window.size[0] * rng.random::<f64>(),
            window.origin[1] + window.size[1] * rng.random::<f64>(),
        ];
        if mask.transmits(p) {
            out.push(p);
        }
    }
    out
}

/// Stopped positions for ions entering at `entries` with `energy_kev` left
/// after the dead layer. Backscattered BCA ions are dropped.
pub fn implant<R: Rng + ?Sized>(
    entries: &[Point2],
    energy_kev: f64,
    transport: &Transport,
    rng: &mut R,
) -> Result<Vec<[f64; 3]>> {
    match transport {
        Transport::Gaussian(table) => {
            let row = table.lookup(energy_kev)?;
            Ok(entries
                .iter()
                .map(|e| {
                    let dx: f64 = rng.sample(StandardNormal);
                    let dy: f64 = rng.sample(StandardNormal);
                    // truncate at the surface by redrawing
                    let z = loop {
                        let z = row.rp + row.drp * rng.sample::<f64, _>(StandardNormal);
                        if z > 0.0 {
                            break z;
                        }
                    };
                    [e[0] + row.drlat * dx, e[1] + row.drlat * dy, z]
                })
                .collect())
        }
        Transport::Bca(params) => {
            let mut out = Vec::with_capacity(entries.len());
            for &e in entries {
                let s = transport_ion(energy_kev, e, params, rng)?;
                if !s.backscattered {
                    out.push(s.position);
                }
            }
            Ok(out)
        }
    }
}

/// Each ion becomes an NV with probability `eta`, on a uniformly chosen axis.
pub fn convert_to_nv<R: Rng + ?Sized>(ions: &[[f64; 3]], eta: f64, rng: &mut R) -> Vec<DefectSite> {
    ions.iter()
        .map(|&position| {
            let kind = if rng.random::<f64>() < eta {
                DefectKind::Nv(NvAxis::ALL[rng.random_range(0..4)])
            } else {
                DefectKind::Nitrogen
            };
            DefectSite { position, kind }
        })
        .collect()
}

/// Empirical P(N) for N = 0..=max observed NV count.
pub fn nv_count_distribution(reports: &[SpotReport]) -> Result<Vec<f64>> {
    if reports.is_empty() {
        return Err(invalid("reports", "need at least one hole"));
    }
    let max = reports.iter().map(|r| r.nv_count).max().unwrap_or(0);
    let mut p = vec![0.0; max + 1];
    for r in reports {
        p[r.nv_count] += 1.0;
    }
    let n = reports.len() as f64;
    p.iter_mut().for_each(|x| *x /= n);
    Ok(p)
}

/// Run the full pipeline. With an EBL layer every hole whose centre lies in
/// the window is implanted over its bounding square; without one the whole
/// window is a single spot.
pub fn run_implant(config: &ImplantConfig) -> Result<Vec<SpotReport>> {
    config.validate()?;
    let spots: Vec<(usize, Point2, Window)> = match config.mask.ebl() {
        Some(ebl) => {
            let d = ebl.hole_diameter();
            ebl.hole_centers()
                .into_iter()
                .enumerate()
                .filter(|(_, c)| config.window.contains(*c))
                .map(|(i, c)| Ok((i, c, Window::square(c, d)?)))
                .collect::<Result<_>>()?
        }
        None => vec![(0, config.window.center(), config.window)],
    };
    let energy = config.energy_kev - config.mask.dead_layer_energy_loss();
    spots
        .into_par_iter()
        .map(|(hole_ix, hole_center, window)| {
            let mut rng = substream(config.rng_seed, domain::HOLE, hole_ix as u64);
            let entries = sample_entries(config.dose, &window, &config.mask, &mut rng);
            let ions = implant(&entries, energy, &config.transport, &mut rng)?;
            let (nv_sites, nitrogen_sites): (Vec<_>, Vec<_>) = convert_to_nv(&ions, config.conversion_yield, &mut rng)
                .into_iter()
                .partition(DefectSite::is_nv);
            Ok(SpotReport {
                hole_ix,
                hole_center,
                ion_count: ions.len(),
                nv_count: nv_sites.len(),
                nv_sites,
                nitrogen_sites,
            })
        })
        .collect()
}
