//! Layered lateral blocking masks.
//!
//! A [`MaskStack`] is an ordered set of layers that are each either a
//! triangular nanoscale aperture array ([`NaaLattice`]) or a layer of
//! lithographic holes ([`EblLayer`]). Blocking is binary: an ion entering at
//! a lateral point reaches the substrate iff the point is open in every
//! layer.
//!
//! The aperture lattice is an ideal triangular lattice of circular
//! apertures with pitch `L = d + w` (aperture diameter plus wall width). A
//! regular hexagon of side `L` centred on an aperture holds three apertures'
//! worth of area, so the open fraction is
//!
//! ```text
//! rho = 3 * pi * (d/2)^2 / ((3 * sqrt(3) / 2) * L^2) = pi / sqrt(12) * (d / L)^2
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::hash_unit;

/// Lateral position in nm.
pub type Point2 = [f64; 2];

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Open fraction of a triangular array of circular apertures.
///
/// Fails when the apertures would overlap (`aperture_diameter > pitch`).
pub fn open_area_ratio(aperture_diameter: f64, pitch: f64) -> Result<f64> {
    if !(aperture_diameter > 0.0) {
        return Err(invalid("aperture_diameter", "must be positive"));
    }
    if !(pitch > 0.0) {
        return Err(invalid("pitch", "must be positive"));
    }
    if aperture_diameter > pitch {
        return Err(Error::OverlappingApertures {
            diameter: aperture_diameter,
            pitch,
        });
    }
    let hexagon = 1.5 * SQRT3 * pitch * pitch;
    let aperture = PI * (aperture_diameter / 2.0).powi(2);
    Ok(3.0 * aperture / hexagon)
}

/// Scale a nominal dose by a transmitted fraction.
pub fn effective_dose(nominal_dose: f64, ratio: f64) -> Result<f64> {
    if !(nominal_dose >= 0.0) {
        return Err(invalid("nominal_dose", "must be nonnegative"));
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(invalid("ratio", format!("{ratio} is not in [0, 1]")));
    }
    Ok(nominal_dose * ratio)
}

/// How a lattice aperture is counted as lying inside a hole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Containment {
    /// The whole aperture disc lies inside the hole.
    #[default]
    FullyInside,
    /// Only the aperture centre needs to lie inside the hole.
    CenterInside,
}

/// Triangular nanoscale aperture array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaaLattice {
    aperture_diameter: f64,
    wall_width: f64,
    thickness: f64,
    offset: Point2,
    rotation: f64,
    jitter_sigma: f64,
    jitter_seed: u64,
}

impl NaaLattice {
    /// Default layer thickness, nm.
    pub const DEFAULT_THICKNESS: f64 = 55.0;

    pub fn new(aperture_diameter: f64, wall_width: f64) -> Result<Self> {
        if !(aperture_diameter > 0.0) || !aperture_diameter.is_finite() {
            return Err(invalid("aperture_diameter", "must be positive and finite"));
        }
        if !(wall_width >= 0.0) || !wall_width.is_finite() {
            return Err(invalid("wall_width", "must be nonnegative and finite"));
        }
        Ok(Self {
            aperture_diameter,
            wall_width,
            thickness: Self::DEFAULT_THICKNESS,
            offset: [0.0, 0.0],
            rotation: 0.0,
            jitter_sigma: 0.0,
            jitter_seed: 0,
        })
    }

    /// Build from aperture diameter and centre-to-centre pitch.
    pub fn with_pitch(aperture_diameter: f64, pitch: f64) -> Result<Self> {
        open_area_ratio(aperture_diameter, pitch)?;
        Self::new(aperture_diameter, pitch - aperture_diameter)
    }

    pub fn thickness(mut self, thickness: f64) -> Result<Self> {
        if !(thickness > 0.0) {
            return Err(invalid("thickness", "must be positive"));
        }
        self.thickness = thickness;
        Ok(self)
    }

    pub fn offset(mut self, offset: Point2) -> Self {
        self.offset = offset;
        self
    }

    pub fn rotation(mut self, radians: f64) -> Self {
        self.rotation = radians;
        self
    }

    /// Per-aperture log-normal diameter spread with standard deviation
    /// `sigma` nm. Each site's diameter is a pure function of its lattice
    /// indices and `seed`.
    pub fn jitter(mut self, sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(invalid("jitter_sigma", "must be nonnegative"));
        }
        self.jitter_sigma = sigma;
        self.jitter_seed = seed;
        Ok(self)
    }

    pub fn aperture_diameter(&self) -> f64 {
        self.aperture_diameter
    }

    pub fn wall_width(&self) -> f64 {
        self.wall_width
    }

    pub fn layer_thickness(&self) -> f64 {
        self.thickness
    }

    pub fn lattice_offset(&self) -> Point2 {
        self.offset
    }

    pub fn lattice_rotation(&self) -> f64 {
        self.rotation
    }

    pub fn jitter_sigma(&self) -> f64 {
        self.jitter_sigma
    }

    /// Centre-to-centre distance.
    pub fn pitch(&self) -> f64 {
        self.aperture_diameter + self.wall_width
    }

    pub fn open_area_ratio(&self) -> f64 {
        open_area_ratio(self.aperture_diameter, self.pitch())
            .expect("lattice invariants guarantee non-overlapping apertures")
    }

    /// Lateral area of one lattice site, nm².
    pub fn site_area(&self) -> f64 {
        0.5 * SQRT3 * self.pitch().powi(2)
    }

    pub fn site_center(&self, i: i64, j: i64) -> Point2 {
        let l = self.pitch();
        let u = l * (i as f64 + 0.5 * j as f64);
        let v = l * 0.5 * SQRT3 * j as f64;
        let (s, c) = self.rotation.sin_cos();
        [
            self.offset[0] + c * u - s * v,
            self.offset[1] + s * u + c * v,
        ]
    }

    pub fn site_diameter(&self, i: i64, j: i64) -> f64 {
        if self.jitter_sigma == 0.0 {
            return self.aperture_diameter;
        }
        let d = self.aperture_diameter;
        let s2 = (1.0 + (self.jitter_sigma / d).powi(2)).ln();
        let s = s2.sqrt();
        let u1 = hash_unit(self.jitter_seed, i, j, 0x6a69_7474_6572_0001);
        let u2 = hash_unit(self.jitter_seed, i, j, 0x6a69_7474_6572_0002);
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos();
        d * (s * z - 0.5 * s2).exp()
    }

    /// Fractional lattice coordinates of a lateral point.
    fn lattice_coords(&self, p: Point2) -> (f64, f64) {
        let l = self.pitch();
        let dx = p[0] - self.offset[0];
        let dy = p[1] - self.offset[1];
        let (s, c) = self.rotation.sin_cos();
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        let j = v / (0.5 * SQRT3 * l);
        let i = u / l - 0.5 * j;
        (i, j)
    }

    /// Whether `p` lies inside some aperture disc.
    ///
    /// Sites in the 4×4 index block around `p` are examined, which covers
    /// every aperture within one pitch of the point.
    pub fn is_open(&self, p: Point2) -> bool {
        let (fi, fj) = self.lattice_coords(p);
        let (i0, j0) = (fi.floor() as i64, fj.floor() as i64);
        for i in i0 - 1..=i0 + 2 {
            for j in j0 - 1..=j0 + 2 {
                let c = self.site_center(i, j);
                let r = 0.5 * self.site_diameter(i, j);
                let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
                if dx * dx + dy * dy <= r * r {
                    return true;
                }
            }
        }
        false
    }

    /// Lattice sites inside a circular hole, sorted by distance from its centre.
    pub fn apertures_in_hole(
        &self,
        hole_center: Point2,
        hole_diameter: f64,
        containment: Containment,
    ) -> Vec<Point2> {
        let radius = 0.5 * hole_diameter;
        let (fi, fj) = self.lattice_coords(hole_center);
        let row = 0.5 * SQRT3 * self.pitch();
        let reach = ((radius + self.aperture_diameter * 2.0) / row).ceil() as i64 + 2;
        let (ci, cj) = (fi.round() as i64, fj.round() as i64);
        let mut found = Vec::new();
        for i in ci - 2 * reach..=ci + 2 * reach {
            for j in cj - reach..=cj + reach {
                let c = self.site_center(i, j);
                let dist = (c[0] - hole_center[0]).hypot(c[1] - hole_center[1]);
                let inside = match containment {
                    Containment::FullyInside => dist + 0.5 * self.site_diameter(i, j) <= radius,
                    Containment::CenterInside => dist <= radius,
                };
                if inside {
                    found.push((dist, c));
                }
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0));
        found.into_iter().map(|(_, c)| c).collect()
    }
}

/// Placement of lithographic holes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HolePattern {
    Centers(Vec<Point2>),
    /// `nx × ny` holes at `origin + (i, j) * pitch`.
    Grid {
        origin: Point2,
        pitch: f64,
        nx: usize,
        ny: usize,
    },
}

/// Resist layer with circular holes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EblLayer {
    hole_diameter: f64,
    thickness: f64,
    pattern: HolePattern,
}

impl EblLayer {
    pub const DEFAULT_HOLE_DIAMETER: f64 = 32.23;
    pub const DEFAULT_THICKNESS: f64 = 200.0;
    pub const DEFAULT_PITCH: f64 = 2000.0;

    pub fn new(hole_diameter: f64, pattern: HolePattern) -> Result<Self> {
        if !(hole_diameter > 0.0) {
            return Err(invalid("hole_diameter", "must be positive"));
        }
        if let HolePattern::Grid { pitch, .. } = pattern {
            if !(pitch > hole_diameter) {
                return Err(invalid(
                    "pitch",
                    format!("grid pitch {pitch} nm must exceed hole diameter {hole_diameter} nm"),
                ));
            }
        }
        Ok(Self {
            hole_diameter,
            thickness: Self::DEFAULT_THICKNESS,
            pattern,
        })
    }

    /// A single hole centred at `center`.
    pub fn single(hole_diameter: f64, center: Point2) -> Result<Self> {
        Self::new(hole_diameter, HolePattern::Centers(vec![center]))
    }

    pub fn thickness(mut self, thickness: f64) -> Result<Self> {
        if !(thickness > 0.0) {
            return Err(invalid("thickness", "must be positive"));
        }
        self.thickness = thickness;
        Ok(self)
    }

    pub fn hole_diameter(&self) -> f64 {
        self.hole_diameter
    }

    pub fn layer_thickness(&self) -> f64 {
        self.thickness
    }

    pub fn pattern(&self) -> &HolePattern {
        &self.pattern
    }

    pub fn hole_count(&self) -> usize {
        match &self.pattern {
            HolePattern::Centers(c) => c.len(),
            HolePattern::Grid { nx, ny, .. } => nx * ny,
        }
    }

    /// Hole centres in row-major order (x fastest for grids).
    pub fn hole_centers(&self) -> Vec<Point2> {
        match &self.pattern {
            HolePattern::Centers(c) => c.clone(),
            HolePattern::Grid {
                origin,
                pitch,
                nx,
                ny,
            } => (0..*ny)
                .flat_map(|j| {
                    (0..*nx).map(move |i| {
                        [origin[0] + i as f64 * pitch, origin[1] + j as f64 * pitch]
                    })
                })
                .collect(),
        }
    }

    pub fn is_open(&self, p: Point2) -> bool {
        let r2 = (0.5 * self.hole_diameter).powi(2);
        let inside = |c: &Point2| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) <= r2;
        match &self.pattern {
            HolePattern::Centers(centers) => centers.iter().any(inside),
            HolePattern::Grid {
                origin,
                pitch,
                nx,
                ny,
            } => {
                if *nx == 0 || *ny == 0 {
                    return false;
                }
                let i = ((p[0] - origin[0]) / pitch).round().clamp(0.0, (*nx - 1) as f64);
                let j = ((p[1] - origin[1]) / pitch).round().clamp(0.0, (*ny - 1) as f64);
                inside(&[origin[0] + i * pitch, origin[1] + j * pitch])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskLayer {
    Naa(NaaLattice),
    Ebl(EblLayer),
}

impl MaskLayer {
    pub fn is_open(&self, p: Point2) -> bool {
        match self {
            MaskLayer::Naa(l) => l.is_open(p),
            MaskLayer::Ebl(l) => l.is_open(p),
        }
    }
}

/// Ordered mask layers plus a uniform energy loss in residual resist.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MaskStack {
    layers: Vec<MaskLayer>,
    dead_layer_energy_loss: f64,
}

impl MaskStack {
    /// An empty stack transmits everywhere.
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_layer(mut self, layer: MaskLayer) -> Self {
        self.layers.push(layer);
        self
    }

    pub fn with_naa(self, lattice: NaaLattice) -> Self {
        self.with_layer(MaskLayer::Naa(lattice))
    }

    pub fn with_ebl(self, layer: EblLayer) -> Self {
        self.with_layer(MaskLayer::Ebl(layer))
    }

    /// Energy (keV) lost by every transmitted ion before entering the target.
    pub fn with_dead_layer_loss(mut self, kev: f64) -> Result<Self> {
        if !(kev >= 0.0) {
            return Err(invalid("dead_layer_energy_loss", "must be nonnegative"));
        }
        self.dead_layer_energy_loss = kev;
        Ok(self)
    }

    pub fn layers(&self) -> &[MaskLayer] {
        &self.layers
    }

    pub fn dead_layer_energy_loss(&self) -> f64 {
        self.dead_layer_energy_loss
    }

    pub fn naa(&self) -> Option<&NaaLattice> {
        self.layers.iter().find_map(|l| match l {
            MaskLayer::Naa(n) => Some(n),
            _ => None,
        })
    }

    pub fn ebl(&self) -> Option<&EblLayer> {
        self.layers.iter().find_map(|l| match l {
            MaskLayer::Ebl(e) => Some(e),
            _ => None,
        })
    }

    pub fn transmits(&self, p: Point2) -> bool {
        self.layers.iter().all(|l| l.is_open(p))
    }

    /// Product of the NAA open fractions, 1 when there is no NAA layer.
    pub fn naa_open_fraction(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| match l {
                MaskLayer::Naa(n) => n.open_area_ratio(),
                MaskLayer::Ebl(_) => 1.0,
            })
            .product()
    }
}
