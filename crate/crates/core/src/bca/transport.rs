use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::potential::{lab_angle, scatter};
use super::stopping::electronic_stopping;
use super::BcaParams;
use crate::error::{Error, Result};
use crate::mask::Point2;

/// Where the energy of one trajectory went, eV.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub nuclear: f64,
    pub electronic: f64,
    pub residual: f64,
}

impl EnergyLedger {
    pub fn total(&self) -> f64 {
        self.nuclear + self.electronic + self.residual
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppedIon {
    /// nm; z points into the target.
    pub position: [f64; 3],
    pub path_length: f64,
    pub collision_count: u32,
    /// The ion left through the surface (z < 0); excluded from range moments.
    pub backscattered: bool,
    pub energy: EnergyLedger,
}

const MAX_FLIGHTS: u32 = 50_000_000;

/// Follow a single ion that enters the surface at `entry` moving along +z
/// with energy `energy_kev`.
pub fn transport_ion<R: Rng + ?Sized>(
    energy_kev: f64,
    entry: Point2,
    params: &BcaParams,
    rng: &mut R,
) -> Result<StoppedIon> {
    let e0 = energy_kev * 1e3;
    params.validate(e0)?;
    let ion = &params.ion;
    let target = &params.target;
    let flight = target.mean_spacing();
    let p_max = 1.0 / (PI * target.density_nm3() * flight).sqrt();

    let mut pos = [entry[0], entry[1], 0.0];
    let mut dir = [0.0, 0.0, 1.0];
    let mut energy = e0;
    let mut ledger = EnergyLedger::default();
    let mut path = 0.0;
    let mut collisions = 0u32;
    let mut backscattered = false;

    for _ in 0..MAX_FLIGHTS {
        for k in 0..3 {
            pos[k] += dir[k] * flight;
        }
        path += flight;
        let loss = (electronic_stopping(params.electronic, energy, ion, target) * flight).min(energy);
        energy -= loss;
        ledger.electronic += loss;

        if pos[2] < 0.0 {
            backscattered = true;
            break;
        }
        if energy < params.stop_energy {
            break;
        }

        if params.nuclear_scattering {
            let impact = p_max * rng.random::<f64>().sqrt();
            let c = scatter(energy, impact, ion, target);
            let transfer = c.energy_transfer.min(energy);
            energy -= transfer;
            ledger.nuclear += transfer;
            collisions += 1;
            let psi = lab_angle(c.theta_cm, ion.mass, target.mass);
            let phi = 2.0 * PI * rng.random::<f64>();
            dir = rotate(dir, psi, phi);
            if energy < params.stop_energy {
                break;
            }
        }
    }
    if energy >= params.stop_energy && !backscattered {
        return Err(Error::InvalidParameter {
            name: "stop_energy",
            reason: format!("trajectory did not terminate after {MAX_FLIGHTS} flights"),
        });
    }
    ledger.residual = energy;

    Ok(StoppedIon {
        position: pos,
        path_length: path,
        collision_count: collisions,
        backscattered,
        energy: ledger,
    })
}

/// Deflect unit vector `d` by polar angle `psi` at azimuth `phi`.
fn rotate(d: [f64; 3], psi: f64, phi: f64) -> [f64; 3] {
    // e1 ⟂ d built from the smallest component axis
    let axis = if d[0].abs() <= d[1].abs() && d[0].abs() <= d[2].abs() {
        [1.0, 0.0, 0.0]
    } else if d[1].abs() <= d[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let e1 = normalize(cross(d, axis));
    let e2 = cross(d, e1);
    let (sp, cp) = psi.sin_cos();
    let (sf, cf) = phi.sin_cos();
    normalize([
        cp * d[0] + sp * (cf * e1[0] + sf * e2[0]),
        cp * d[1] + sp * (cf * e1[1] + sf * e2[1]),
        cp * d[2] + sp * (cf * e1[2] + sf * e2[2]),
    ])
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bca::stopping::lindhard_scharff_coefficient;
    use crate::bca::ElectronicStopping;
    use crate::rng::{domain, substream};

    #[test]
    fn rotation_preserves_length_and_angle() {
        let d = normalize([0.3, -0.2, 0.9]);
        for (psi, phi) in [(0.1, 0.0), (1.0, 2.0), (3.0, 5.5)] {
            let r = rotate(d, psi, phi);
            let dot = d[0] * r[0] + d[1] * r[1] + d[2] * r[2];
            assert!((dot - psi.cos()).abs() < 1e-12);
            assert!(((r[0] * r[0] + r[1] * r[1] + r[2] * r[2]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_below_cutoff_rejected() {
        let p = BcaParams::new(1);
        let mut rng = substream(1, domain::BCA_ION, 0);
        assert!(transport_ion(0.010, [0.0, 0.0], &p, &mut rng).is_err());
    }

    #[test]
    fn energy_is_conserved() {
        let p = BcaParams::new(3);
        for i in 0..200 {
            let mut rng = substream(3, domain::BCA_ION, i);
            let s = transport_ion(10.0, [0.0, 0.0], &p, &mut rng).unwrap();
            assert!((s.energy.total() - 10_000.0).abs() <= 1e-6 * 10_000.0);
            assert!(s.energy.residual < p.stop_energy || s.backscattered);
            assert!(s.backscattered || s.position[2] >= 0.0);
        }
    }

    #[test]
    fn straight_path_matches_stopping_integral() {
        let mut p = BcaParams::new(0);
        p.nuclear_scattering = false;
        let mut rng = substream(0, domain::BCA_ION, 0);
        let s = transport_ion(10.0, [1.0, 2.0], &p, &mut rng).unwrap();
        let k = lindhard_scharff_coefficient(&p.ion, &p.target);
        // ∫ dE / (k sqrt(E)) from the cutoff to E0
        let depth = 2.0 / k * (10_000f64.sqrt() - p.stop_energy.sqrt());
        assert_eq!(s.position[0], 1.0);
        assert_eq!(s.position[1], 2.0);
        assert_eq!(s.collision_count, 0);
        let step = p.target.mean_spacing();
        assert!((s.position[2] - depth).abs() < 2.0 * step, "{} vs {depth}", s.position[2]);
    }

    #[test]
    fn no_loss_mechanism_is_rejected() {
        let mut p = BcaParams::new(0);
        p.nuclear_scattering = false;
        p.electronic = ElectronicStopping::Off;
        let mut rng = substream(0, domain::BCA_ION, 0);
        assert!(transport_ion(1.0, [0.0, 0.0], &p, &mut rng).is_err());
    }

    #[test]
    fn fixed_stream_is_bitwise_reproducible() {
        let p = BcaParams::new(99);
        let run = || {
            let mut rng = substream(99, domain::BCA_ION, 17);
            transport_ion(10.0, [0.0, 0.0], &p, &mut rng).unwrap()
        };
        let (a, b) = (run(), run());
        for k in 0..3 {
            assert_eq!(a.position[k].to_bits(), b.position[k].to_bits());
        }
        assert_eq!(a.collision_count, b.collision_count);
    }
}
