//! Binary-collision-approximation transport of ions in an amorphous target.
//!
//! Each trajectory alternates a free flight of one mean atomic spacing
//! (with continuous electronic energy loss) and a single screened-Coulomb
//! collision whose impact parameter is drawn uniformly in area. Ions are
//! followed until their energy drops below a cutoff or they leave through
//! the surface.

mod potential;
mod range_table;
mod stopping;
mod transport;

use serde::{Deserialize, Serialize};

pub use potential::{
    closest_approach, kinematic_factor, lab_angle, magic_theta, reduced_energy, scatter,
    screening_length, zbl_screening, zbl_screening_derivative, Collision,
};
pub use range_table::{build_range_table, RangeRow, RangeTable};
pub use stopping::{electronic_stopping, ElectronicStopping};
pub use transport::{transport_ion, EnergyLedger, StoppedIon};

use crate::constants::{AVOGADRO, CARBON_MASS_AMU, DIAMOND_DENSITY_G_CM3, N14_MASS_AMU};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    pub atomic_number: u32,
    /// amu
    pub mass: f64,
}

impl IonSpecies {
    pub fn new(atomic_number: u32, mass: f64) -> Result<Self> {
        if atomic_number < 1 {
            return Err(invalid("atomic_number", "must be at least 1"));
        }
        if !(mass > 0.0) {
            return Err(invalid("mass", "must be positive"));
        }
        Ok(Self {
            atomic_number,
            mass,
        })
    }

    pub fn nitrogen14() -> Self {
        Self {
            atomic_number: 7,
            mass: N14_MASS_AMU,
        }
    }
}

impl Default for IonSpecies {
    fn default() -> Self {
        Self::nitrogen14()
    }
}

/// Monatomic amorphous target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetMaterial {
    pub atomic_number: u32,
    /// amu
    pub mass: f64,
    /// atoms/cm³
    pub atomic_density: f64,
    /// eV
    pub surface_binding: f64,
}

impl TargetMaterial {
    pub fn new(atomic_number: u32, mass: f64, atomic_density: f64, surface_binding: f64) -> Result<Self> {
        if atomic_number < 1 {
            return Err(invalid("atomic_number", "must be at least 1"));
        }
        if !(mass > 0.0) {
            return Err(invalid("mass", "must be positive"));
        }
        if !(atomic_density > 0.0) {
            return Err(invalid("atomic_density", "must be positive"));
        }
        Ok(Self {
            atomic_number,
            mass,
            atomic_density,
            surface_binding,
        })
    }

    /// Carbon at the density of diamond (3.51 g/cm³).
    pub fn diamond() -> Self {
        Self {
            atomic_number: 6,
            mass: CARBON_MASS_AMU,
            atomic_density: DIAMOND_DENSITY_G_CM3 / CARBON_MASS_AMU * AVOGADRO,
            surface_binding: 7.41,
        }
    }

    /// Atoms per nm³.
    pub fn density_nm3(&self) -> f64 {
        self.atomic_density * 1e-21
    }

    /// Mean interatomic spacing n^(-1/3), nm.
    pub fn mean_spacing(&self) -> f64 {
        self.density_nm3().powf(-1.0 / 3.0)
    }
}

impl Default for TargetMaterial {
    fn default() -> Self {
        Self::diamond()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcaParams {
    pub ion: IonSpecies,
    pub target: TargetMaterial,
    /// Trajectories end below this energy, eV.
    pub stop_energy: f64,
    pub electronic: ElectronicStopping,
    /// When false every collision is forced to zero deflection and zero
    /// transfer. Only useful for checking the electronic-loss integration.
    pub nuclear_scattering: bool,
    pub rng_seed: u64,
}

impl BcaParams {
    pub fn new(rng_seed: u64) -> Self {
        Self {
            ion: IonSpecies::nitrogen14(),
            target: TargetMaterial::diamond(),
            stop_energy: 16.0,
            electronic: ElectronicStopping::LindhardScharff,
            nuclear_scattering: true,
            rng_seed,
        }
    }

    pub(crate) fn validate(&self, beam_energy_ev: f64) -> Result<()> {
        if !(self.stop_energy > 0.0) {
            return Err(invalid("stop_energy", "must be positive"));
        }
        if !(beam_energy_ev > self.stop_energy) {
            return Err(invalid(
                "energy",
                format!(
                    "beam energy {beam_energy_ev} eV must exceed the stop energy {} eV",
                    self.stop_energy
                ),
            ));
        }
        if !self.nuclear_scattering && self.electronic == ElectronicStopping::Off {
            return Err(invalid(
                "electronic",
                "with nuclear scattering disabled the electronic model cannot be off",
            ));
        }
        Ok(())
    }
}

impl Default for BcaParams {
    fn default() -> Self {
        Self::new(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diamond_defaults() {
        let d = TargetMaterial::diamond();
        assert!((d.atomic_density / 1.76e23 - 1.0).abs() < 0.01);
        assert!((d.mean_spacing() - 0.1785).abs() < 1e-3);
    }

    #[test]
    fn invalid_species_rejected() {
        assert!(IonSpecies::new(0, 14.0).is_err());
        assert!(IonSpecies::new(7, 0.0).is_err());
        assert!(TargetMaterial::new(6, 12.0, 0.0, 7.0).is_err());
    }
}
