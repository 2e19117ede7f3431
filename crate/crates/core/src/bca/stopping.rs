use serde::{Deserialize, Serialize};

use super::{IonSpecies, TargetMaterial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElectronicStopping {
    /// Velocity-proportional Lindhard–Scharff stopping.
    #[default]
    LindhardScharff,
    Off,
}

/// Electronic stopping power, eV/nm, at lab energy `energy` (eV).
pub fn electronic_stopping(
    model: ElectronicStopping,
    energy: f64,
    ion: &IonSpecies,
    target: &TargetMaterial,
) -> f64 {
    match model {
        ElectronicStopping::Off => 0.0,
        ElectronicStopping::LindhardScharff => {
            lindhard_scharff_coefficient(ion, target) * energy.max(0.0).sqrt()
        }
    }
}

/// `k` in `S_e = k sqrt(E)`, eV/nm per sqrt(eV).
pub(crate) fn lindhard_scharff_coefficient(ion: &IonSpecies, target: &TargetMaterial) -> f64 {
    let z1 = ion.atomic_number as f64;
    let z2 = target.atomic_number as f64;
    // cross section in eV·Å² per sqrt(eV)
    let k = 1.212 * z1.powf(7.0 / 6.0) * z2
        / ((z1.powf(2.0 / 3.0) + z2.powf(2.0 / 3.0)).powf(1.5) * ion.mass.sqrt());
    // atoms/Å³ then eV/Å -> eV/nm
    k * target.atomic_density * 1e-24 * 10.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velocity_proportional() {
        let (ion, t) = (IonSpecies::nitrogen14(), TargetMaterial::diamond());
        let m = ElectronicStopping::LindhardScharff;
        for e in [100.0, 2_500.0, 10_000.0] {
            let ratio = electronic_stopping(m, 4.0 * e, &ion, &t) / electronic_stopping(m, e, &ion, &t);
            assert!((ratio - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn off_is_zero() {
        let (ion, t) = (IonSpecies::nitrogen14(), TargetMaterial::diamond());
        for e in [1.0, 1e4, 1e6] {
            assert_eq!(electronic_stopping(ElectronicStopping::Off, e, &ion, &t), 0.0);
        }
    }

    #[test]
    fn nitrogen_in_diamond_at_10kev() {
        // regression constant frozen from the first implementation
        let s = electronic_stopping(
            ElectronicStopping::LindhardScharff,
            10_000.0,
            &IonSpecies::nitrogen14(),
            &TargetMaterial::diamond(),
        );
        assert!((s - 180.277).abs() < 1e-3, "{s}");
    }
}
