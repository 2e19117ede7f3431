//! Physical constants and material defaults.
//!
//! CODATA 2018 values. The NV zero-field splitting and electron
//! gyromagnetic ratio are the usual room-temperature figures.

/// Vacuum permeability over 4π, T·m/A.
pub const MU0_OVER_4PI: f64 = 1.000_000_000_55e-7;
/// Free-electron g-factor (magnitude).
pub const G_ELECTRON: f64 = 2.002_319_304_362_56;
/// Bohr magneton, J/T.
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Avogadro constant, 1/mol.
pub const AVOGADRO: f64 = 6.022_140_76e23;

/// Bohr radius, nm.
pub const BOHR_RADIUS_NM: f64 = 0.052_917_721_09;
/// e²/(4πε0), eV·nm.
pub const COULOMB_EV_NM: f64 = 1.439_964_547_8;

/// NV ground-state zero-field splitting, MHz.
pub const NV_ZERO_FIELD_SPLITTING_MHZ: f64 = 2870.0;
/// NV electron gyromagnetic ratio, MHz/G.
pub const NV_GYROMAGNETIC_MHZ_PER_G: f64 = 2.8;

/// Diamond mass density, g/cm³.
pub const DIAMOND_DENSITY_G_CM3: f64 = 3.51;
/// Natural carbon atomic mass, amu.
pub const CARBON_MASS_AMU: f64 = 12.011;
/// ¹⁴N atomic mass, amu.
pub const N14_MASS_AMU: f64 = 14.003;

/// nm² per cm².
pub const NM2_PER_CM2: f64 = 1e14;
