//! Universal (ZBL) screened Coulomb scattering.
//!
//! Lengths are reduced by the universal screening length `a`, energies by
//! `Z1 Z2 e² / a`. The centre-of-mass deflection angle comes from the MAGIC
//! closed-form approximation to the classical scattering integral.

use std::f64::consts::PI;

use super::{IonSpecies, TargetMaterial};
use crate::constants::{BOHR_RADIUS_NM, COULOMB_EV_NM};

const ZBL_COEF: [f64; 4] = [0.18175, 0.50986, 0.28022, 0.028171];
const ZBL_EXP: [f64; 4] = [3.1998, 0.94229, 0.4029, 0.20162];
const MAGIC: [f64; 5] = [0.99229, 0.011615, 0.0071222, 14.813, 9.3066];

/// ZBL screening function φ(x).
pub fn zbl_screening(x: f64) -> f64 {
    ZBL_COEF
        .iter()
        .zip(ZBL_EXP)
        .map(|(c, d)| c * (-d * x).exp())
        .sum()
}

/// dφ/dx.
pub fn zbl_screening_derivative(x: f64) -> f64 {
    ZBL_COEF
        .iter()
        .zip(ZBL_EXP)
        .map(|(c, d)| -c * d * (-d * x).exp())
        .sum()
}

/// Universal screening length, nm.
pub fn screening_length(z1: u32, z2: u32) -> f64 {
    0.8854 * BOHR_RADIUS_NM / ((z1 as f64).powf(0.23) + (z2 as f64).powf(0.23))
}

/// Maximum fraction of the lab energy that can be passed to a target atom.
pub fn kinematic_factor(m1: f64, m2: f64) -> f64 {
    4.0 * m1 * m2 / (m1 + m2).powi(2)
}

/// Reduced energy ε for a lab-frame projectile energy in eV.
pub fn reduced_energy(energy: f64, ion: &IonSpecies, target: &TargetMaterial) -> f64 {
    let a = screening_length(ion.atomic_number, target.atomic_number);
    let e_cm = energy * target.mass / (ion.mass + target.mass);
    e_cm * a / (ion.atomic_number as f64 * target.atomic_number as f64 * COULOMB_EV_NM)
}

/// Reduced distance of closest approach: the root of
/// `1 - φ(x)/(x ε) - b²/x² = 0`.
pub fn closest_approach(eps: f64, b: f64) -> f64 {
    // h(x) = x² - x φ(x)/ε - b² shares the root; h(b) < 0 and the bare
    // Coulomb root b + 1/ε bounds it from above.
    let h = |x: f64| x * x - x * zbl_screening(x) / eps - b * b;
    let dh = |x: f64| 2.0 * x - (zbl_screening(x) + x * zbl_screening_derivative(x)) / eps;
    let mut lo = b.max(1e-12);
    let mut hi = b + 1.0 / eps;
    if h(lo) >= 0.0 {
        return lo;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let hx = h(x);
        if hx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = hx / dh(x);
        let mut next = x - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-14 * x.max(1e-300) || hi - lo <= 1e-15 * hi {
            return next;
        }
        x = next;
    }
    x
}

/// Outcome of one binary collision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collision {
    /// Centre-of-mass deflection angle, rad.
    pub theta_cm: f64,
    /// Energy given to the recoil, eV.
    pub energy_transfer: f64,
}

/// Centre-of-mass scattering angle from the MAGIC approximation.
pub fn magic_theta(eps: f64, b: f64) -> f64 {
    if b <= 0.0 {
        return PI;
    }
    let x0 = closest_approach(eps, b);
    let v = zbl_screening(x0) / x0;
    let dv = (zbl_screening_derivative(x0) * x0 - zbl_screening(x0)) / (x0 * x0);
    let rho = -2.0 * (eps - v) / dv;
    let sqrt_eps = eps.sqrt();
    let alpha = 1.0 + MAGIC[0] / sqrt_eps;
    let beta = (MAGIC[1] + sqrt_eps) / (MAGIC[2] + sqrt_eps);
    let gamma = (MAGIC[3] + eps) / (MAGIC[4] + eps);
    let a = 2.0 * alpha * eps * b.powf(beta);
    let g = gamma / ((1.0 + a * a).sqrt() - a);
    // x0 - b without cancellation, from x0² - b² = x0 φ(x0) / ε
    let gap = x0 * zbl_screening(x0) / (eps * (x0 + b));
    // cos(θ/2) = (b + ρ + Δ)/(x0 + ρ) with Δ = A (x0 - b)/(1 + G)
    let one_minus_cos = (gap * (1.0 - a / (1.0 + g)) / (x0 + rho)).clamp(0.0, 1.0);
    4.0 * (0.5 * one_minus_cos).sqrt().asin()
}

/// Deflection and energy transfer for a lab energy `energy` (eV) and impact
/// parameter `impact` (nm).
pub fn scatter(energy: f64, impact: f64, ion: &IonSpecies, target: &TargetMaterial) -> Collision {
    let a = screening_length(ion.atomic_number, target.atomic_number);
    let eps = reduced_energy(energy, ion, target);
    let theta_cm = magic_theta(eps, impact / a);
    let gamma = kinematic_factor(ion.mass, target.mass);
    Collision {
        theta_cm,
        energy_transfer: gamma * energy * (0.5 * theta_cm).sin().powi(2),
    }
}

/// Lab-frame deflection of the projectile for a centre-of-mass angle.
pub fn lab_angle(theta_cm: f64, m1: f64, m2: f64) -> f64 {
    theta_cm.sin().atan2(theta_cm.cos() + m1 / m2)
}
