//! Spin figures of merit and measurement analysis.
//!
//! Dipolar coupling between NV pairs, the strong-coupling test against a
//! coherence time, and the fits used to read emitter counts and T₂ off
//! measured traces.

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::constants::{BOHR_MAGNETON, G_ELECTRON, MU0_OVER_4PI, PLANCK};
use crate::error::{invalid, Error, Result};
use crate::implant::{DefectSite, SpotReport};
use crate::rng::{domain, substream};

mod echo;
mod g2;
pub mod lm;
mod odmr;
mod trace;

pub use echo::{fit_hahn_echo, stretched_exponential, EchoFit};
pub use g2::{count_emitters, fit_g2, g2_model, EmitterCount, G2Fit};
pub use odmr::{count_odmr_dips, default_frequencies, resonances, synth_odmr, synth_odmr_on, DipCount};
pub use trace::{EchoTrace, G2Trace, OdmrSpectrum};

/// `ν·r³` for `f = 1`, in Hz·nm³.
pub fn dipolar_prefactor() -> f64 {
    let mu = G_ELECTRON * BOHR_MAGNETON;
    MU0_OVER_4PI * mu * mu / PLANCK * 1e27
}

/// Dipolar coupling in Hz between two electron spins `r` nm apart with
/// angular factor `f`.
pub fn dipolar_coupling(r: f64, f: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid("r", format!("separation must be positive and finite, got {r}")));
    }
    if !(f >= 0.0) {
        return Err(invalid("f", format!("angular factor must be non-negative, got {f}")));
    }
    Ok(f * dipolar_prefactor() / (r * r * r))
}

/// `|3cos²θ − 1| / 2`.
pub fn angular_factor(theta: f64) -> f64 {
    let c = theta.cos();
    (3.0 * c * c - 1.0).abs() / 2.0
}

/// `1/ν < T₂`, with `ν` in Hz and `t2` in μs.
pub fn strongly_coupled(nu_dip: f64, t2: f64) -> bool {
    nu_dip > 0.0 && 1e6 / nu_dip < t2
}

/// One NV pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    /// Indices into the site list.
    pub pair: (usize, usize),
    /// nm
    pub r: f64,
    pub angular_factor: f64,
    /// Hz
    pub nu_dip: f64,
    /// Set when a coherence time was supplied.
    pub strongly_coupled: Option<bool>,
}

/// Angle between `v` and `axis`, radians.
fn angle_to(v: [f64; 3], axis: [f64; 3]) -> f64 {
    let dot: f64 = v.iter().zip(&axis).map(|(a, b)| a * b).sum();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let na: f64 = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
    (dot / (nv * na)).clamp(-1.0, 1.0).acos()
}

fn pair_report(sites: &[DefectSite], i: usize, j: usize, angular: &dyn Fn(f64) -> f64) -> Result<CouplingReport> {
    let (a, b) = (&sites[i], &sites[j]);
    let d = [
        b.position[0] - a.position[0],
        b.position[1] - a.position[1],
        b.position[2] - a.position[2],
    ];
    let r = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    // the first site's axis is the quantization axis; nitrogen has none, so use z
    let axis = a.axis().map_or([0.0, 0.0, 1.0], |ax| ax.direction());
    let f = if r > 0.0 { angular(angle_to(d, axis)) } else { 0.0 };
    Ok(CouplingReport {
        pair: (i, j),
        r,
        angular_factor: f,
        nu_dip: dipolar_coupling(r, f)?,
        strongly_coupled: None,
    })
}

/// Every pair among `sites`, in lexicographic index order.
pub fn couplings(sites: &[DefectSite], t2: Option<f64>) -> Result<Vec<CouplingReport>> {
    let mut out = Vec::new();
    for i in 0..sites.len() {
        for j in i + 1..sites.len() {
            let mut rep = pair_report(sites, i, j, &angular_factor)?;
            rep.strongly_coupled = t2.map(|t| strongly_coupled(rep.nu_dip, t));
            out.push(rep);
        }
    }
    Ok(out)
}

fn closest_pair(sites: &[DefectSite]) -> Option<(usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..sites.len() {
        for j in i + 1..sites.len() {
            let d2: f64 = (0..3).map(|k| (sites[j].position[k] - sites[i].position[k]).powi(2)).sum();
            if best.is_none_or(|(b, _, _)| d2 < b) {
                best = Some((d2, i, j));
            }
        }
    }
    best.map(|(_, i, j)| (i, j))
}

/// Coherence-time distribution in μs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum T2Distribution {
    /// Resampled uniformly.
    Empirical(Vec<f64>),
    /// `ln T₂ ~ N(mu, sigma²)`.
    LogNormal { mu: f64, sigma: f64 },
}

impl T2Distribution {
    pub fn empirical(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() || samples.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(invalid("t2_samples", "need at least one positive, finite sample"));
        }
        Ok(Self::Empirical(samples))
    }

    pub fn log_normal(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(invalid("sigma", "log-normal needs finite mu and sigma >= 0"));
        }
        Ok(Self::LogNormal { mu, sigma })
    }

    /// Log-normal with the given median and `p`-quantile.
    pub fn from_median_and_quantile(median: f64, q: f64, p: f64) -> Result<Self> {
        let z = std_normal_quantile(p)?;
        if !(median > 0.0 && q > 0.0) {
            return Err(invalid("median", "median and quantile must be positive"));
        }
        let sigma = (q / median).ln() / z;
        if !(sigma >= 0.0) {
            return Err(Error::NoSolution(format!(
                "quantile {q} at p = {p} lies on the wrong side of the median {median}"
            )));
        }
        Self::log_normal(median.ln(), sigma)
    }

    /// Log-normal with the given mean and `p`-quantile.
    ///
    /// `ln(q/mean) = zσ − σ²/2` has a real root only when
    /// `ln(q/mean) ≤ z²/2`; of the two roots the narrower is returned.
    pub fn from_mean_and_quantile(mean: f64, q: f64, p: f64) -> Result<Self> {
        let z = std_normal_quantile(p)?;
        if !(mean > 0.0 && q > 0.0) {
            return Err(invalid("mean", "mean and quantile must be positive"));
        }
        let g = (q / mean).ln();
        let disc = z * z - 2.0 * g;
        if disc < 0.0 {
            return Err(Error::NoSolution(format!(
                "no log-normal has mean {mean} and {p}-quantile {q}: the ratio {:.3} exceeds the largest attainable {:.3}",
                q / mean,
                (z * z / 2.0).exp()
            )));
        }
        let roots = [z - disc.sqrt(), z + disc.sqrt()];
        let sigma = roots
            .into_iter()
            .find(|s| *s >= 0.0)
            .ok_or_else(|| Error::NoSolution(format!("no non-negative sigma for mean {mean}, quantile {q}")))?;
        Self::log_normal(mean.ln() - sigma * sigma / 2.0, sigma)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Empirical(s) => s[rng.random_range(0..s.len())],
            Self::LogNormal { mu, sigma } => LogNormal::new(*mu, *sigma)
                .expect("parameters checked at construction")
                .sample(rng),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Empirical(s) => s.iter().sum::<f64>() / s.len() as f64,
            Self::LogNormal { mu, sigma } => (mu + sigma * sigma / 2.0).exp(),
        }
    }
}

fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.5 && p < 1.0) {
        return Err(invalid("p", format!("quantile level must lie in (0.5, 1), got {p}")));
    }
    Ok(Normal::standard().inverse_cdf(p))
}

/// Median T₂ of the default distribution, μs.
pub const DEFAULT_T2_MEDIAN_US: f64 = 4.5;
/// 90th percentile of the default distribution, μs.
pub const DEFAULT_T2_P90_US: f64 = 16.0;

/// Log-normal T₂ with median 4.5 μs and 10% of draws above 16 μs.
///
/// A log-normal with *mean* 4.5 μs cannot put 10% of its mass above 16 μs
/// (see [`T2Distribution::from_mean_and_quantile`]), so the 4.5 μs figure
/// is used as the median. The resulting mean is about 7.3 μs.
pub fn default_t2_distribution() -> T2Distribution {
    T2Distribution::from_median_and_quantile(DEFAULT_T2_MEDIAN_US, DEFAULT_T2_P90_US, 0.9)
        .expect("default parameters are valid")
}

/// Fraction of holes with two or more NVs whose closest pair is strongly
/// coupled. Every NV in such a hole draws its own T₂ and the pair takes the
/// smaller one.
pub fn strong_pair_yield(reports: &[SpotReport], t2: &T2Distribution, seed: u64) -> Result<f64> {
    strong_pair_yield_with(reports, t2, seed, &angular_factor)
}

/// [`strong_pair_yield`] with a caller-supplied angular model.
pub fn strong_pair_yield_with(
    reports: &[SpotReport],
    t2: &T2Distribution,
    seed: u64,
    angular: &dyn Fn(f64) -> f64,
) -> Result<f64> {
    if reports.is_empty() {
        return Err(invalid("reports", "no spot reports"));
    }
    let mut holes = 0usize;
    let mut strong = 0usize;
    for rep in reports {
        let sites = &rep.nv_sites;
        let Some((i, j)) = closest_pair(sites) else { continue };
        let mut rng = substream(seed, domain::PAIR_YIELD, rep.hole_ix as u64);
        let draws: Vec<f64> = sites.iter().map(|_| t2.sample(&mut rng)).collect();
        let pair = pair_report(sites, i, j, angular)?;
        holes += 1;
        if strongly_coupled(pair.nu_dip, draws[i].min(draws[j])) {
            strong += 1;
        }
    }
    if holes == 0 {
        return Err(Error::NoPairs);
    }
    Ok(strong as f64 / holes as f64)
}

/// `k / dose`: T₂ in μs for `k` in μs·ions/cm².
pub fn t2_dose_scaling(dose: f64, k: f64) -> Result<f64> {
    if !(dose > 0.0) {
        return Err(invalid("dose", "must be positive"));
    }
    Ok(k / dose)
}

/// The `k` that makes [`t2_dose_scaling`] return `t2` at `dose`.
pub fn calibrate_t2_constant(dose: f64, t2: f64) -> Result<f64> {
    if !(dose > 0.0) {
        return Err(invalid("dose", "must be positive"));
    }
    if !(t2 > 0.0) {
        return Err(invalid("t2", "must be positive"));
    }
    Ok(t2 * dose)
}
