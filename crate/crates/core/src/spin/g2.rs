//! Photon-autocorrelation fits and emitter counting.
//!
//! The model is the three-level form with one antibunching dip and one
//! bunching shoulder:
//! `g²(t) = 1 − c·[(1+a)·e^(−|t|/τ₁) − a·e^(−|t|/τ₂)]`, with `c = 1/N`
//! for `N` identical emitters, so `g²(0) = 1 − c`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lm::{minimize, LmOptions};
use super::trace::G2Trace;
use crate::error::{invalid, Error, Result};
use crate::rng::{domain, substream};

/// Random restarts on top of the data-derived start.
const RESTARTS: u64 = 12;

/// `g²(t)` for `n` emitters (`n` may be fractional).
pub fn g2_model(t: f64, n: f64, tau1: f64, tau2: f64, a: f64) -> f64 {
    model(t, 1.0 / n, tau1, tau2, a)
}

fn model(t: f64, c: f64, tau1: f64, tau2: f64, a: f64) -> f64 {
    let t = t.abs();
    1.0 - c * ((1.0 + a) * (-t / tau1).exp() - a * (-t / tau2).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Fit {
    pub g2_0: f64,
    /// ns
    pub tau1: f64,
    /// ns
    pub tau2: f64,
    pub a: f64,
    /// Sum of squared (weighted) residuals.
    pub residual: f64,
}

impl G2Fit {
    pub fn emitters(&self) -> EmitterCount {
        count_emitters(self.g2_0)
    }
}

/// Emitter number read off `g²(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmitterCount {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "3")]
    Three,
    #[serde(rename = "indeterminate")]
    Indeterminate,
}

impl EmitterCount {
    pub fn count(self) -> Option<u32> {
        match self {
            Self::One => Some(1),
            Self::Two => Some(2),
            Self::Three => Some(3),
            Self::Indeterminate => None,
        }
    }
}

impl std::fmt::Display for EmitterCount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.count() {
            Some(n) => write!(f, "{n}"),
            None => f.write_str("indeterminate"),
        }
    }
}

/// Thresholds 0.5, 0.66 and 0.75. A value on a boundary goes to the lower
/// class, except 0.75 itself, which is indeterminate. Negative values
/// (possible from a noisy fit) count as one emitter; NaN is indeterminate.
pub fn count_emitters(g2_0: f64) -> EmitterCount {
    if g2_0.is_nan() {
        EmitterCount::Indeterminate
    } else if g2_0 <= 0.5 {
        EmitterCount::One
    } else if g2_0 <= 0.66 {
        EmitterCount::Two
    } else if g2_0 < 0.75 {
        EmitterCount::Three
    } else {
        EmitterCount::Indeterminate
    }
}

/// Least-squares fit of the three-level model with a free amplitude.
///
/// Starts from estimates read off the trace, then from `RESTARTS` random
/// perturbations drawn from `seed`; the lowest residual wins.
pub fn fit_g2(trace: &G2Trace, seed: u64) -> Result<G2Fit> {
    let (c0, tau0) = initial_guess(trace);
    let t_max = trace.t.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if t_max < 5.0 * tau0 {
        return Err(invalid(
            "trace",
            format!("delays reach {t_max} ns, less than five times the dip width estimate {tau0:.3} ns"),
        ));
    }
    let weights: Vec<f64> = match &trace.sigma {
        Some(s) => s.iter().map(|s| 1.0 / s).collect(),
        None => vec![1.0; trace.t.len()],
    };
    // p = [c, ln τ₁, ln τ₂, s] with a = s²
    let residuals = |p: &[f64], r: &mut [f64]| {
        let (c, t1, t2, a) = (p[0], p[1].exp(), p[2].exp(), p[3] * p[3]);
        for (k, (t, y)) in trace.t.iter().zip(&trace.g2).enumerate() {
            r[k] = (model(*t, c, t1, t2, a) - y) * weights[k];
        }
    };
    let mut starts = vec![[c0, tau0.ln(), (10.0 * tau0).ln(), 0.3]];
    let mut rng = substream(seed, domain::FIT_RESTART, 0);
    for _ in 0..RESTARTS {
        let t1 = tau0 * 10f64.powf(rng.random_range(-0.5..0.5));
        let t2 = t1 * 10f64.powf(rng.random_range(0.3..2.0));
        starts.push([c0, t1.ln(), t2.ln(), rng.random_range(0.0..1.0)]);
    }
    let opts = LmOptions::default();
    let mut best: Option<super::lm::LmResult> = None;
    for x0 in &starts {
        let res = minimize(residuals, trace.t.len(), x0, &opts);
        if res.cost.is_finite() && best.as_ref().is_none_or(|b| res.cost < b.cost) {
            best = Some(res);
        }
    }
    let best = best.ok_or(Error::FitDidNotConverge { best_residual: f64::NAN })?;
    if !best.converged || best.params.iter().any(|p| !p.is_finite()) {
        return Err(Error::FitDidNotConverge { best_residual: best.cost });
    }
    let p = &best.params;
    if t_max < 5.0 * p[1].exp() {
        return Err(invalid(
            "trace",
            format!("delays reach {t_max} ns, less than five times the fitted tau1 {:.3} ns", p[1].exp()),
        ));
    }
    Ok(G2Fit {
        g2_0: 1.0 - p[0],
        tau1: p[1].exp(),
        tau2: p[2].exp(),
        a: p[3] * p[3],
        residual: best.cost,
    })
}

/// Dip depth from the bins nearest zero delay, width from where the dip
/// recovers halfway.
fn initial_guess(trace: &G2Trace) -> (f64, f64) {
    let mut idx: Vec<usize> = (0..trace.t.len()).collect();
    idx.sort_by(|&i, &j| trace.t[i].abs().total_cmp(&trace.t[j].abs()));
    let near = &idx[..idx.len().min(3)];
    let g0 = near.iter().map(|&i| trace.g2[i]).sum::<f64>() / near.len() as f64;
    let c0 = (1.0 - g0).clamp(0.05, 1.0);
    let half = 1.0 - c0 / 2.0;
    let step = trace.t[idx[1]].abs().max(trace.t[idx[0]].abs()).max(1e-9);
    let tau = idx
        .iter()
        .find(|&&i| trace.g2[i] >= half && trace.t[i].abs() > 0.0)
        .map(|&i| trace.t[i].abs() / std::f64::consts::LN_2)
        .unwrap_or(step);
    (c0, tau.max(step))
}
