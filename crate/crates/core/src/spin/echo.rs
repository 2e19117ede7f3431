//! Hahn-echo decay fits: `A·exp[−(t/T₂)^p] + B` with `p ∈ [0.5, 3]`.

use serde::{Deserialize, Serialize};

use super::lm::{minimize, LmOptions, LmResult};
use super::trace::EchoTrace;
use crate::error::{Error, Result};

pub const MIN_STRETCH: f64 = 0.5;
pub const MAX_STRETCH: f64 = 3.0;

pub fn stretched_exponential(t: f64, amplitude: f64, t2: f64, p: f64, offset: f64) -> f64 {
    amplitude * (-(t / t2).powf(p)).exp() + offset
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoFit {
    /// μs
    pub t2: f64,
    pub p: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// Sum of squared residuals.
    pub residual: f64,
}

fn stretch(theta: f64) -> f64 {
    MIN_STRETCH + (MAX_STRETCH - MIN_STRETCH) / (1.0 + (-theta).exp())
}

fn stretch_inv(p: f64) -> f64 {
    let s = (p - MIN_STRETCH) / (MAX_STRETCH - MIN_STRETCH);
    (s / (1.0 - s)).ln()
}

/// Fit from a small deterministic grid of starting points.
///
/// Fails with [`Error::NoDecay`] on a constant trace or when the trace ends
/// before twice the fitted T₂.
pub fn fit_hahn_echo(trace: &EchoTrace) -> Result<EchoFit> {
    let (t, y) = (&trace.t, &trace.coherence);
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        return Err(Error::NoDecay(format!("coherence is constant at {hi}")));
    }
    let t_max = t.iter().cloned().fold(0.0, f64::max);
    // offset from the tail, amplitude from the head, T₂ from the 1/e crossing
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&i, &j| t[i].total_cmp(&t[j]));
    let k = (t.len() / 10).max(1);
    let b0 = order[t.len() - k..].iter().map(|&i| y[i]).sum::<f64>() / k as f64;
    let a0 = y[order[0]] - b0;
    let t2_0 = order
        .iter()
        .find(|&&i| (y[i] - b0).abs() <= a0.abs() / std::f64::consts::E)
        .map(|&i| t[i])
        .filter(|v| *v > 0.0)
        .unwrap_or(t_max / 3.0);

    let residuals = |q: &[f64], r: &mut [f64]| {
        let (t2, p) = (q[1].exp(), stretch(q[2]));
        for (k, (ti, yi)) in t.iter().zip(y).enumerate() {
            r[k] = stretched_exponential(*ti, q[0], t2, p, q[3]) - yi;
        }
    };
    let opts = LmOptions::default();
    let mut best: Option<LmResult> = None;
    for scale in [1.0, 0.5, 2.0] {
        for p in [1.0, 0.7, 1.5, 2.5] {
            let x0 = [a0, (t2_0 * scale).ln(), stretch_inv(p), b0];
            let res = minimize(residuals, t.len(), &x0, &opts);
            if res.cost.is_finite() && best.as_ref().is_none_or(|b| res.cost < b.cost) {
                best = Some(res);
            }
        }
    }
    let best = best.ok_or(Error::FitDidNotConverge { best_residual: f64::NAN })?;
    if !best.converged || best.params.iter().any(|p| !p.is_finite()) {
        return Err(Error::FitDidNotConverge { best_residual: best.cost });
    }
    let q = &best.params;
    let fit = EchoFit {
        t2: q[1].exp(),
        p: stretch(q[2]),
        amplitude: q[0],
        offset: q[3],
        residual: best.cost,
    };
    if t_max < 2.0 * fit.t2 {
        return Err(Error::NoDecay(format!(
            "trace ends at {t_max} μs, before twice the fitted T2 of {:.3} μs",
            fit.t2
        )));
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(t2: f64, p: f64) -> EchoTrace {
        let t: Vec<f64> = (0..=200).map(|k| k as f64 * 0.1).collect();
        let c = t.iter().map(|t| stretched_exponential(*t, 1.0, t2, p, 0.0)).collect();
        EchoTrace::new(t, c).unwrap()
    }

    #[test]
    fn noiseless_round_trip() {
        let f = fit_hahn_echo(&synth(4.5, 1.5)).unwrap();
        assert!((f.t2 / 4.5 - 1.0).abs() < 1e-6, "{f:?}");
        assert!((f.p / 1.5 - 1.0).abs() < 1e-6, "{f:?}");
    }

    #[test]
    fn constant_and_short_traces() {
        let t: Vec<f64> = (0..50).map(|k| k as f64).collect();
        let flat = EchoTrace::new(t.clone(), vec![0.8; t.len()]).unwrap();
        assert!(matches!(fit_hahn_echo(&flat), Err(Error::NoDecay(_))));
        let short: Vec<f64> = (0..=20).map(|k| k as f64 * 0.2).collect();
        let c = short.iter().map(|t| stretched_exponential(*t, 1.0, 4.5, 1.5, 0.0)).collect();
        assert!(matches!(fit_hahn_echo(&EchoTrace::new(short, c).unwrap()), Err(Error::NoDecay(_))));
    }

    #[test]
    fn stretch_map_round_trips() {
        for p in [0.6, 1.0, 2.9] {
            assert!((stretch(stretch_inv(p)) - p).abs() < 1e-12);
        }
    }
}
