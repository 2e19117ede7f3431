//! ODMR spectra: synthesis from NV orientations and a bias field, and dip
//! counting.
//!
//! Only the secular Zeeman shift is modelled: each NV gives two Lorentzian
//! dips at `D ± γ·|B·n̂|`. Dips from different NVs multiply.

use serde::{Deserialize, Serialize};

use super::trace::OdmrSpectrum;
use crate::constants::{NV_GYROMAGNETIC_MHZ_PER_G, NV_ZERO_FIELD_SPLITTING_MHZ};
use crate::error::{invalid, Error, Result};
use crate::implant::NvAxis;

/// Field magnitude above which the first-order shift is not trusted, G.
pub const MAX_FIELD_GAUSS: f64 = 300.0;

/// `D ± 900` MHz in 0.25 MHz steps.
pub fn default_frequencies() -> Vec<f64> {
    (0..=7200)
        .map(|k| NV_ZERO_FIELD_SPLITTING_MHZ - 900.0 + 0.25 * k as f64)
        .collect()
}

/// Lower and upper resonance of one NV, MHz.
pub fn resonances(axis: NvAxis, b: [f64; 3]) -> [f64; 2] {
    let n = axis.direction();
    let b_par: f64 = (0..3).map(|k| b[k] * n[k]).sum::<f64>().abs();
    let shift = NV_GYROMAGNETIC_MHZ_PER_G * b_par;
    [NV_ZERO_FIELD_SPLITTING_MHZ - shift, NV_ZERO_FIELD_SPLITTING_MHZ + shift]
}

/// Spectrum on the default grid. `linewidth` is the full width at half
/// depth in MHz; `contrast[i]` is the fractional depth of NV `i`'s dips.
pub fn synth_odmr(axes: &[NvAxis], b: [f64; 3], linewidth: f64, contrast: &[f64]) -> Result<OdmrSpectrum> {
    synth_odmr_on(default_frequencies(), axes, b, linewidth, contrast)
}

pub fn synth_odmr_on(
    frequency: Vec<f64>,
    axes: &[NvAxis],
    b: [f64; 3],
    linewidth: f64,
    contrast: &[f64],
) -> Result<OdmrSpectrum> {
    let b_mag = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(b_mag < MAX_FIELD_GAUSS) {
        return Err(invalid("b", format!("|B| = {b_mag} G, must stay below {MAX_FIELD_GAUSS} G")));
    }
    if !(linewidth > 0.0) {
        return Err(invalid("linewidth", "must be positive"));
    }
    if contrast.len() != axes.len() {
        return Err(invalid("contrast", format!("{} values for {} NVs", contrast.len(), axes.len())));
    }
    if contrast.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(invalid("contrast", "each value must lie in [0, 1]"));
    }
    let g2 = (linewidth / 2.0).powi(2);
    let lines: Vec<(f64, f64)> = axes
        .iter()
        .zip(contrast)
        .flat_map(|(ax, c)| resonances(*ax, b).map(|f0| (f0, *c)))
        .collect();
    let signal = frequency
        .iter()
        .map(|f| {
            lines
                .iter()
                .map(|(f0, c)| 1.0 - c * g2 / ((f - f0).powi(2) + g2))
                .product()
        })
        .collect();
    OdmrSpectrum::new(frequency, signal)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipCount {
    pub dip_count: usize,
    pub nv_estimate: usize,
    /// Accepted dip positions, MHz, increasing.
    pub dips: Vec<f64>,
}

/// Local minima with at least `prominence` depth relative to the higher of
/// their two bases, thinned greedily by prominence so that no two accepted
/// dips lie closer than `min_separation` MHz.
pub fn count_odmr_dips(spectrum: &OdmrSpectrum, prominence: f64, min_separation: f64) -> Result<DipCount> {
    if !(prominence > 0.0) {
        return Err(invalid("prominence", "must be positive"));
    }
    if !(min_separation >= 0.0) {
        return Err(invalid("min_separation", "must be non-negative"));
    }
    let y: Vec<f64> = spectrum.contrast.iter().map(|c| -c).collect();
    if spectrum.contrast.iter().all(|c| *c == 0.0) {
        return Err(Error::SaturatedSpectrum);
    }
    let f = &spectrum.frequency;
    let mut found: Vec<(usize, f64)> = local_maxima(&y)
        .into_iter()
        .map(|i| (i, peak_prominence(&y, i)))
        .filter(|(_, p)| *p >= prominence)
        .collect();
    found.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut kept: Vec<usize> = Vec::new();
    for (i, _) in found {
        if kept.iter().all(|&k| (f[k] - f[i]).abs() >= min_separation) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    Ok(DipCount {
        dip_count: kept.len(),
        nv_estimate: kept.len().div_ceil(2),
        dips: kept.iter().map(|&i| f[i]).collect(),
    })
}

/// Strict interior maxima; a flat top counts once, at its first sample.
fn local_maxima(y: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < y.len() {
        if y[i] > y[i - 1] {
            let mut j = i;
            while j + 1 < y.len() && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < y.len() && y[j + 1] < y[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Height above the higher of the lowest points reached on each side before
/// the signal climbs past the peak (or the edge is hit).
fn peak_prominence(y: &[f64], i: usize) -> f64 {
    let h = y[i];
    let mut left = h;
    for k in (0..i).rev() {
        if y[k] > h {
            break;
        }
        left = left.min(y[k]);
    }
    let mut right = h;
    for &v in &y[i + 1..] {
        if v > h {
            break;
        }
        right = right.min(v);
    }
    h - left.max(right)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_field_positions() {
        let n = NvAxis::A111.direction();
        let b = [70.0 * n[0], 70.0 * n[1], 70.0 * n[2]];
        let [lo, hi] = resonances(NvAxis::A111, b);
        assert!((lo - 2674.0).abs() < 1e-9 && (hi - 3066.0).abs() < 1e-9);
        let s = synth_odmr(&[NvAxis::A111], b, 5.0, &[0.2]).unwrap();
        let d = count_odmr_dips(&s, 0.05, 10.0).unwrap();
        assert_eq!((d.dip_count, d.nv_estimate), (2, 1));
        assert_eq!(d.dips, vec![2674.0, 3066.0]);
    }

    #[test]
    fn zero_field_is_one_dip() {
        let s = synth_odmr(&[NvAxis::A111], [0.0; 3], 5.0, &[0.2]).unwrap();
        let d = count_odmr_dips(&s, 0.05, 10.0).unwrap();
        assert_eq!(d.dips, vec![2870.0]);
        let mid = s.frequency.iter().position(|f| *f == 2870.0).unwrap();
        assert!((s.contrast[mid] - 0.64).abs() < 1e-12);
    }

    #[test]
    fn three_axes_six_dips() {
        let b = [60.0, 25.0, -10.0];
        let s = synth_odmr(&[NvAxis::A111, NvAxis::A1m1m1, NvAxis::Am11m1], b, 4.0, &[0.15; 3]).unwrap();
        assert_eq!(count_odmr_dips(&s, 0.05, 4.0).unwrap().nv_estimate, 3);
    }

    #[test]
    fn flat_and_saturated() {
        let f = default_frequencies();
        let flat = OdmrSpectrum::new(f.clone(), vec![1.0; f.len()]).unwrap();
        assert_eq!(count_odmr_dips(&flat, 0.01, 1.0).unwrap().dip_count, 0);
        let zero = OdmrSpectrum::new(f.clone(), vec![0.0; f.len()]).unwrap();
        assert!(matches!(count_odmr_dips(&zero, 0.01, 1.0), Err(Error::SaturatedSpectrum)));
        assert!(count_odmr_dips(&flat, 0.0, 1.0).is_err());
        assert!(synth_odmr(&[NvAxis::A111], [300.0, 0.0, 0.0], 5.0, &[0.2]).is_err());
    }

    #[test]
    fn plateau_counts_once() {
        let y = [0.0, 1.0, 1.0, 1.0, 0.0, 2.0, 0.5];
        assert_eq!(local_maxima(&y), vec![1, 5]);
        assert_eq!(peak_prominence(&y, 1), 1.0);
        assert_eq!(peak_prominence(&y, 5), 1.5);
    }
}
