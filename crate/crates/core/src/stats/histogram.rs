use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result, Side};

/// Uniform-width histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Left edge of the first bin.
    pub start: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(start: f64, bin_width: f64, counts: Vec<u64>) -> Result<Self> {
        if !(bin_width > 0.0) || !start.is_finite() {
            return Err(invalid("bin_width", "must be positive"));
        }
        if counts.is_empty() {
            return Err(invalid("counts", "need at least one bin"));
        }
        Ok(Self {
            start,
            bin_width,
            counts,
        })
    }

    /// Bin `samples` on a grid aligned to multiples of `bin_width`, with one
    /// empty bin of padding on either side.
    pub fn from_samples(samples: &[f64], bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0) {
            return Err(invalid("bin_width", "must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::TooFewPoints { needed: 1, got: 0 });
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(invalid("samples", "must be finite"));
        }
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let first = (lo / bin_width).floor() as i64 - 1;
        let last = (hi / bin_width).floor() as i64 + 1;
        let mut counts = vec![0u64; (last - first + 1) as usize];
        for &x in samples {
            let k = ((x / bin_width).floor() as i64 - first) as usize;
            counts[k] += 1;
        }
        Self::new(first as f64 * bin_width, bin_width, counts)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn center(&self, k: usize) -> f64 {
        self.start + (k as f64 + 0.5) * self.bin_width
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.counts.len())
            .map(|k| self.start + k as f64 * self.bin_width)
            .collect()
    }

    /// Full width at half maximum around the tallest bin (the first one when
    /// several share the maximum), with half-maximum crossings interpolated
    /// linearly between bin centres.
    pub fn fwhm(&self) -> Result<f64> {
        let max = *self.counts.iter().max().unwrap_or(&0);
        if max == 0 {
            return Err(invalid("histogram", "all bins are empty"));
        }
        let peak = self.counts.iter().position(|&c| c == max).unwrap_or(0);
        let mut plateau_end = peak;
        while plateau_end + 1 < self.counts.len() && self.counts[plateau_end + 1] == max {
            plateau_end += 1;
        }
        let half = 0.5 * max as f64;
        let y = |k: usize| self.counts[k] as f64;
        let cross = |a: usize, b: usize| {
            // a is at or below half, b above
            self.center(a) + (half - y(a)) / (y(b) - y(a)) * (self.center(b) - self.center(a))
        };
        let left = (0..peak)
            .rev()
            .find(|&k| y(k) <= half)
            .map(|k| cross(k, k + 1))
            .ok_or(Error::HalfOpenDistribution(Side::Left))?;
        let right = (plateau_end + 1..self.counts.len())
            .find(|&k| y(k) <= half)
            .map(|k| cross(k, k - 1))
            .ok_or(Error::HalfOpenDistribution(Side::Right))?;
        Ok(right - left)
    }

    /// `bin_center_nm,count` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bin_center_nm", "count"])?;
        for (k, c) in self.counts.iter().enumerate() {
            w.write_record([self.center(k).to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Samples with their histogram and its FWHM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceDistribution {
    pub samples: Vec<f64>,
    pub histogram: Histogram,
    pub fwhm: f64,
}

impl DistanceDistribution {
    pub fn new(samples: Vec<f64>, bin_width: f64) -> Result<Self> {
        let histogram = Histogram::from_samples(&samples, bin_width)?;
        let fwhm = histogram.fwhm()?;
        Ok(Self {
            samples,
            histogram,
            fwhm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{domain, substream};
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn counts_sum_to_samples() {
        let h = Histogram::from_samples(&[0.1, 0.2, 0.9, 1.0, 3.7], 0.5).unwrap();
        assert_eq!(h.total(), 5);
        assert_eq!(h.counts[0], 0);
        assert_eq!(*h.counts.last().unwrap(), 0);
        assert_eq!(h.edges().len(), h.len() + 1);
    }

    #[test]
    fn single_occupied_bin_has_bin_width() {
        let h = Histogram::from_samples(&[2.3; 10], 0.25).unwrap();
        assert!((h.fwhm().unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn gaussian_fwhm() {
        let mut rng = substream(1, domain::SYNTH, 0);
        let s: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let w = Histogram::from_samples(&s, 0.05).unwrap().fwhm().unwrap();
        assert!((w - 2.3548).abs() < 0.1, "{w}");
    }

    #[test]
    fn half_open_sides() {
        let right_open = Histogram::new(0.0, 1.0, vec![0, 2, 10, 9]).unwrap();
        assert!(matches!(right_open.fwhm(), Err(Error::HalfOpenDistribution(Side::Right))));
        let left_open = Histogram::new(0.0, 1.0, vec![10, 8, 1]).unwrap();
        let err = left_open.fwhm().unwrap_err();
        assert!(err.to_string().contains("left"), "{err}");
    }

    #[test]
    fn triangle_interpolation() {
        // centres 0.5..4.5, half max 4 crossed midway on both sides
        let h = Histogram::new(0.0, 1.0, vec![0, 8, 8, 0]).unwrap();
        assert!((h.fwhm().unwrap() - 2.0).abs() < 1e-12);
        let h = Histogram::new(0.0, 1.0, vec![2, 6, 8, 6, 2]).unwrap();
        assert!((h.fwhm().unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn csv_header() {
        let h = Histogram::from_samples(&[1.0], 1.0).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("bin_center_nm,count\n0.5,0\n1.5,1\n"), "{text}");
    }
}
