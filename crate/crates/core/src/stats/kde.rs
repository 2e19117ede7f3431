use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mask::Point2;

/// Grid nodes at `origin + (i, j) * spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Point2,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(origin: Point2, spacing: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(invalid("spacing", "must be positive"));
        }
        if nx == 0 || ny == 0 {
            return Err(invalid("grid", "needs at least one node per axis"));
        }
        Ok(Self { origin, spacing, nx, ny })
    }

    /// Square grid of `n × n` nodes centred on `center` spanning `extent`.
    pub fn centered(center: Point2, extent: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid("grid", "needs at least two nodes per axis"));
        }
        let spacing = extent / (n - 1) as f64;
        let half = 0.5 * extent;
        Self::new([center[0] - half, center[1] - half], spacing, n, n)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.origin[0] + i as f64 * self.spacing
    }

    pub fn y(&self, j: usize) -> f64 {
        self.origin[1] + j as f64 * self.spacing
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing * self.spacing
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// σ n^(-1/6), σ the pooled per-axis standard deviation.
    Scott,
    Fixed(f64),
}

/// Kernel density on a lateral grid, normalized so that the Riemann sum is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub grid: GridSpec,
    pub bandwidth: f64,
    /// Row-major (x fastest), per nm².
    pub values: Vec<f64>,
    /// Fraction of the kernel mass that fell on the grid before normalization.
    pub captured_mass: f64,
    /// Set when less than 99% of the kernel mass fell on the grid.
    pub coverage_warning: bool,
}

impl DensityGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// Long-form `x_nm,y_nm,density`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x_nm", "y_nm", "density"])?;
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                w.write_record([
                    self.grid.x(i).to_string(),
                    self.grid.y(j).to_string(),
                    self.at(i, j).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Scott's rule bandwidth for 2-D isotropic kernels.
pub fn scott_bandwidth(points: &[Point2]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    let n = points.len() as f64;
    let var = |k: usize| {
        let m = points.iter().map(|p| p[k]).sum::<f64>() / n;
        points.iter().map(|p| (p[k] - m).powi(2)).sum::<f64>() / (n - 1.0)
    };
    let sigma = (0.5 * (var(0) + var(1))).sqrt();
    if !(sigma > 0.0) {
        return Err(invalid("bandwidth", "Scott's rule needs points with nonzero spread"));
    }
    Ok(sigma * n.powf(-1.0 / 6.0))
}

/// Isotropic Gaussian kernel density estimate evaluated at the grid nodes.
pub fn kde2d(points: &[Point2], grid: &GridSpec, bandwidth: Bandwidth) -> Result<DensityGrid> {
    if points.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    let h = match bandwidth {
        Bandwidth::Scott => scott_bandwidth(points)?,
        Bandwidth::Fixed(h) if h > 0.0 => h,
        Bandwidth::Fixed(_) => return Err(invalid("bandwidth", "must be positive")),
    };
    let inv = -0.5 / (h * h);
    let norm = 1.0 / (2.0 * PI * h * h * points.len() as f64);
    // the kernel factorizes into x and y parts
    let gx: Vec<Vec<f64>> = points
        .iter()
        .map(|p| (0..grid.nx).map(|i| ((grid.x(i) - p[0]).powi(2) * inv).exp()).collect())
        .collect();
    let mut values = vec![0.0; grid.nx * grid.ny];
    values.par_chunks_mut(grid.nx).enumerate().for_each(|(j, row)| {
        let y = grid.y(j);
        for (p, g) in points.iter().zip(&gx) {
            let wy = ((y - p[1]).powi(2) * inv).exp();
            if wy == 0.0 {
                continue;
            }
            for (v, wx) in row.iter_mut().zip(g) {
                *v += wx * wy;
            }
        }
        row.iter_mut().for_each(|v| *v *= norm);
    });
    let captured_mass = values.iter().sum::<f64>() * grid.cell_area();
    if captured_mass > 0.0 {
        values.iter_mut().for_each(|v| *v /= captured_mass);
    }
    Ok(DensityGrid {
        grid: *grid,
        bandwidth: h,
        values,
        captured_mass,
        coverage_warning: captured_mass < 0.99,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_is_a_gaussian() {
        let grid = GridSpec::centered([1.0, -2.0], 40.0, 161).unwrap();
        let h = 3.0;
        let d = kde2d(&[[1.0, -2.0]], &grid, Bandwidth::Fixed(h)).unwrap();
        assert!(!d.coverage_warning);
        for (i, j) in [(80, 80), (90, 70), (100, 80), (3, 150)] {
            let r2 = (grid.x(i) - 1.0).powi(2) + (grid.y(j) + 2.0).powi(2);
            let g = (-r2 / (2.0 * h * h)).exp() / (2.0 * PI * h * h);
            assert!((d.at(i, j) - g).abs() < 1e-6 * g.max(1e-12), "{} vs {g}", d.at(i, j));
        }
    }

    #[test]
    fn normalized() {
        let pts: Vec<Point2> = (0..50).map(|k| [(k as f64 * 0.37).sin() * 5.0, (k as f64 * 0.11).cos() * 4.0]).collect();
        let grid = GridSpec::centered([0.0, 0.0], 20.0, 41).unwrap();
        let d = kde2d(&pts, &grid, Bandwidth::Scott).unwrap();
        assert!((d.integral() - 1.0).abs() < 1e-3);
        assert!(d.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn narrow_grid_warns() {
        let grid = GridSpec::centered([0.0, 0.0], 2.0, 11).unwrap();
        let d = kde2d(&[[0.0, 0.0]], &grid, Bandwidth::Fixed(3.0)).unwrap();
        assert!(d.coverage_warning);
        assert!(d.captured_mass < 0.99);
    }

    #[test]
    fn duplicated_points_leave_density_unchanged() {
        let pts = vec![[0.0, 0.0], [2.0, 1.0], [-1.0, 3.0]];
        let doubled: Vec<Point2> = pts.iter().chain(&pts).copied().collect();
        let grid = GridSpec::centered([0.0, 1.0], 20.0, 21).unwrap();
        let a = kde2d(&pts, &grid, Bandwidth::Fixed(1.5)).unwrap();
        let b = kde2d(&doubled, &grid, Bandwidth::Fixed(1.5)).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-14 * x.abs().max(1e-300));
        }
    }

    #[test]
    fn scott_needs_spread() {
        assert!(scott_bandwidth(&[[1.0, 1.0], [1.0, 1.0]]).is_err());
        assert!(kde2d(&[[0.0, 0.0]], &GridSpec::centered([0.0, 0.0], 4.0, 5).unwrap(), Bandwidth::Scott).is_err());
    }
}
