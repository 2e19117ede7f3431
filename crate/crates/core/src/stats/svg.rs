//! Static SVG renderings: density heatmaps and lateral scatter plots.

use std::fmt::Write;

use super::kde::DensityGrid;
use crate::mask::Point2;

const SIZE: f64 = 400.0;

/// Heatmap with one rectangle per grid node, white to dark blue.
pub fn heatmap(grid: &DensityGrid) -> String {
    let g = &grid.grid;
    let max = grid.values.iter().copied().fold(0.0, f64::max);
    let cw = SIZE / g.nx as f64;
    let ch = SIZE / g.ny as f64;
    let mut s = header(&format!(
        "density, bandwidth {:.3} nm, spacing {:.3} nm",
        grid.bandwidth, g.spacing
    ));
    for j in 0..g.ny {
        for i in 0..g.nx {
            let t = if max > 0.0 { grid.at(i, j) / max } else { 0.0 };
            // y grows upward in the plot
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                i as f64 * cw,
                SIZE - (j + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05,
                color(t)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Scatter plot of lateral positions within a square of side `extent`
/// centred on `center`.
pub fn scatter(points: &[Point2], center: Point2, extent: f64) -> String {
    let scale = SIZE / extent;
    let mut s = header(&format!("{} points, {extent} nm field", points.len()));
    for p in points {
        let x = (p[0] - center[0]) * scale + 0.5 * SIZE;
        let y = 0.5 * SIZE - (p[1] - center[1]) * scale;
        if (0.0..=SIZE).contains(&x) && (0.0..=SIZE).contains(&y) {
            let _ = writeln!(s, r##"<circle cx="{x:.2}" cy="{y:.2}" r="1.5" fill="#1f3b73"/>"##);
        }
    }
    s.push_str("</svg>\n");
    s
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n<title>{title}</title>\n<rect width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\"/>\n"
    )
}

fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(255.0, 8.0), lerp(255.0, 48.0), lerp(255.0, 107.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{kde2d, Bandwidth, GridSpec};

    #[test]
    fn heatmap_has_one_rect_per_node() {
        let grid = GridSpec::centered([0.0, 0.0], 10.0, 5).unwrap();
        let d = kde2d(&[[0.0, 0.0]], &grid, Bandwidth::Fixed(2.0)).unwrap();
        let svg = heatmap(&d);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        // background plus 25 cells
        assert_eq!(svg.matches("<rect").count(), 26);
    }

    #[test]
    fn scatter_clips_to_field() {
        let svg = scatter(&[[0.0, 0.0], [100.0, 0.0]], [0.0, 0.0], 20.0);
        assert_eq!(svg.matches("<circle").count(), 1);
    }
}
