//! Spatial statistics of implanted defects and photoluminescence ratios.

mod histogram;
mod kde;
mod kdtree;
pub mod svg;

pub use histogram::{DistanceDistribution, Histogram};
pub use kde::{kde2d, scott_bandwidth, Bandwidth, DensityGrid, GridSpec};
pub use kdtree::{lateral_nearest_neighbor_distances, nearest_neighbor_distances, squared_distance, KdTree};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// NV count implied by a PL rate and the single-emitter rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlEstimate {
    pub raw: f64,
    pub rounded: u64,
}

/// Average count rate of a single NV under the reference excitation, kcps.
pub const SINGLE_NV_PL_KCPS: f64 = 60.0;

pub fn estimate_nv_count_from_pl(total_pl: f64, single_nv_pl: f64) -> Result<PlEstimate> {
    if !(single_nv_pl > 0.0) {
        return Err(invalid("single_nv_pl", "must be positive"));
    }
    if !(total_pl >= 0.0) {
        return Err(invalid("total_pl", "must be non-negative"));
    }
    let raw = total_pl / single_nv_pl;
    Ok(PlEstimate {
        raw,
        rounded: raw.round() as u64,
    })
}

/// Open-area ratio inferred from PL of a masked region over a bare one.
pub fn measured_open_ratio(pl_masked: f64, pl_bare: f64) -> Result<f64> {
    if !(pl_bare > 0.0) {
        return Err(invalid("pl_bare", "must be positive"));
    }
    if !(pl_masked >= 0.0) {
        return Err(invalid("pl_masked", "must be non-negative"));
    }
    Ok(pl_masked / pl_bare)
}
