use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoundingBox, ScalarGrid};
use crate::preprocess::NormalizedMap;

/// Default noise floor in normalized units.
pub const DEFAULT_NOISE_FLOOR: f32 = 0.1;

/// What the model dropped (omissions) and invented (additions).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMaps {
    pub omissions: ScalarGrid,
    pub additions: ScalarGrid,
    pub noise_floor: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualMass {
    pub omissions: f64,
    pub additions: f64,
}

/// Positive parts of `x - x_hat` and `x_hat - x`, zeroed below `noise_floor`.
pub fn residual_maps(x: &NormalizedMap, x_hat: &NormalizedMap, noise_floor: f32) -> Result<ResidualMaps> {
    if x.dims() != x_hat.dims() {
        return Err(Error::DimsMismatch { what: "residual maps", expected: x.dims(), actual: x_hat.dims() });
    }
    let keep = |v: f32| if v >= noise_floor && v > 0.0 { v } else { 0.0 };
    let (a, b) = (x.grid().data(), x_hat.grid().data());
    let om = a.iter().zip(b).map(|(&p, &q)| keep(p - q)).collect();
    let ad = a.iter().zip(b).map(|(&p, &q)| keep(q - p)).collect();
    Ok(ResidualMaps {
        omissions: x.grid().with_data(om),
        additions: x.grid().with_data(ad),
        noise_floor,
    })
}

impl ResidualMaps {
    pub fn mass(&self) -> ResidualMass {
        ResidualMass { omissions: self.omissions.sum(), additions: self.additions.sum() }
    }

    /// Fraction of the additions mass lying inside `bbox` (0 when there is none).
    pub fn additions_fraction_in(&self, bbox: &BoundingBox) -> f64 {
        let total = self.additions.sum();
        if total <= 0.0 {
            return 0.0;
        }
        let mut inside = 0.0;
        for (i, &v) in self.additions.data().iter().enumerate() {
            if v > 0.0 && bbox.contains(self.additions.coords(i)) {
                inside += v as f64;
            }
        }
        inside / total
    }
}
