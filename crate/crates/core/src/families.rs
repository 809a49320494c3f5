//! Smooth radial data families used by the experiments.

use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::soliton::phi_raw;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Indicator of the unit ball.
    Ball,
    /// Gaussian bump e^{−(r−1)²}.
    Bump,
    /// φ(·,1)⁵.
    Phi5,
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ball" => Ok(Family::Ball),
            "bump" => Ok(Family::Bump),
            "phi5" => Ok(Family::Phi5),
            other => Err(Error::Usage(format!("unknown data family `{other}`"))),
        }
    }
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Ball => "ball",
            Family::Bump => "bump",
            Family::Phi5 => "phi5",
        }
    }

    pub fn profile(self, grid: RadialGrid) -> RadialField {
        match self {
            Family::Ball => RadialField::from_fn(grid, |r| if r <= 1.0 + 1e-12 { 1.0 } else { 0.0 }),
            Family::Bump => gaussian(grid, 1.0, 1.0),
            Family::Phi5 => RadialField::from_fn(grid, |r| phi_raw(r, 1.0).powi(5)),
        }
    }
}

/// e^{−(r−c)²/σ²}.
pub fn gaussian(grid: RadialGrid, center: f64, width: f64) -> RadialField {
    RadialField::from_fn(grid, |r| (-((r - center) / width).powi(2)).exp())
}

/// Seeded smooth bumps with centres in [0, c_max] and widths in [w_min, w_max].
pub fn random_bumps(grid: RadialGrid, count: usize, seed: u64, c_max: f64, w_min: f64, w_max: f64) -> Vec<RadialField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let c = rng.gen_range(0.0..c_max);
            let w = rng.gen_range(w_min..w_max);
            let b = rng.gen_range(-0.5..0.5);
            RadialField::from_fn(grid, move |r| (-((r - c) / w).powi(2)).exp() * (1.0 + b * r / (1.0 + r)))
        })
        .collect()
}
