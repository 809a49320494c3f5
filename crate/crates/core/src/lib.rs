//! Numerical laboratory for the radial focusing energy-critical wave equation
//! ψ_tt − Δψ − ψ⁵ = 0 in ℝ³ near the soliton family φ(·,a).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod error;
pub mod experiments;
pub mod families;
pub mod grid;
pub mod modulation;
pub mod norms;
pub mod propagators;
pub mod soliton;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{RadialField, RadialGrid, WeightedKind};
pub use soliton::SolitonScale;
pub use spectral::{ground_state, ground_state_at, SpectralData};
