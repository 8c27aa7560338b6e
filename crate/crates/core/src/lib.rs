//! Martingale Benamou–Brenier problems through the Bass functional.
//!
//! The crate minimizes `V(α) = MCov(α∗γ, ν) − MCov(α, μ)` over discrete
//! measures, turns the minimizer into a simulable Bass martingale and
//! cross-checks the result against duality, rate and convexity properties.

pub mod error;
pub mod measures;
pub mod ot;
pub mod bass;
pub mod martingale;
pub mod duality;
pub mod geometry;

pub use error::{Error, Result};
