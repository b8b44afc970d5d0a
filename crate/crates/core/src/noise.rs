//! Laplace samplers.
//!
//! Both samplers use inverse-CDF sampling from exactly one open-interval
//! uniform per draw, so an algorithm's random tape is a plain reproducible
//! stream and a sample can be recomputed from its uniform.
//!
//! Log conventions used by the parameter formulas elsewhere in the crate:
//! quantities that come from union bounds over powers of two (`log n`,
//! `log(2/δ)`) are base 2, while every noise width or threshold that must
//! match the Laplace tail law `Pr[|Lap(b)| ≥ t·b] = e^{-t}` uses `ln`.

use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale `b` of a zero-centred Laplace law, `b > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LaplaceScale(f64);

impl LaplaceScale {
    pub fn new(b: f64) -> Result<Self> {
        if b.is_finite() && b > 0.0 {
            Ok(Self(b))
        } else {
            Err(Error::param(format!("Laplace scale must be positive and finite, got {b}")))
        }
    }

    /// Scale `1/ε` of the Laplace mechanism for a sensitivity-1 quantity.
    pub fn for_epsilon(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
        }
        Self::new(1.0 / epsilon)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Inverse CDF of Laplace(0, b) at `u ∈ (0, 1)`.
pub fn laplace_from_uniform(scale: LaplaceScale, u: f64) -> f64 {
    let b = scale.0;
    if u < 0.5 {
        b * (2.0 * u).ln()
    } else {
        -b * (2.0 * (1.0 - u)).ln()
    }
}

pub fn laplace<R: Rng + ?Sized>(scale: LaplaceScale, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    laplace_from_uniform(scale, u)
}

fn check_bound(bound: f64) -> Result<()> {
    if bound.is_finite() && bound > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("truncation bound must be positive, got {bound}")))
    }
}

pub fn truncated_laplace_from_uniform(scale: LaplaceScale, bound: f64, u: f64) -> Result<f64> {
    check_bound(bound)?;
    Ok(laplace_from_uniform(scale, u).clamp(-bound, bound))
}

/// Laplace(0, b) clamped to `[-bound, bound]`; the clamped tails become point
/// masses at the bounds.
pub fn truncated_laplace<R: Rng + ?Sized>(scale: LaplaceScale, bound: f64, rng: &mut R) -> Result<f64> {
    check_bound(bound)?;
    let u: f64 = rng.sample(Open01);
    truncated_laplace_from_uniform(scale, bound, u)
}
