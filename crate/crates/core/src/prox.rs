//! Elementwise proximal maps for the L¹ and L₀ penalties.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold rule for the L₀ proximal map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HardShrinkMode {
    /// Threshold `sqrt(2 * beta/rho)`, the exact minimizer of
    /// `beta/rho * [t != 0] + ½(t - x)²`.
    #[default]
    ExactProx,
    /// Threshold `beta/rho` as a raw value.
    PaperLiteral,
}

impl HardShrinkMode {
    /// Magnitude at or below which inputs are zeroed.
    #[inline]
    pub fn threshold(self, beta_over_rho: f64) -> f64 {
        match self {
            HardShrinkMode::ExactProx => (2.0 * beta_over_rho).sqrt(),
            HardShrinkMode::PaperLiteral => beta_over_rho,
        }
    }
}

fn check_param(name: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "{name} must be a finite nonnegative number, got {value}"
        )))
    }
}

/// `sgn(x) * max(|x| - tau, 0)`.
pub fn soft_shrink(x: f64, tau: f64) -> Result<f64> {
    check_param("soft-shrink threshold", tau)?;
    Ok(soft_shrink_unchecked(x, tau))
}

/// L₀ proximal map: zero when `|x|` does not exceed the mode's threshold.
pub fn hard_shrink(x: f64, beta_over_rho: f64, mode: HardShrinkMode) -> Result<f64> {
    check_param("hard-shrink parameter", beta_over_rho)?;
    Ok(hard_shrink_at(x, mode.threshold(beta_over_rho)))
}

#[inline]
pub(crate) fn soft_shrink_unchecked(x: f64, tau: f64) -> f64 {
    let mag = x.abs() - tau;
    if mag > 0.0 {
        mag.copysign(x)
    } else {
        0.0
    }
}

/// Hard shrinkage against a precomputed threshold; ties map to zero.
#[inline]
pub(crate) fn hard_shrink_at(x: f64, threshold: f64) -> f64 {
    if x.abs() > threshold {
        x
    } else {
        0.0
    }
}
