use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prox::HardShrinkMode;

/// Fidelity (texture) model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextureModel {
    /// `λ‖u − f‖₁`
    L1,
    /// `λ‖u − f‖₂²`
    L2,
    /// `λ‖u + div g − f‖₂² + γ‖g‖ₚᵖ`
    Gp,
    /// `λ‖f − u‖²_{H⁻¹}`
    Hinv,
}

impl TextureModel {
    pub fn name(self) -> &'static str {
        match self {
            TextureModel::L1 => "l1",
            TextureModel::L2 => "l2",
            TextureModel::Gp => "gp",
            TextureModel::Hinv => "hinv",
        }
    }
}

impl fmt::Display for TextureModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TextureModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(TextureModel::L1),
            "l2" => Ok(TextureModel::L2),
            "gp" => Ok(TextureModel::Gp),
            "hinv" => Ok(TextureModel::Hinv),
            other => Err(Error::Parameter(format!("unknown model '{other}'"))),
        }
    }
}

/// Exponent of the `G_p` texture penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GpExponent {
    /// `γ‖g‖₁`, handled with an extra splitting block.
    #[default]
    One,
    /// `γ‖g‖₂²`, solved in closed form.
    Two,
}

impl GpExponent {
    pub fn from_int(p: u32) -> Result<Self> {
        match p {
            1 => Ok(GpExponent::One),
            2 => Ok(GpExponent::Two),
            _ => Err(Error::Parameter(format!("G_p exponent must be 1 or 2, got {p}"))),
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            GpExponent::One => 1,
            GpExponent::Two => 2,
        }
    }
}

/// Which weight [`crate::metrics::match_str`] tunes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weight {
    Lambda,
    Alpha,
    Beta,
    Gamma,
}

impl FromStr for Weight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lambda" => Ok(Weight::Lambda),
            "alpha" => Ok(Weight::Alpha),
            "beta" => Ok(Weight::Beta),
            "gamma" => Ok(Weight::Gamma),
            other => Err(Error::Parameter(format!("unknown weight '{other}'"))),
        }
    }
}

/// Model selection, weights, penalties and stop criteria for one run.
///
/// Suitable weights for images normalized to `[0, 1]` with unit penalties
/// are roughly λ ∈ [1e-4, 1], α ∈ [1e-4, 0.1], β ∈ [1e-4, 0.1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeConfig {
    pub model: TextureModel,
    pub lambda: f64,
    pub alpha: f64,
    /// Weight of the L₀ term. Zero reduces the L¹ model to TV-L¹.
    pub beta: f64,
    /// `G_p` only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// `G_p` only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<GpExponent>,
    /// Order of the L₀-regularized differences (2 or 3).
    pub order: usize,
    /// Penalty of the fidelity split (L¹) or of the texture-field split
    /// (`G_p` with p = 1). Unused otherwise.
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    /// Stop when `‖uᵏ⁺¹ − uᵏ‖² / ‖uᵏ⁺¹‖² ≤ eps`.
    pub eps: f64,
    pub max_iters: usize,
    pub hard_shrink_mode: HardShrinkMode,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self {
            model: TextureModel::L1,
            lambda: 0.005,
            alpha: 0.006,
            beta: 0.001,
            gamma: None,
            p: None,
            order: 2,
            rho1: 1.0,
            rho2: 1.0,
            rho3: 1.0,
            eps: 1e-8,
            max_iters: 100,
            hard_shrink_mode: HardShrinkMode::ExactProx,
        }
    }
}

impl DecomposeConfig {
    pub fn l1(lambda: f64, alpha: f64, beta: f64) -> Self {
        Self {
            lambda,
            alpha,
            beta,
            ..Self::default()
        }
    }

    pub fn l2(lambda: f64, alpha: f64, beta: f64) -> Self {
        Self {
            model: TextureModel::L2,
            ..Self::l1(lambda, alpha, beta)
        }
    }

    pub fn gp(lambda: f64, alpha: f64, beta: f64, gamma: f64, p: GpExponent) -> Self {
        Self {
            model: TextureModel::Gp,
            gamma: Some(gamma),
            p: Some(p),
            ..Self::l1(lambda, alpha, beta)
        }
    }

    pub fn hinv(lambda: f64, alpha: f64, beta: f64) -> Self {
        Self {
            model: TextureModel::Hinv,
            ..Self::l1(lambda, alpha, beta)
        }
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn weight(&self, which: Weight) -> Option<f64> {
        match which {
            Weight::Lambda => Some(self.lambda),
            Weight::Alpha => Some(self.alpha),
            Weight::Beta => Some(self.beta),
            Weight::Gamma => self.gamma,
        }
    }

    pub fn set_weight(&mut self, which: Weight, value: f64) {
        match which {
            Weight::Lambda => self.lambda = value,
            Weight::Alpha => self.alpha = value,
            Weight::Beta => self.beta = value,
            Weight::Gamma => self.gamma = Some(value),
        }
    }

    pub fn gp_exponent(&self) -> GpExponent {
        self.p.unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("alpha", self.alpha)?;
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Parameter(format!(
                "beta must be nonnegative, got {}",
                self.beta
            )));
        }
        positive("rho1", self.rho1)?;
        positive("rho2", self.rho2)?;
        positive("rho3", self.rho3)?;
        positive("eps", self.eps)?;
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be at least 1".into()));
        }
        if !(2..=3).contains(&self.order) {
            return Err(Error::Parameter(format!(
                "regularization order must be 2 or 3, got {}",
                self.order
            )));
        }
        match self.model {
            TextureModel::Gp => {
                let gamma = self
                    .gamma
                    .ok_or_else(|| Error::Parameter("G_p model requires gamma".into()))?;
                positive("gamma", gamma)?;
                if self.p.is_none() {
                    return Err(Error::Parameter("G_p model requires p".into()));
                }
            }
            _ => {
                if self.gamma.is_some() || self.p.is_some() {
                    return Err(Error::Parameter(format!(
                        "gamma/p only apply to the gp model, not {}",
                        self.model
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = DecomposeConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.rho1, cfg.rho2, cfg.rho3), (1.0, 1.0, 1.0));
        assert_eq!(cfg.eps, 1e-8);
        assert_eq!(cfg.max_iters, 100);
        assert_eq!(cfg.hard_shrink_mode, HardShrinkMode::ExactProx);
    }

    #[test]
    fn model_specific_fields() {
        let mut cfg = DecomposeConfig::l1(0.01, 0.01, 0.01);
        cfg.gamma = Some(1.0);
        assert!(cfg.validate().is_err());
        let mut gp = DecomposeConfig::gp(0.01, 0.01, 0.01, 0.1, GpExponent::One);
        gp.validate().unwrap();
        gp.gamma = None;
        assert!(gp.validate().is_err());
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            DecomposeConfig::l1(0.0, 0.1, 0.1),
            DecomposeConfig::l1(0.1, -0.1, 0.1),
            DecomposeConfig::l1(0.1, 0.1, -1e-3),
            DecomposeConfig::l1(0.1, 0.1, 0.1).with_order(1),
            DecomposeConfig::l1(0.1, 0.1, 0.1).with_order(4),
            DecomposeConfig::l1(0.1, 0.1, 0.1).with_eps(0.0),
            DecomposeConfig::l1(0.1, 0.1, 0.1).with_max_iters(0),
        ] {
            assert!(matches!(bad.validate(), Err(Error::Parameter(_))), "{bad:?}");
        }
        // the TV-L¹ reduction is allowed
        DecomposeConfig::l1(0.1, 0.1, 0.0).validate().unwrap();
    }

    #[test]
    fn parse_names() {
        assert_eq!("HINV".parse::<TextureModel>().unwrap(), TextureModel::Hinv);
        assert!("tv".parse::<TextureModel>().is_err());
        assert_eq!("alpha".parse::<Weight>().unwrap(), Weight::Alpha);
    }
}
