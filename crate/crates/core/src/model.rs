//! Model parameters shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussfunc::VolFunction;
use crate::kernel::Hurst;

/// Parameters of the rough fast-mean-reverting stochastic volatility model
/// `dX = F(Z^ε) X (ρ dW + √(1-ρ²) dB)`, `Z^ε = σ_ou ∫ K^ε(t-s) dW_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub hurst: Hurst,
    /// Mean-reversion time scale ε > 0.
    pub eps: f64,
    /// Correlation between the price and volatility drivers, in [-1, 1].
    pub rho: f64,
    pub vol_fn: VolFunction,
    /// Initial price.
    #[serde(default = "default_x0")]
    pub x0: f64,
    /// Option maturity T in years.
    #[serde(default = "default_maturity")]
    pub maturity: f64,
    /// Accept unbounded volatility functions.
    #[serde(default)]
    pub allow_unbounded: bool,
}

fn default_x0() -> f64 {
    100.0
}

fn default_maturity() -> f64 {
    1.0
}

impl ModelParams {
    pub fn new(hurst: f64, eps: f64, rho: f64, vol_fn: VolFunction) -> Result<Self> {
        let mp = Self {
            hurst: Hurst::new(hurst)?,
            eps,
            rho,
            vol_fn,
            x0: default_x0(),
            maturity: default_maturity(),
            allow_unbounded: false,
        };
        mp.validate()?;
        Ok(mp)
    }

    pub fn with_x0(mut self, x0: f64) -> Result<Self> {
        self.x0 = x0;
        self.validate()?;
        Ok(self)
    }

    pub fn with_maturity(mut self, maturity: f64) -> Result<Self> {
        self.maturity = maturity;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::validation("eps", "must be positive and finite"));
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(Error::validation("rho", "must lie in [-1, 1]"));
        }
        if !(self.x0 > 0.0 && self.x0.is_finite()) {
            return Err(Error::validation("x0", "must be positive and finite"));
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::validation("maturity", "must be positive and finite"));
        }
        self.vol_fn.validate(self.allow_unbounded)
    }
}
