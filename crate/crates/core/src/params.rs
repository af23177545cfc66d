//! Game parameters and the regions of parameter space where results hold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Jump intensity `kappa` in (0, 1] and stake exponent `rho` > 0.
///
/// Construct with [`GameParams::new`]; the fields are public for reading only
/// in the sense that every operation revalidates through `new`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    pub kappa: f64,
    pub rho: f64,
}

/// Precondition tag attached to results that need more than basic validity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `rho^2 * kappa <= 1`: the region where the default solution is known to be an equilibrium.
    W,
    /// `kappa = 1` and `rho <= 1`.
    UnitKappa,
    /// `kappa < 1` and `rho <= 1`.
    Sublinear,
}

impl GameParams {
    pub fn new(kappa: f64, rho: f64) -> Result<Self> {
        if !kappa.is_finite() || kappa <= 0.0 || kappa > 1.0 {
            return Err(Error::InvalidParameter(format!("kappa must lie in (0, 1], got {kappa}")));
        }
        if !rho.is_finite() || rho <= 0.0 {
            return Err(Error::InvalidParameter(format!("rho must be positive and finite, got {rho}")));
        }
        Ok(Self { kappa, rho })
    }

    /// Revalidates a value that may have been built by struct literal.
    pub fn validated(self) -> Result<Self> {
        Self::new(self.kappa, self.rho)
    }

    pub fn in_region_w(&self) -> bool {
        self.rho * self.rho * self.kappa <= 1.0
    }

    pub fn in_unit_box(&self) -> bool {
        self.rho <= 1.0
    }

    pub fn satisfies(&self, regime: Regime) -> bool {
        match regime {
            Regime::W => self.in_region_w(),
            Regime::UnitKappa => self.kappa == 1.0 && self.rho <= 1.0,
            Regime::Sublinear => self.kappa < 1.0 && self.rho <= 1.0,
        }
    }

    pub fn require(&self, regime: Regime) -> Result<()> {
        if self.satisfies(regime) {
            Ok(())
        } else {
            Err(Error::OutOfRegime(format!(
                "(kappa, rho) = ({}, {}) does not satisfy {:?}",
                self.kappa, self.rho, regime
            )))
        }
    }

    /// The half-open interval `(lo, hi]` met exactly once by every shift orbit.
    pub fn central_domain(&self) -> Result<CentralDomain> {
        let kr = self.kappa * self.rho;
        if kr >= 2.0 {
            return Err(Error::OutOfRegime(format!(
                "central domain is empty for kappa * rho = {kr} >= 2"
            )));
        }
        Ok(CentralDomain { lo: (2.0 - kr) / (2.0 + kr), hi: (2.0 + kr) / (2.0 - kr) })
    }
}

/// Left-open, right-closed interval `(lo, hi]` with `lo * hi = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentralDomain {
    pub lo: f64,
    pub hi: f64,
}

impl CentralDomain {
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x <= self.hi
    }
}

pub(crate) fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {x}")))
    }
}

pub(crate) fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite, got {x}")))
    }
}
