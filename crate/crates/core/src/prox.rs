//! Proximal maps for the supported nonsmooth terms `h`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::problem::BoxSet;

/// Absolute tolerance used when testing box membership in [`ProxSpec::value`].
pub const BOX_MEMBERSHIP_TOL: f64 = 1e-12;

/// A real number or `+∞`.
///
/// `h` values are carried in this type rather than as a float `inf`, so the
/// Lagrangian never mixes an infinite `h` into arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::PosInfinity => None,
        }
    }

    /// Adds a finite amount; `+∞` absorbs it.
    pub fn plus(self, v: f64) -> Self {
        match self {
            ExtendedReal::Finite(a) => ExtendedReal::Finite(a + v),
            ExtendedReal::PosInfinity => ExtendedReal::PosInfinity,
        }
    }

    /// Lossy conversion for reporting (`+∞` becomes `f64::INFINITY`).
    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedReal::Finite(v) => v,
            ExtendedReal::PosInfinity => f64::INFINITY,
        }
    }
}

/// The nonsmooth term `h` of the composite objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProxSpec {
    Zero,
    BoxIndicator(BoxSet),
    L1 { weight: f64 },
}

impl ProxSpec {
    pub fn l1(weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::invalid(format!(
                "L1 weight must be finite and nonnegative, got {weight}"
            )));
        }
        Ok(ProxSpec::L1 { weight })
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            ProxSpec::Zero => Ok(()),
            ProxSpec::BoxIndicator(b) => check_len("box dimension", n, b.dim()),
            ProxSpec::L1 { weight } => {
                if weight.is_finite() && *weight >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("L1 weight must be finite and nonnegative"))
                }
            }
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        match self {
            ProxSpec::BoxIndicator(b) => check_len("prox argument", b.dim(), len),
            _ => Ok(()),
        }
    }

    /// `prox_{eta h}(v)`, written into `out`.
    pub fn apply_into(&self, eta: f64, v: &[f64], out: &mut [f64]) -> Result<()> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid(format!(
                "prox step must be positive and finite, got {eta}"
            )));
        }
        self.check_dim(v.len())?;
        check_len("prox output", v.len(), out.len())?;
        match self {
            ProxSpec::Zero => out.copy_from_slice(v),
            ProxSpec::BoxIndicator(b) => {
                for (((o, vi), l), u) in out.iter_mut().zip(v).zip(b.lower()).zip(b.upper()) {
                    *o = vi.clamp(*l, *u);
                }
            }
            ProxSpec::L1 { weight } => {
                let t = eta * weight;
                for (o, vi) in out.iter_mut().zip(v) {
                    *o = vi.signum() * (vi.abs() - t).max(0.0);
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, eta: f64, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; v.len()];
        self.apply_into(eta, v, &mut out)?;
        Ok(out)
    }

    /// `h(x)`.
    pub fn value(&self, x: &[f64]) -> ExtendedReal {
        match self {
            ProxSpec::Zero => ExtendedReal::Finite(0.0),
            ProxSpec::BoxIndicator(b) => {
                if b.contains(x, BOX_MEMBERSHIP_TOL) {
                    ExtendedReal::Finite(0.0)
                } else {
                    ExtendedReal::PosInfinity
                }
            }
            ProxSpec::L1 { weight } => {
                ExtendedReal::Finite(weight * x.iter().map(|v| v.abs()).sum::<f64>())
            }
        }
    }

    pub fn as_box(&self) -> Option<&BoxSet> {
        match self {
            ProxSpec::BoxIndicator(b) => Some(b),
            _ => None,
        }
    }
}
