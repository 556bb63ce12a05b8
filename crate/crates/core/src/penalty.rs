//! LASSO, SCAD and MCP penalties and their derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default SCAD shape parameter.
pub const SCAD_DEFAULT_A: f64 = 3.7;
/// Default MCP shape parameter.
pub const MCP_DEFAULT_A: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyFamily {
    Lasso,
    Scad,
    Mcp,
}

impl PenaltyFamily {
    pub fn default_a(self) -> f64 {
        match self {
            PenaltyFamily::Lasso => 0.0,
            PenaltyFamily::Scad => SCAD_DEFAULT_A,
            PenaltyFamily::Mcp => MCP_DEFAULT_A,
        }
    }
}

impl std::str::FromStr for PenaltyFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lasso" => Ok(PenaltyFamily::Lasso),
            "scad" => Ok(PenaltyFamily::Scad),
            "mcp" => Ok(PenaltyFamily::Mcp),
            other => Err(Error::Config(format!("unknown penalty `{other}`"))),
        }
    }
}

/// A penalty family at a fixed `lambda` and shape `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    family: PenaltyFamily,
    lambda: f64,
    a: f64,
}

impl PenaltySpec {
    pub fn new(family: PenaltyFamily, lambda: f64, a: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
        }
        match family {
            PenaltyFamily::Scad if !(a > 2.0) => {
                Err(Error::Config(format!("SCAD requires a > 2, got {a}")))
            }
            PenaltyFamily::Mcp if !(a > 1.0) => {
                Err(Error::Config(format!("MCP requires a > 1, got {a}")))
            }
            _ => Ok(PenaltySpec { family, lambda, a }),
        }
    }

    pub fn with_default_a(family: PenaltyFamily, lambda: f64) -> Result<Self> {
        PenaltySpec::new(family, lambda, family.default_a())
    }

    pub fn family(&self) -> PenaltyFamily {
        self.family
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Same family and shape at a different `lambda`.
    pub fn at(&self, lambda: f64) -> Result<Self> {
        PenaltySpec::new(self.family, lambda, self.a)
    }

    /// `p_λ(|β|)`.
    pub fn value(&self, beta_abs: f64) -> f64 {
        let b = beta_abs.abs();
        let (l, a) = (self.lambda, self.a);
        match self.family {
            PenaltyFamily::Lasso => l * b,
            PenaltyFamily::Scad => {
                if b < l {
                    l * b
                } else if b <= a * l {
                    (a * l * b - (b * b + l * l) / 2.0) / (a - 1.0)
                } else {
                    (a + 1.0) * l * l / 2.0
                }
            }
            PenaltyFamily::Mcp => {
                if b < a * l {
                    l * (b - b * b / (2.0 * a * l))
                } else {
                    a * l * l / 2.0
                }
            }
        }
    }

    /// `p'_λ(|β|)`; at a breakpoint the left branch is used.
    pub fn derivative(&self, beta_abs: f64) -> f64 {
        let b = beta_abs.abs();
        let (l, a) = (self.lambda, self.a);
        match self.family {
            PenaltyFamily::Lasso => l,
            PenaltyFamily::Scad => {
                if b <= l {
                    l
                } else if b <= a * l {
                    (a * l - b) / (a - 1.0)
                } else {
                    0.0
                }
            }
            PenaltyFamily::Mcp => {
                if b <= a * l {
                    (l - b / a).max(0.0)
                } else {
                    0.0
                }
            }
        }
    }

    /// Points where the piecewise definition changes.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.family {
            PenaltyFamily::Lasso => vec![],
            PenaltyFamily::Scad => vec![self.lambda, self.a * self.lambda],
            PenaltyFamily::Mcp => vec![self.a * self.lambda],
        }
    }
}

pub fn penalty_value(spec: &PenaltySpec, beta_abs: f64) -> f64 {
    spec.value(beta_abs)
}

pub fn penalty_derivative(spec: &PenaltySpec, beta_abs: f64) -> f64 {
    spec.derivative(beta_abs)
}
