use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smooth, non-polynomial transfer functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Logistic,
    Tanh,
    Softplus,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Logistic, Activation::Tanh, Activation::Softplus];

    #[inline]
    pub fn value(self, x: f64) -> f64 {
        match self {
            Activation::Logistic => logistic(x),
            Activation::Tanh => x.tanh(),
            Activation::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Logistic => {
                let s = logistic(x);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Softplus => logistic(x),
        }
    }

    /// Value and derivative in one pass.
    #[inline]
    pub fn value_and_derivative(self, x: f64) -> (f64, f64) {
        match self {
            Activation::Logistic => {
                let s = logistic(x);
                (s, s * (1.0 - s))
            }
            Activation::Tanh => {
                let t = x.tanh();
                (t, 1.0 - t * t)
            }
            Activation::Softplus => (self.value(x), logistic(x)),
        }
    }

    /// Bounded and strictly monotone, so the inverse is defined on the open range.
    pub fn is_bounded_invertible(self) -> bool {
        matches!(self, Activation::Logistic | Activation::Tanh)
    }

    /// Inverse on the open range; `None` at or beyond saturation.
    pub fn inverse(self, y: f64) -> Option<f64> {
        match self {
            Activation::Logistic if y > 0.0 && y < 1.0 => Some((y / (1.0 - y)).ln()),
            Activation::Tanh if y > -1.0 && y < 1.0 => Some(y.atanh()),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Logistic => "logistic",
            Activation::Tanh => "tanh",
            Activation::Softplus => "softplus",
        }
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" | "sigmoid" => Ok(Activation::Logistic),
            "tanh" => Ok(Activation::Tanh),
            "softplus" => Ok(Activation::Softplus),
            other => Err(Error::InvalidArgument(format!("unknown activation '{other}'"))),
        }
    }
}
