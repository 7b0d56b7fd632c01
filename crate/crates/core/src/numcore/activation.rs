use serde::{Deserialize, Serialize};

use crate::math;

pub const LEAKY_SLOPE: f64 = 0.2;

/// Signed logarithm `sign(x) * ln(|x| + 1)`.
///
/// Behaves like the identity near the origin and grows logarithmically
/// outside `[-1, 1]`. The value at zero is the continuous extension, 0.
#[inline]
pub fn symlog(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let magnitude = math::ln_1p(x.abs());
    if x < 0.0 {
        -magnitude
    } else {
        magnitude
    }
}

/// Derivative of [`symlog`]: `1 / (|x| + 1)`.
#[inline]
pub fn symlog_grad(x: f64) -> f64 {
    1.0 / (x.abs() + 1.0)
}

#[inline]
pub fn leaky_relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

#[inline]
pub fn leaky_relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// Pointwise nonlinearity applied after a layer's affine map.
///
/// The two `Clamped*` variants are output squashings: they shift the
/// pre-activation by one half and hard-clamp into `[0, 1]`, so a zero
/// pre-activation maps to 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Symlog,
    LeakyRelu,
    ClampedSymlog,
    ClampedLinear,
}

impl Activation {
    pub const ALL: [Activation; 5] = [
        Activation::Linear,
        Activation::Symlog,
        Activation::LeakyRelu,
        Activation::ClampedSymlog,
        Activation::ClampedLinear,
    ];

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Symlog => symlog(x),
            Activation::LeakyRelu => leaky_relu(x),
            Activation::ClampedSymlog => (0.5 + symlog(x)).clamp(0.0, 1.0),
            Activation::ClampedLinear => (0.5 + x).clamp(0.0, 1.0),
        }
    }

    /// Derivative with respect to the pre-activation `x`. Saturated clamps
    /// have zero slope.
    #[inline]
    pub fn grad(self, x: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Symlog => symlog_grad(x),
            Activation::LeakyRelu => leaky_relu_grad(x),
            Activation::ClampedSymlog => {
                let y = 0.5 + symlog(x);
                if y > 0.0 && y < 1.0 {
                    symlog_grad(x)
                } else {
                    0.0
                }
            }
            Activation::ClampedLinear => {
                let y = 0.5 + x;
                if y > 0.0 && y < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::Linear => 0,
            Activation::Symlog => 1,
            Activation::LeakyRelu => 2,
            Activation::ClampedSymlog => 3,
            Activation::ClampedLinear => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Symlog => "symlog",
            Activation::LeakyRelu => "leaky_relu",
            Activation::ClampedSymlog => "clamped_symlog",
            Activation::ClampedLinear => "clamped_linear",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }
}
