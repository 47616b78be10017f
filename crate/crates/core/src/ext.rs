//! Extended reals with saturating infinities.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// A real number or one of the two infinity sentinels.
///
/// The sentinels are distinct from IEEE infinities produced by overflow:
/// constructing `Finite` from a non-finite float is rejected by [`ExtReal::finite`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    /// Wraps a finite value; returns `None` for NaN or IEEE infinities.
    pub fn finite(x: f64) -> Option<Self> {
        x.is_finite().then_some(ExtReal::Finite(x))
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(*x),
            _ => None,
        }
    }

    /// Converts to `f64`, mapping sentinels to IEEE infinities.
    pub fn to_f64(&self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(x) => *x,
            ExtReal::PosInf => f64::INFINITY,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => write!(f, "-inf"),
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::PosInf => write!(f, "+inf"),
        }
    }
}

impl Neg for ExtReal {
    type Output = ExtReal;
    fn neg(self) -> ExtReal {
        match self {
            ExtReal::NegInf => ExtReal::PosInf,
            ExtReal::Finite(x) => ExtReal::Finite(-x),
            ExtReal::PosInf => ExtReal::NegInf,
        }
    }
}

/// Saturating addition. `+inf + -inf` resolves to `+inf`, matching the use of
/// `+inf` as an infeasibility marker that must never be cancelled.
impl Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: ExtReal) -> ExtReal {
        use ExtReal::*;
        match (self, rhs) {
            (PosInf, _) | (_, PosInf) => PosInf,
            (NegInf, _) | (_, NegInf) => NegInf,
            (Finite(a), Finite(b)) => Finite(a + b),
        }
    }
}

impl Add<f64> for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: f64) -> ExtReal {
        self + ExtReal::Finite(rhs)
    }
}

impl Sub for ExtReal {
    type Output = ExtReal;
    fn sub(self, rhs: ExtReal) -> ExtReal {
        self + (-rhs)
    }
}

/// Scaling by a finite factor. Zero times a sentinel is zero.
impl Mul<f64> for ExtReal {
    type Output = ExtReal;
    fn mul(self, rhs: f64) -> ExtReal {
        use ExtReal::*;
        match self {
            Finite(a) => Finite(a * rhs),
            _ if rhs == 0.0 => Finite(0.0),
            PosInf => {
                if rhs > 0.0 {
                    PosInf
                } else {
                    NegInf
                }
            }
            NegInf => {
                if rhs > 0.0 {
                    NegInf
                } else {
                    PosInf
                }
            }
        }
    }
}
