//! Number types the valuation engine can compute in.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// A field-like number usable for scores: `f32`, `f64` or an exact ratio.
pub trait Scalar: Num + FromPrimitive + ToPrimitive + PartialOrd + Clone + Debug {
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::zero)
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("counts fit every scalar")
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn clamp_unit(self) -> Self {
        let one = Self::one();
        let minus_one = Self::zero() - Self::one();
        if self > one {
            one
        } else if self < minus_one {
            minus_one
        } else {
            self
        }
    }

    fn max_zero(self) -> Self {
        if self > Self::zero() {
            self
        } else {
            Self::zero()
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
impl Scalar for Ratio<i64> {}
