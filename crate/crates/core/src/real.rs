use core::fmt::{Debug, Display};
use core::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point precision tag carried by tensors and serialized containers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precision {
    Single,
    Double,
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::Single => "single",
            Precision::Double => "double",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "single" | "f32" => Some(Precision::Single),
            "double" | "f64" => Some(Precision::Double),
            _ => None,
        }
    }
}

/// Real scalar used throughout the engine (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    const PRECISION: Precision;

    /// Converts an `f64` literal or intermediate into this precision.
    fn lit(x: f64) -> Self;
    fn as_f64(self) -> f64;

    #[inline]
    fn count(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

impl Real for f32 {
    const PRECISION: Precision = Precision::Single;

    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    const PRECISION: Precision = Precision::Double;

    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}
