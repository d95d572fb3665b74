use rand::distributions::uniform::SampleUniform;

/// Scalar type the engine runs on. Training uses `f32`; gradient-check
/// tests shadow the same code in `f64` so the tolerance measures the
/// math, not the precision.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + SampleUniform
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Default
    + Send
    + Sync
    + 'static
{
    fn from_f64c(x: f64) -> Self;
    fn to_f64c(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn from_f64c(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64c(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64c(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64c(self) -> f64 {
        self
    }
}
