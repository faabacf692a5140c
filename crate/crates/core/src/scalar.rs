use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Real scalar used by the geometry and closed-form layers.
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("representable literal")
    }
}

impl Real for f32 {}
impl Real for f64 {}
