use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type the dynamics and control code is written against.
///
/// Blanket-implemented for every real field that also converts to and from
/// primitive numbers, which covers `f32` and `f64`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display {
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T: RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display> Real for T {}

/// Serde adapter writing a `DVector` as a plain sequence.
pub mod dvector_seq {
    use nalgebra::{DVector, Scalar};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<T: Scalar + Serialize, S: Serializer>(v: &DVector<T>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, T: Scalar + Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<DVector<T>, D::Error> {
        Ok(DVector::from_vec(Vec::<T>::deserialize(d)?))
    }
}
