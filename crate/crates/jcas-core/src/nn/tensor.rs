use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;

use super::NnError;

/// Element type the engine is generic over. `f32` is the training type;
/// `f64` exists so finite-difference gradient checks are not drowned in
/// rounding noise.
pub trait Scalar:
    Float
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

/// Dense rank-4 tensor in NHWC layout: `[batch, height, width, channels]`.
/// Height indexes Doppler bins and width indexes time steps when the tensor
/// holds a spectrogram batch. Row-major: channels vary fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4<S> {
    dims: [usize; 4],
    data: Vec<S>,
}

impl<S: Scalar> Tensor4<S> {
    pub fn zeros(dims: [usize; 4]) -> Self {
        Tensor4 {
            dims,
            data: vec![S::zero(); dims.iter().product()],
        }
    }

    pub fn filled(dims: [usize; 4], v: S) -> Self {
        Tensor4 {
            dims,
            data: vec![v; dims.iter().product()],
        }
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<S>) -> Result<Self, NnError> {
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(NnError::Shape(format!(
                "dims {:?} need {} elements, got {}",
                dims,
                n,
                data.len()
            )));
        }
        Ok(Tensor4 { dims, data })
    }

    #[inline]
    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, b: usize, h: usize, w: usize, c: usize) -> usize {
        debug_assert!(b < self.dims[0] && h < self.dims[1] && w < self.dims[2] && c < self.dims[3]);
        ((b * self.dims[1] + h) * self.dims[2] + w) * self.dims[3] + c
    }

    #[inline]
    pub fn at(&self, b: usize, h: usize, w: usize, c: usize) -> S {
        self.data[self.offset(b, h, w, c)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, h: usize, w: usize, c: usize, v: S) {
        let i = self.offset(b, h, w, c);
        self.data[i] = v;
    }

    #[inline]
    pub fn data(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    /// Reinterprets the buffer under new dims with the same element count.
    pub fn reshape(mut self, dims: [usize; 4]) -> Result<Self, NnError> {
        let n: usize = dims.iter().product();
        if n != self.data.len() {
            return Err(NnError::Shape(format!(
                "cannot reshape {:?} into {:?}",
                self.dims, dims
            )));
        }
        self.dims = dims;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Tensor4 {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, NnError> {
        if self.dims != other.dims {
            return Err(NnError::Shape(format!(
                "add of {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        let mut out = self.clone();
        for (o, &r) in out.data.iter_mut().zip(other.data.iter()) {
            *o += r;
        }
        Ok(out)
    }

    pub fn scale(&self, k: S) -> Self {
        self.map(|v| v * k)
    }

    /// True when every element is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
