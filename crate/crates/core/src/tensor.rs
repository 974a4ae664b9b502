//! Dense row-major tensors.
//!
//! Feature maps follow the channels-first convention `C×H×W`. The public
//! network API works in `f32`; the element type is generic so gradient
//! checks can run the identical code path in `f64`.

use std::fmt;

use crate::error::{Error, Result};

/// Scalar element of a [`TensorOf`]. Implemented for `f32` and `f64`.
pub trait Element: num_traits::Float + fmt::Debug + Default + Send + Sync + 'static {
    fn of_f32(v: f32) -> Self;
    fn of_f64(v: f64) -> Self;
    fn as_f32(self) -> f32;
    fn as_f64(self) -> f64;
}

impl Element for f32 {
    fn of_f32(v: f32) -> Self {
        v
    }
    fn of_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f32(self) -> f32 {
        self
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Element for f64 {
    fn of_f32(v: f32) -> Self {
        v as f64
    }
    fn of_f64(v: f64) -> Self {
        v
    }
    fn as_f32(self) -> f32 {
        self as f32
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// N-dimensional array with positive extents and row-major data.
#[derive(Clone, PartialEq)]
pub struct TensorOf<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

/// The 32-bit tensor used throughout the network and the image pipeline.
pub type Tensor = TensorOf<f32>;

impl<T: Element> TensorOf<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = check_extents(shape).expect("tensor extents must be positive");
        TensorOf {
            shape: shape.to_vec(),
            data: vec![T::zero(); len],
        }
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        let len = check_extents(shape).expect("tensor extents must be positive");
        TensorOf {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    /// Builds a tensor from external data, rejecting length mismatches and
    /// non-finite values.
    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let len = check_extents(shape)?;
        if data.len() != len {
            return Err(Error::shape(format!(
                "shape {:?} implies {} elements, got {}",
                shape,
                len,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::arg(format!(
                "non-finite value {:?} at flat index {}",
                data[pos], pos
            )));
        }
        Ok(TensorOf {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Internal constructor for values we computed ourselves.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<T>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        TensorOf { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Converts the element type, used to lift `f32` weights into the `f64`
    /// gradient-check path.
    pub fn cast<U: Element>(&self) -> TensorOf<U> {
        TensorOf {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of_f64(v.as_f64())).collect(),
        }
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &TensorOf<T>) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "add: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + *b;
        }
        Ok(())
    }

    /// Elementwise `a + b` as a new tensor.
    pub fn add(&self, other: &TensorOf<T>) -> Result<TensorOf<T>> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }
}

impl<T> fmt::Debug for TensorOf<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "TensorOf {{ shape: {:?}, len: {} }}",
            self.shape,
            self.data.len()
        )
    }
}

fn check_extents(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::shape("empty shape".to_string()));
    }
    let mut len = 1usize;
    for &d in shape {
        if d == 0 {
            return Err(Error::shape(format!("zero extent in shape {:?}", shape)));
        }
        len = len
            .checked_mul(d)
            .ok_or_else(|| Error::shape(format!("shape {:?} overflows usize", shape)))?;
    }
    Ok(len)
}
