use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Dense row-major tensor of `f64`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, rejecting shape/length mismatches and non-finite entries.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len = shape.iter().product::<usize>();
        if len != data.len() {
            return Err(Error::ShapeMismatch { shape, len: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        Ok(Tensor { shape, data })
    }

    /// Internal constructor for values produced by graph operations.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; len] }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![value; len] }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor { shape: vec![1], data: vec![value] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor { shape: vec![data.len()], data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f64 {
        assert!(self.is_scalar(), "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn reshaped(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::ShapeMismatch { shape, len: self.data.len() });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Size of the trailing axis.
    pub(crate) fn last_dim(&self) -> usize {
        *self.shape.last().unwrap_or(&1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes_and_nan() {
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(matches!(Tensor::new(vec![1], vec![f64::NAN]), Err(Error::NonFiniteValue)));
        let t = Tensor::new(vec![2, 3], vec![1.0; 6]).unwrap();
        assert_eq!(t.len(), 6);
        assert_eq!(t.clone().reshaped(vec![3, 2]).unwrap().shape(), &[3, 2]);
        assert!(t.reshaped(vec![4]).is_err());
    }
}
