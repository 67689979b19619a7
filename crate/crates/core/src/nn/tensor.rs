use crate::error::{Error, Result};

/// Dense row-major tensor of up to four extents, laid out as
/// (batch, height, width, channels) when four-dimensional.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 4 {
            return Err(Error::invalid(format!(
                "tensor rank must be 1..=4, got {}",
                shape.len()
            )));
        }
        if shape.iter().any(|&e| e == 0) {
            return Err(Error::invalid(format!("zero extent in shape {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::shape(
                "Tensor::new",
                format!("{len} values for shape {shape:?}"),
                data.len(),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = shape.iter().product();
        Self::new(shape, vec![0.0; len])
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        let n = data.len().max(1);
        let mut data = data;
        data.resize(n, 0.0);
        Self {
            shape: vec![n],
            data,
        }
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

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    /// Extents as (batch, height, width, channels); fails unless rank 4.
    pub fn nhwc(&self) -> Result<(usize, usize, usize, usize)> {
        match self.shape[..] {
            [n, h, w, c] => Ok((n, h, w, c)),
            _ => Err(Error::shape(
                "Tensor::nhwc",
                "rank-4 (batch, height, width, channels)",
                format!("{:?}", self.shape),
            )),
        }
    }

    /// Extents as (rows, cols); a rank-1 tensor is treated as a single row.
    pub fn matrix(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [c] => Ok((1, c)),
            [r, c] => Ok((r, c)),
            _ => Err(Error::shape(
                "Tensor::matrix",
                "rank 1 or 2",
                format!("{:?}", self.shape),
            )),
        }
    }
}
