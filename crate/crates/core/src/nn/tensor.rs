use super::scalar::Scalar;

/// Dense NCHW tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T> {
    pub dims: [usize; 4],
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor4<T> {
    pub fn zeros(dims: [usize; 4]) -> Self {
        Tensor4 {
            dims,
            data: vec![T::zero(); dims.iter().product()],
        }
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<T>) -> Self {
        assert_eq!(dims.iter().product::<usize>(), data.len(), "tensor size");
        Tensor4 { dims, data }
    }

    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    pub fn channels(&self) -> usize {
        self.dims[1]
    }

    /// Spatial size h*w.
    pub fn plane(&self) -> usize {
        self.dims[2] * self.dims[3]
    }

    /// Feature count per sample, c*h*w.
    pub fn features(&self) -> usize {
        self.dims[1] * self.dims[2] * self.dims[3]
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> T {
        let [_, cc, h, w] = self.dims;
        self.data[((n * cc + c) * h + y) * w + x]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor4<U> {
        Tensor4 {
            dims: self.dims,
            data: self.data.iter().map(|v| U::of(v.to_f64().unwrap())).collect(),
        }
    }

    pub fn reshaped(self, dims: [usize; 4]) -> Self {
        Tensor4::from_vec(dims, self.data)
    }
}
