use crate::error::{Error, Result};

/// Dense 5-D tensor in `(batch, channels, depth, height, width)` order,
/// width fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor5 {
    shape: [usize; 5],
    data: Vec<f64>,
}

impl Tensor5 {
    pub fn new(shape: [usize; 5], data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::InvalidTensor(format!("zero extent in {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(Error::InvalidTensor(format!(
                "{} values for shape {shape:?} ({len} expected)",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidTensor(format!("non-finite value at {i}")));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: [usize; 5]) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    /// Fills from `f(b, c, z, y, x)`.
    pub fn from_fn(shape: [usize; 5], mut f: impl FnMut(usize, usize, usize, usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(shape.iter().product());
        for b in 0..shape[0] {
            for c in 0..shape[1] {
                for z in 0..shape[2] {
                    for y in 0..shape[3] {
                        for x in 0..shape[4] {
                            data.push(f(b, c, z, y, x));
                        }
                    }
                }
            }
        }
        Self::new(shape, data)
    }

    pub(crate) fn from_parts(shape: [usize; 5], data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        Self { shape, data }
    }

    pub fn shape(&self) -> [usize; 5] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn spatial(&self) -> [usize; 3] {
        [self.shape[2], self.shape[3], self.shape[4]]
    }

    pub fn spatial_len(&self) -> usize {
        self.shape[2] * self.shape[3] * self.shape[4]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn index(&self, b: usize, c: usize, z: usize, y: usize, x: usize) -> usize {
        let [_, nc, nz, ny, nx] = self.shape;
        (((b * nc + c) * nz + z) * ny + y) * nx + x
    }

    pub fn get(&self, b: usize, c: usize, z: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(b, c, z, y, x)]
    }

    /// Contiguous `(channels, d, h, w)` block of one sample.
    pub fn sample(&self, b: usize) -> &[f64] {
        let n = self.shape[1] * self.spatial_len();
        &self.data[b * n..(b + 1) * n]
    }

    /// One channel of one sample.
    pub fn channel(&self, b: usize, c: usize) -> &[f64] {
        let n = self.spatial_len();
        let start = (b * self.shape[1] + c) * n;
        &self.data[start..start + n]
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Tensor5) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// Stacks samples along the batch axis.
    pub fn concat_batch(parts: &[Tensor5]) -> Result<Tensor5> {
        let first = parts.first().ok_or_else(|| Error::InvalidTensor("no tensors to stack".into()))?;
        let mut shape = first.shape;
        if parts.iter().any(|p| p.shape[1..] != first.shape[1..]) {
            return Err(Error::ShapeMismatch("samples differ in shape".into()));
        }
        shape[0] = parts.iter().map(|p| p.shape[0]).sum();
        let data = parts.iter().flat_map(|p| p.data.iter().copied()).collect();
        Ok(Tensor5 { shape, data })
    }
}
