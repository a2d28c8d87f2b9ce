use crate::error::{shape_err, Result};

/// `[n, c, x, y, z]` extents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub n: usize,
    pub c: usize,
    pub sp: [usize; 3],
}

impl Dims {
    pub fn new(n: usize, c: usize, sp: [usize; 3]) -> Self {
        Self { n, c, sp }
    }

    /// A per-channel vector `[1, c, 1, 1, 1]`.
    pub fn vector(c: usize) -> Self {
        Self { n: 1, c, sp: [1, 1, 1] }
    }

    pub fn spatial(&self) -> usize {
        self.sp[0] * self.sp[1] * self.sp[2]
    }

    pub fn numel(&self) -> usize {
        self.n * self.c * self.spatial()
    }

    pub fn as_array(&self) -> [usize; 5] {
        [self.n, self.c, self.sp[0], self.sp[1], self.sp[2]]
    }

    pub fn from_array(a: [usize; 5]) -> Self {
        Self { n: a[0], c: a[1], sp: [a[2], a[3], a[4]] }
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}x{}x{}", self.n, self.c, self.sp[0], self.sp[1], self.sp[2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Dims,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Dims, data: Vec<f64>) -> Result<Self> {
        if dims.numel() != data.len() {
            return Err(shape_err("tensor", format!("{dims} needs {} values, got {}", dims.numel(), data.len())));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Dims) -> Self {
        Self { dims, data: vec![0.0; dims.numel()] }
    }

    pub fn filled(dims: Dims, value: f64) -> Self {
        Self { dims, data: vec![value; dims.numel()] }
    }

    pub fn dims(&self) -> Dims {
        self.dims
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

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Contiguous slice of one `(n, c)` channel.
    pub fn channel(&self, n: usize, c: usize) -> &[f64] {
        let s = self.dims.spatial();
        let off = (n * self.dims.c + c) * s;
        &self.data[off..off + s]
    }

    /// Copy of batch item `n` as a batch of one.
    pub fn item(&self, n: usize) -> Tensor {
        let per = self.dims.c * self.dims.spatial();
        Tensor { dims: Dims { n: 1, ..self.dims }, data: self.data[n * per..(n + 1) * per].to_vec() }
    }

    /// Stacks equally shaped tensors along the batch axis.
    pub fn stack(items: &[Tensor]) -> Result<Tensor> {
        let first = items.first().ok_or_else(|| shape_err("stack", "no tensors"))?;
        let mut data = Vec::with_capacity(first.numel() * items.len());
        let mut n = 0;
        for t in items {
            if (Dims { n: first.dims.n, ..t.dims }) != first.dims {
                return Err(shape_err("stack", format!("{} vs {}", t.dims, first.dims)));
            }
            n += t.dims.n;
            data.extend_from_slice(&t.data);
        }
        Ok(Tensor { dims: Dims { n, ..first.dims }, data })
    }

    /// `self += other`, elementwise.
    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.dims, other.dims);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        for v in &mut self.data {
            *v *= k;
        }
    }
}
