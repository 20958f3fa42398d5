//! Dense row-major `f64` tensors.
//!
//! Image batches use `[N, C, H, W]` ordering throughout the crate.

use crate::error::{shape_err, Result};
use crate::rng::RandomSource;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Initial contents for [`Tensor::new`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fill {
    Constant(f64),
    Uniform { lo: f64, hi: f64 },
    Normal { mu: f64, sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementOp {
    Add,
    Sub,
    Mul,
    Scale,
    Relu,
    Tanh,
}

/// Right-hand side of an elementwise op. Unary ops take [`Operand::None`].
#[derive(Debug, Clone, Copy)]
pub enum Operand<'a> {
    Tensor(&'a Tensor),
    Scalar(f64),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    All,
    Index(usize),
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return shape_err("tensor shape must have at least one dimension");
    }
    if let Some(d) = shape.iter().find(|&&d| d == 0) {
        return shape_err(format!("dimension {d} in {shape:?} must be >= 1"));
    }
    Ok(shape.iter().product())
}

impl Tensor {
    pub fn new(shape: &[usize], fill: Fill, rng: &mut RandomSource) -> Result<Self> {
        let len = check_shape(shape)?;
        let data = match fill {
            Fill::Constant(c) => vec![c; len],
            Fill::Uniform { lo, hi } => {
                if !(lo < hi) {
                    return shape_err(format!("uniform fill needs lo < hi, got [{lo}, {hi})"));
                }
                (0..len).map(|_| rng.uniform_range(lo, hi)).collect()
            }
            Fill::Normal { mu, sigma } => {
                if !(sigma >= 0.0) {
                    return shape_err(format!("normal fill needs sigma >= 0, got {sigma}"));
                }
                (0..len).map(|_| rng.normal(mu, sigma)).collect()
            }
        };
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        })
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let len = check_shape(shape)?;
        if data.len() != len {
            return shape_err(format!(
                "buffer of length {} does not fit shape {shape:?}",
                data.len()
            ));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    /// Zero tensor with the same shape as `self`.
    pub fn zeros_like(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: vec![0.0; self.data.len()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let len = check_shape(shape)?;
        if len != self.data.len() {
            return shape_err(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            ));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape != other.shape {
            return shape_err(format!(
                "elementwise shape mismatch: {:?} vs {:?}",
                self.shape, other.shape
            ));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Self> {
        self.zip(other, |a, b| a * b)
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn relu(&self) -> Self {
        self.map(|v| v.max(0.0))
    }

    pub fn tanh(&self) -> Self {
        self.map(f64::tanh)
    }

    /// `self += alpha * other`, in place.
    pub fn axpy(&mut self, alpha: f64, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return shape_err(format!(
                "axpy shape mismatch: {:?} vs {:?}",
                self.shape, other.shape
            ));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn sum(&self, axis: Axis) -> Result<Self> {
        self.reduce_axis(axis, |lane| lane.iter().sum())
    }

    pub fn mean(&self, axis: Axis) -> Result<Self> {
        self.reduce_axis(axis, |lane| {
            lane.iter().sum::<f64>() / lane.len() as f64
        })
    }

    pub fn sum_all(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Flat index of the largest element; ties go to the lowest index.
    pub fn argmax_all(&self) -> usize {
        argmax(&self.data)
    }

    /// Argmax along `axis`, one index per lane, lanes in row-major order of
    /// the remaining dimensions. Ties go to the lowest index.
    pub fn argmax_axis(&self, axis: usize) -> Result<Vec<usize>> {
        let (outer, len, inner) = self.split_axis(axis)?;
        let mut out = Vec::with_capacity(outer * inner);
        let mut lane = vec![0.0; len];
        for o in 0..outer {
            for i in 0..inner {
                for (k, slot) in lane.iter_mut().enumerate() {
                    *slot = self.data[(o * len + k) * inner + i];
                }
                out.push(argmax(&lane));
            }
        }
        Ok(out)
    }

    fn split_axis(&self, axis: usize) -> Result<(usize, usize, usize)> {
        if axis >= self.rank() {
            return shape_err(format!(
                "axis {axis} out of range for rank {}",
                self.rank()
            ));
        }
        let outer = self.shape[..axis].iter().product();
        let inner = self.shape[axis + 1..].iter().product();
        Ok((outer, self.shape[axis], inner))
    }

    fn reduce_axis(&self, axis: Axis, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        match axis {
            Axis::All => Ok(Self::scalar(f(&self.data))),
            Axis::Index(axis) => {
                let (outer, len, inner) = self.split_axis(axis)?;
                let mut out = Vec::with_capacity(outer * inner);
                let mut lane = vec![0.0; len];
                for o in 0..outer {
                    for i in 0..inner {
                        for (k, slot) in lane.iter_mut().enumerate() {
                            *slot = self.data[(o * len + k) * inner + i];
                        }
                        out.push(f(&lane));
                    }
                }
                let mut shape: Vec<usize> = self.shape.clone();
                shape.remove(axis);
                if shape.is_empty() {
                    shape.push(1);
                }
                Self::from_vec(&shape, out)
            }
        }
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Self> {
        if self.rank() != 2 || other.rank() != 2 {
            return shape_err(format!(
                "matmul needs rank-2 operands, got {:?} and {:?}",
                self.shape, other.shape
            ));
        }
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, n) = (other.shape[0], other.shape[1]);
        if k != k2 {
            return shape_err(format!(
                "matmul inner dimensions disagree: {:?} x {:?}",
                self.shape, other.shape
            ));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            1.0,
            MatRef::row_major(&self.data, k),
            MatRef::row_major(&other.data, n),
            0.0,
            &mut out,
        );
        Self::from_vec(&[m, n], out)
    }
}

/// Index of the largest element, lowest index on ties. Empty slices give 0.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Dispatch for [`elementwise`]-style calls where the op is chosen at runtime.
pub fn elementwise(op: ElementOp, a: &Tensor, rhs: Operand<'_>) -> Result<Tensor> {
    match (op, rhs) {
        (ElementOp::Add, Operand::Tensor(b)) => a.add(b),
        (ElementOp::Sub, Operand::Tensor(b)) => a.sub(b),
        (ElementOp::Mul, Operand::Tensor(b)) => a.mul(b),
        (ElementOp::Add, Operand::Scalar(s)) => Ok(a.map(|v| v + s)),
        (ElementOp::Sub, Operand::Scalar(s)) => Ok(a.map(|v| v - s)),
        (ElementOp::Mul | ElementOp::Scale, Operand::Scalar(s)) => Ok(a.scale(s)),
        (ElementOp::Relu, Operand::None) => Ok(a.relu()),
        (ElementOp::Tanh, Operand::None) => Ok(a.tanh()),
        (op, _) => shape_err(format!("operand kind does not fit {op:?}")),
    }
}

/// Strided view of a matrix for [`gemm`].
#[derive(Clone, Copy)]
pub(crate) struct MatRef<'a> {
    pub data: &'a [f64],
    pub row_stride: isize,
    pub col_stride: isize,
}

impl<'a> MatRef<'a> {
    pub fn row_major(data: &'a [f64], cols: usize) -> Self {
        Self {
            data,
            row_stride: cols as isize,
            col_stride: 1,
        }
    }

    /// Transposed view of a row-major matrix that has `cols` columns.
    pub fn transposed(data: &'a [f64], cols: usize) -> Self {
        Self {
            data,
            row_stride: 1,
            col_stride: cols as isize,
        }
    }
}

/// `c = alpha * a * b + beta * c` with `a: m x k`, `b: k x n`, `c: m x n` row-major.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: MatRef<'_>,
    b: MatRef<'_>,
    beta: f64,
    c: &mut [f64],
) {
    assert!(c.len() >= m * n, "gemm output buffer too small");
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: strides describe in-bounds views of the borrowed slices; the
    // callers construct them from buffers of exactly the stated dimensions.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.row_stride,
            a.col_stride,
            b.data.as_ptr(),
            b.row_stride,
            b.col_stride,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
