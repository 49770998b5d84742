use crate::autograd::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Paired samples `(x, y)` stacked along the leading axis:
/// `x` is `M x H x W x C_x`, `y` is `M x H x W x C_y`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldPairs<T> {
    x: Tensor<T>,
    y: Tensor<T>,
}

impl<T: Scalar> FieldPairs<T> {
    pub fn new(x: Tensor<T>, y: Tensor<T>) -> Result<Self> {
        let xs = x.nhwc("field-pairs")?;
        let ys = y.nhwc("field-pairs")?;
        if xs[0] != ys[0] || xs[1] != ys[1] || xs[2] != ys[2] {
            return Err(Error::shape(
                "field-pairs",
                format!("x {:?} and y {:?} are not aligned", x.shape(), y.shape()),
            ));
        }
        Ok(FieldPairs { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self) -> &Tensor<T> {
        &self.x
    }

    pub fn y(&self) -> &Tensor<T> {
        &self.y
    }

    /// `[H, W, C_x, C_y]`.
    pub fn dims(&self) -> [usize; 4] {
        let s = self.x.shape();
        [s[1], s[2], s[3], self.y.shape()[3]]
    }

    /// Stacks the selected records into a batch `(x, y)`.
    pub fn gather(&self, indices: &[usize]) -> Result<(Tensor<T>, Tensor<T>)> {
        Ok((gather(&self.x, indices)?, gather(&self.y, indices)?))
    }

    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        let idx: Vec<usize> = (start..start + len).collect();
        let (x, y) = self.gather(&idx)?;
        Ok(FieldPairs { x, y })
    }

    pub fn cast<U: Scalar>(&self) -> FieldPairs<U> {
        FieldPairs {
            x: self.x.cast(),
            y: self.y.cast(),
        }
    }
}

/// Rows of a batch-major tensor.
pub fn gather<T: Scalar>(t: &Tensor<T>, indices: &[usize]) -> Result<Tensor<T>> {
    let n = t.shape()[0];
    let per = t.len() / n;
    let mut data = Vec::with_capacity(per * indices.len());
    for &i in indices {
        if i >= n {
            return Err(Error::invalid(format!("record {i} out of range for {n} records")));
        }
        data.extend_from_slice(&t.data()[i * per..(i + 1) * per]);
    }
    let mut shape = t.shape().to_vec();
    shape[0] = indices.len();
    Tensor::new(shape, data)
}
