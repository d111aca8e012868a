use std::marker::PhantomData;
use std::sync::Arc;

use crate::error::Result;

use super::kernels;
use super::{Scalar, Tensor};

/// The set of operations a network forward pass is written against.
///
/// The model is implemented once, generically over this trait, and run
/// under different interpreters: [`Eval`] computes values only,
/// [`Tape`](super::Tape) additionally records the graph for reverse-mode
/// differentiation, and the profiler's tracer only propagates shapes and
/// tallies costs.
pub trait Graph {
    type Elem: Scalar;
    type Var: Clone;

    fn dims(&self, v: &Self::Var) -> [usize; 4];

    /// Bare convolution; `name` identifies the layer for profiling.
    fn conv2d(
        &mut self,
        name: &str,
        x: &Self::Var,
        weight: &Self::Var,
        bias: Option<&Self::Var>,
        stride: usize,
        pad: usize,
    ) -> Result<Self::Var>;

    fn relu(&mut self, x: &Self::Var) -> Result<Self::Var>;
    fn sigmoid(&mut self, x: &Self::Var) -> Result<Self::Var>;
    fn add(&mut self, a: &Self::Var, b: &Self::Var) -> Result<Self::Var>;
    fn sub(&mut self, a: &Self::Var, b: &Self::Var) -> Result<Self::Var>;
    fn mul(&mut self, a: &Self::Var, b: &Self::Var) -> Result<Self::Var>;
    fn channel_slice(&mut self, x: &Self::Var, start: usize, end: usize) -> Result<Self::Var>;
    fn concat(&mut self, xs: &[Self::Var]) -> Result<Self::Var>;
    fn pixel_shuffle(&mut self, x: &Self::Var, scale: usize) -> Result<Self::Var>;
    fn max_pool(&mut self, x: &Self::Var, kernel: usize, stride: usize) -> Result<Self::Var>;
    fn resize_bilinear(&mut self, x: &Self::Var, out_h: usize, out_w: usize) -> Result<Self::Var>;

    fn channel_split(&mut self, x: &Self::Var, k: usize) -> Result<(Self::Var, Self::Var)> {
        let c = self.dims(x)[1];
        if k == 0 || k >= c {
            return Err(crate::error::shape_err!(
                "split point {k} must lie strictly inside 0..{c}"
            ));
        }
        Ok((self.channel_slice(x, 0, k)?, self.channel_slice(x, k, c)?))
    }
}

/// Value-only interpreter. Intermediate tensors are dropped as soon as
/// the forward code releases them.
#[derive(Debug, Default)]
pub struct Eval<T = f32>(PhantomData<T>);

impl<T: Scalar> Eval<T> {
    pub fn new() -> Self {
        Self(PhantomData)
    }

    pub fn leaf(&self, t: Tensor<T>) -> Arc<Tensor<T>> {
        Arc::new(t)
    }
}

fn same_dims<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    a.expect_same_dims(b)
}

impl<T: Scalar> Graph for Eval<T> {
    type Elem = T;
    type Var = Arc<Tensor<T>>;

    fn dims(&self, v: &Self::Var) -> [usize; 4] {
        v.dims()
    }

    fn conv2d(
        &mut self,
        _name: &str,
        x: &Self::Var,
        weight: &Self::Var,
        bias: Option<&Self::Var>,
        stride: usize,
        pad: usize,
    ) -> Result<Self::Var> {
        let b = bias.map(|b| b.as_ref());
        Ok(Arc::new(kernels::conv2d_forward(x, weight, b, stride, pad)?))
    }

    fn relu(&mut self, x: &Self::Var) -> Result<Self::Var> {
        Ok(Arc::new(kernels::relu(x)))
    }

    fn sigmoid(&mut self, x: &Self::Var) -> Result<Self::Var> {
        Ok(Arc::new(kernels::sigmoid(x)))
    }

    fn add(&mut self, a: &Self::Var, b: &Self::Var) -> Result<Self::Var> {
        same_dims(a, b)?;
        Ok(Arc::new(a.zip_map(b, |p, q| p + q)?))
    }

    fn sub(&mut self, a: &Self::Var, b: &Self::Var) -> Result<Self::Var> {
        Ok(Arc::new(a.zip_map(b, |p, q| p - q)?))
    }

    fn mul(&mut self, a: &Self::Var, b: &Self::Var) -> Result<Self::Var> {
        Ok(Arc::new(a.zip_map(b, |p, q| p * q)?))
    }

    fn channel_slice(&mut self, x: &Self::Var, start: usize, end: usize) -> Result<Self::Var> {
        Ok(Arc::new(kernels::channel_slice(x, start, end)?))
    }

    fn concat(&mut self, xs: &[Self::Var]) -> Result<Self::Var> {
        let refs: Vec<&Tensor<T>> = xs.iter().map(|t| t.as_ref()).collect();
        Ok(Arc::new(kernels::channel_concat(&refs)?))
    }

    fn pixel_shuffle(&mut self, x: &Self::Var, scale: usize) -> Result<Self::Var> {
        Ok(Arc::new(kernels::pixel_shuffle(x, scale)?))
    }

    fn max_pool(&mut self, x: &Self::Var, kernel: usize, stride: usize) -> Result<Self::Var> {
        Ok(Arc::new(kernels::max_pool(x, kernel, stride)?))
    }

    fn resize_bilinear(&mut self, x: &Self::Var, out_h: usize, out_w: usize) -> Result<Self::Var> {
        Ok(Arc::new(kernels::bilinear_resize(x, out_h, out_w)?))
    }
}
