//! Reverse-mode differentiation over a Wengert list.
//!
//! Every operation appends a node holding its output value and the ids
//! of its operands. Operands always precede the node that consumes
//! them, so a single reverse sweep visits each node after all of its
//! consumers.

use crate::error::{shape_err, Error, Result};

use super::kernels;
use super::{Graph, Scalar, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Conv {
        x: usize,
        w: usize,
        b: Option<usize>,
        stride: usize,
        pad: usize,
    },
    Relu(usize),
    Sigmoid(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Slice { x: usize, start: usize },
    Concat(Vec<usize>),
    Shuffle { x: usize, scale: usize },
    MaxPool { x: usize, argmax: Vec<usize> },
    Resize { x: usize },
    Scale(usize, T),
    Square(usize),
    Sum(usize),
    L1Mean { pred: usize, target: usize },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

#[derive(Debug, Default)]
pub struct Tape<T = f32> {
    nodes: Vec<Node<T>>,
}

/// Gradients of a scalar with respect to every leaf it depends on.
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn accumulate<T: Scalar>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) {
    match slot {
        Some(acc) => acc
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .for_each(|(a, &b)| *a += b),
        None => *slot = Some(g),
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn get(&self, v: &Var) -> Result<&Tensor<T>> {
        self.nodes
            .get(v.0)
            .map(|n| &n.value)
            .ok_or_else(|| Error::Internal(format!("variable {} is not on this tape", v.0)))
    }

    pub fn scale(&mut self, x: Var, c: T) -> Result<Var> {
        let y = self.get(&x)?.map(|v| v * c);
        Ok(self.push(y, Op::Scale(x.0, c)))
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        let y = self.get(&x)?.map(|v| v * v);
        Ok(self.push(y, Op::Square(x.0)))
    }

    /// Sum of all elements as a 1×1×1×1 tensor.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.get(&x)?.sum();
        Ok(self.push(Tensor::full([1, 1, 1, 1], s), Op::Sum(x.0)))
    }

    /// Mean absolute difference as a 1×1×1×1 tensor.
    pub fn l1_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (p, t) = (self.get(&pred)?, self.get(&target)?);
        p.expect_same_dims(t)?;
        let n = T::from_usize(p.numel()).unwrap();
        let s: T = p.data().iter().zip(t.data()).map(|(&a, &b)| (a - b).abs()).sum();
        Ok(self.push(
            Tensor::full([1, 1, 1, 1], s / n),
            Op::L1Mean {
                pred: pred.0,
                target: target.0,
            },
        ))
    }

    /// Bit pattern of every branch decision taken by piecewise-smooth
    /// operations (ReLU sign, l1 residual sign, pooling winner). Two
    /// evaluations with equal signatures lie on the same smooth piece.
    pub fn kink_signature(&self) -> Vec<u64> {
        let mut sig = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::Relu(x) => {
                    sig.extend(self.nodes[*x].value.data().iter().map(|&v| (v > T::zero()) as u64))
                }
                Op::L1Mean { pred, target } => sig.extend(
                    self.nodes[*pred]
                        .value
                        .data()
                        .iter()
                        .zip(self.nodes[*target].value.data())
                        .map(|(&p, &t)| (p > t) as u64 + 2 * (p == t) as u64),
                ),
                Op::MaxPool { argmax, .. } => sig.extend(argmax.iter().map(|&a| a as u64)),
                _ => {}
            }
        }
        sig
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, output: Var) -> Result<Gradients<T>> {
        let out = self.get(&output)?;
        if out.numel() != 1 {
            return Err(shape_err!(
                "backward needs a scalar output, got dims {:?}",
                out.dims()
            ));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut leaf_grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::full(out.dims(), T::one()));

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let operands = self.operands(&node.op);
            if let Some(&bad) = operands.iter().find(|&&j| j >= i) {
                return Err(Error::Internal(format!(
                    "node {i} consumes node {bad}, which does not precede it"
                )));
            }
            let val = |j: usize| &self.nodes[j].value;
            match &node.op {
                Op::Leaf => leaf_grads[i] = Some(g),
                Op::Conv { x, w, b, stride, pad } => {
                    let (gx, gw, gb) =
                        kernels::conv2d_backward(val(*x), val(*w), &g, *stride, *pad, b.is_some());
                    accumulate(&mut grads[*x], gx);
                    accumulate(&mut grads[*w], gw);
                    if let (Some(b), Some(gb)) = (b, gb) {
                        accumulate(&mut grads[*b], gb);
                    }
                }
                Op::Relu(x) => {
                    let gx = g.zip_map(val(*x), |gv, xv| if xv > T::zero() { gv } else { T::zero() })?;
                    accumulate(&mut grads[*x], gx);
                }
                Op::Sigmoid(x) => {
                    let gx = g.zip_map(&node.value, |gv, y| gv * y * (T::one() - y))?;
                    accumulate(&mut grads[*x], gx);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[*a], g.clone());
                    accumulate(&mut grads[*b], g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads[*b], g.map(|v| -v));
                    accumulate(&mut grads[*a], g);
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(val(*b), |gv, bv| gv * bv)?;
                    let gb = g.zip_map(val(*a), |gv, av| gv * av)?;
                    accumulate(&mut grads[*a], ga);
                    accumulate(&mut grads[*b], gb);
                }
                Op::Slice { x, start } => {
                    let [n, c, h, w] = val(*x).dims();
                    let k = g.channels();
                    let hw = h * w;
                    let mut gx = Tensor::zeros([n, c, h, w]);
                    for ni in 0..n {
                        let dst = (ni * c + start) * hw;
                        gx.data_mut()[dst..dst + k * hw]
                            .copy_from_slice(&g.data()[ni * k * hw..(ni + 1) * k * hw]);
                    }
                    accumulate(&mut grads[*x], gx);
                }
                Op::Concat(xs) => {
                    let mut start = 0;
                    for &x in xs {
                        let c = val(x).channels();
                        accumulate(&mut grads[x], kernels::channel_slice(&g, start, start + c)?);
                        start += c;
                    }
                }
                Op::Shuffle { x, scale } => {
                    accumulate(&mut grads[*x], kernels::pixel_unshuffle(&g, *scale)?);
                }
                Op::MaxPool { x, argmax } => {
                    let mut gx = Tensor::zeros(val(*x).dims());
                    for (&src, &gv) in argmax.iter().zip(g.data()) {
                        gx.data_mut()[src] += gv;
                    }
                    accumulate(&mut grads[*x], gx);
                }
                Op::Resize { x } => {
                    accumulate(&mut grads[*x], kernels::bilinear_resize_backward(val(*x).dims(), &g));
                }
                Op::Scale(x, c) => accumulate(&mut grads[*x], g.map(|v| v * *c)),
                Op::Square(x) => {
                    let gx = g.zip_map(val(*x), |gv, xv| gv * (xv + xv))?;
                    accumulate(&mut grads[*x], gx);
                }
                Op::Sum(x) => {
                    let gv = g.data()[0];
                    accumulate(&mut grads[*x], Tensor::full(val(*x).dims(), gv));
                }
                Op::L1Mean { pred, target } => {
                    let (p, t) = (val(*pred), val(*target));
                    let scale = g.data()[0] / T::from_usize(p.numel()).unwrap();
                    let gp = p.zip_map(t, |a, b| {
                        if a > b {
                            scale
                        } else if a < b {
                            -scale
                        } else {
                            T::zero()
                        }
                    })?;
                    accumulate(&mut grads[*target], gp.map(|v| -v));
                    accumulate(&mut grads[*pred], gp);
                }
            }
        }
        Ok(Gradients { grads: leaf_grads })
    }

    fn operands(&self, op: &Op<T>) -> Vec<usize> {
        match op {
            Op::Leaf => vec![],
            Op::Conv { x, w, b, .. } => [Some(*x), Some(*w), *b].into_iter().flatten().collect(),
            Op::Relu(x)
            | Op::Sigmoid(x)
            | Op::Slice { x, .. }
            | Op::Shuffle { x, .. }
            | Op::MaxPool { x, .. }
            | Op::Resize { x }
            | Op::Scale(x, _)
            | Op::Square(x)
            | Op::Sum(x) => vec![*x],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Concat(xs) => xs.clone(),
            Op::L1Mean { pred, target } => vec![*pred, *target],
        }
    }
}

impl<T: Scalar> Graph for Tape<T> {
    type Elem = T;
    type Var = Var;

    fn dims(&self, v: &Var) -> [usize; 4] {
        self.nodes[v.0].value.dims()
    }

    fn conv2d(
        &mut self,
        _name: &str,
        x: &Var,
        weight: &Var,
        bias: Option<&Var>,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        let b = bias.map(|b| self.get(b)).transpose()?;
        let y = kernels::conv2d_forward(self.get(x)?, self.get(weight)?, b, stride, pad)?;
        Ok(self.push(
            y,
            Op::Conv {
                x: x.0,
                w: weight.0,
                b: bias.map(|b| b.0),
                stride,
                pad,
            },
        ))
    }

    fn relu(&mut self, x: &Var) -> Result<Var> {
        let y = kernels::relu(self.get(x)?);
        Ok(self.push(y, Op::Relu(x.0)))
    }

    fn sigmoid(&mut self, x: &Var) -> Result<Var> {
        let y = kernels::sigmoid(self.get(x)?);
        Ok(self.push(y, Op::Sigmoid(x.0)))
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = self.get(a)?.zip_map(self.get(b)?, |p, q| p + q)?;
        Ok(self.push(y, Op::Add(a.0, b.0)))
    }

    fn sub(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = self.get(a)?.zip_map(self.get(b)?, |p, q| p - q)?;
        Ok(self.push(y, Op::Sub(a.0, b.0)))
    }

    fn mul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = self.get(a)?.zip_map(self.get(b)?, |p, q| p * q)?;
        Ok(self.push(y, Op::Mul(a.0, b.0)))
    }

    fn channel_slice(&mut self, x: &Var, start: usize, end: usize) -> Result<Var> {
        let y = kernels::channel_slice(self.get(x)?, start, end)?;
        Ok(self.push(y, Op::Slice { x: x.0, start }))
    }

    fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        let refs = xs.iter().map(|v| self.get(v)).collect::<Result<Vec<_>>>()?;
        let y = kernels::channel_concat(&refs)?;
        Ok(self.push(y, Op::Concat(xs.iter().map(|v| v.0).collect())))
    }

    fn pixel_shuffle(&mut self, x: &Var, scale: usize) -> Result<Var> {
        let y = kernels::pixel_shuffle(self.get(x)?, scale)?;
        Ok(self.push(y, Op::Shuffle { x: x.0, scale }))
    }

    fn max_pool(&mut self, x: &Var, kernel: usize, stride: usize) -> Result<Var> {
        let (y, argmax) = kernels::max_pool_with_argmax(self.get(x)?, kernel, stride)?;
        Ok(self.push(y, Op::MaxPool { x: x.0, argmax }))
    }

    fn resize_bilinear(&mut self, x: &Var, out_h: usize, out_w: usize) -> Result<Var> {
        let y = kernels::bilinear_resize(self.get(x)?, out_h, out_w)?;
        Ok(self.push(y, Op::Resize { x: x.0 }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_gradient() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Tensor::new([1, 1, 1, 2], vec![-1.0, 2.0]).unwrap());
        let y = t.relu(&x).unwrap();
        let s = t.sum(y).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn subtraction_gradient_signs() {
        let mut t = Tape::<f32>::new();
        let a = t.leaf(Tensor::full([1, 2, 2, 2], 0.3));
        let b = t.leaf(Tensor::full([1, 2, 2, 2], -1.7));
        let d = t.sub(&a, &b).unwrap();
        let s = t.sum(d).unwrap();
        let g = t.backward(s).unwrap();
        assert!(g.get(a).unwrap().data().iter().all(|&v| v == 1.0));
        assert!(g.get(b).unwrap().data().iter().all(|&v| v == -1.0));
    }

    #[test]
    fn shared_operand_accumulates() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Tensor::full([1, 1, 1, 3], 2.0));
        let y = t.mul(&x, &x).unwrap();
        let z = t.add(&y, &x).unwrap();
        let s = t.sum(z).unwrap();
        let g = t.backward(s).unwrap();
        assert!(g.get(x).unwrap().data().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn foreign_variable_is_internal_error() {
        let mut t = Tape::<f32>::new();
        let x = t.leaf(Tensor::zeros([1, 1, 1, 1]));
        let mut other = Tape::<f32>::new();
        other.leaf(Tensor::zeros([1, 1, 1, 1]));
        let stray = other.leaf(Tensor::zeros([1, 1, 1, 1]));
        assert!(matches!(t.relu(&stray), Err(Error::Internal(_))));
        assert!(matches!(t.backward(stray), Err(Error::Internal(_))));
        assert!(t.backward(x).is_ok());
    }

    #[test]
    fn non_scalar_backward_rejected() {
        let mut t = Tape::<f32>::new();
        let x = t.leaf(Tensor::zeros([1, 1, 2, 1]));
        assert!(matches!(t.backward(x), Err(Error::Shape(_))));
    }

    #[test]
    fn l1_gradient_is_scaled_sign() {
        let mut t = Tape::<f64>::new();
        let p = t.leaf(Tensor::new([1, 1, 1, 4], vec![1.0, -1.0, 0.5, 0.0]).unwrap());
        let q = t.leaf(Tensor::new([1, 1, 1, 4], vec![0.0, 0.0, 0.5, 2.0]).unwrap());
        let l = t.l1_loss(p, q).unwrap();
        assert_eq!(t.value(l).data()[0], (1.0 + 1.0 + 0.0 + 2.0) / 4.0);
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(p).unwrap().data(), &[0.25, -0.25, 0.0, -0.25]);
    }
}
