//! Reverse-mode tape over the kernels in [`super::ops`].

use super::ops::{self, Activation, ConvGeom, Padding};
use super::tensor::{Real, Tensor};
use crate::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Conv1d {
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        geom: ConvGeom,
        act: Activation,
    },
    MaxPool2 {
        input: Var,
        second: Vec<bool>,
    },
    Dense {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        act: Activation,
    },
    Relu {
        input: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Reshape {
        input: Var,
    },
    Transpose12 {
        input: Var,
    },
    MaskedCe {
        logits: Var,
        probs: Vec<T>,
        targets: Vec<Option<usize>>,
        n_valid: usize,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Records forward values; [`Tape::backward`] walks the records in reverse.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// `input [batch, c_in, len]`, `kernel [k, c_in, c_out]`, `bias [c_out]`.
    pub fn conv1d(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        dilation: usize,
        padding: Padding,
        act: Activation,
    ) -> Result<Var> {
        let geom = ConvGeom::new(self.shape(input), self.shape(kernel), dilation, padding)?;
        if let Some(b) = bias {
            if self.shape(b) != [geom.c_out] {
                return Err(Error::Shape(format!(
                    "conv1d bias {:?} does not match {} output channels",
                    self.shape(b),
                    geom.c_out
                )));
            }
        }
        let y = ops::conv1d_forward(
            self.value(input).data(),
            self.value(kernel).data(),
            bias.map(|b| self.value(b).data()),
            &geom,
            act,
        );
        let value = Tensor::new(geom.out_shape().to_vec(), y)?;
        Ok(self.push(
            value,
            Op::Conv1d {
                input,
                kernel,
                bias,
                geom,
                act,
            },
        ))
    }

    /// Pairwise max over the last axis.
    pub fn maxpool2(&mut self, input: Var) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        let len = *shape.last().ok_or_else(|| Error::Shape("max-pool of a scalar".into()))?;
        let (y, second) = ops::maxpool2_forward(self.value(input).data(), len)?;
        let mut out_shape = shape;
        *out_shape.last_mut().unwrap() = len / 2;
        let value = Tensor::new(out_shape, y)?;
        Ok(self.push(value, Op::MaxPool2 { input, second }))
    }

    /// Affine map over the last axis; `weight [d_in, d_out]`, `bias [d_out]`.
    pub fn dense(&mut self, input: Var, weight: Var, bias: Option<Var>, act: Activation) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        let d_in = *shape.last().ok_or_else(|| Error::Shape("dense on a scalar".into()))?;
        let &[w_in, d_out] = self.shape(weight) else {
            return Err(Error::Shape(format!("dense weight must be rank 2, got {:?}", self.shape(weight))));
        };
        if w_in != d_in {
            return Err(Error::Shape(format!("dense weight expects {w_in} inputs, input has {d_in}")));
        }
        if let Some(b) = bias {
            if self.shape(b) != [d_out] {
                return Err(Error::Shape(format!("dense bias {:?} does not match {d_out}", self.shape(b))));
            }
        }
        let y = ops::dense_forward(
            self.value(input).data(),
            self.value(weight).data(),
            bias.map(|b| self.value(b).data()),
            d_in,
            d_out,
            act,
        );
        let mut out_shape = shape;
        *out_shape.last_mut().unwrap() = d_out;
        let value = Tensor::new(out_shape, y)?;
        Ok(self.push(
            value,
            Op::Dense {
                input,
                weight,
                bias,
                act,
            },
        ))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let value = self.value(input).map(|v| v.max(T::zero()));
        self.push(value, Op::Relu { input })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "cannot sum tensors of shape {:?} and {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b));
        Ok(self.push(value, Op::Add { a, b }))
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(input).clone().reshape(shape.to_vec())?;
        Ok(self.push(value, Op::Reshape { input }))
    }

    /// `[batch, a, b]` to `[batch, b, a]`.
    pub fn transpose12(&mut self, input: Var) -> Result<Var> {
        let &[n, a, b] = self.shape(input) else {
            return Err(Error::Shape(format!("transpose needs rank 3, got {:?}", self.shape(input))));
        };
        let y = ops::transpose12(self.value(input).data(), n, a, b);
        let value = Tensor::new(vec![n, b, a], y)?;
        Ok(self.push(value, Op::Transpose12 { input }))
    }

    /// Mean softmax cross-entropy over positions whose target is `Some`.
    /// `logits` has classes on its last axis; `targets` has one entry per
    /// row. Positions without a target contribute neither loss nor gradient.
    pub fn masked_softmax_ce(&mut self, logits: Var, targets: &[Option<usize>]) -> Result<Var> {
        let classes = *self.shape(logits).last().ok_or_else(|| Error::Shape("logits of a scalar".into()))?;
        let (loss, probs, n_valid) = ops::masked_ce_forward(self.value(logits).data(), targets, classes)?;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::MaskedCe {
                logits,
                probs,
                targets: targets.to_vec(),
                n_valid,
            },
        ))
    }

    /// Gradients of the scalar `loss` with respect to every recorded value.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).len() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(T::one()));

        for idx in (0..=loss.0).rev() {
            let Some(dy) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(dy);
                    continue;
                }
                Op::Conv1d {
                    input,
                    kernel,
                    bias,
                    geom,
                    act,
                } => {
                    let g = ops::conv1d_backward(
                        self.value(*input).data(),
                        self.value(*kernel).data(),
                        node.value.data(),
                        dy.data(),
                        geom,
                        *act,
                    );
                    accumulate(&mut grads, *input, self.shape(*input), g.dx);
                    accumulate(&mut grads, *kernel, self.shape(*kernel), g.dw);
                    if let Some(b) = bias {
                        accumulate(&mut grads, *b, self.shape(*b), g.db);
                    }
                }
                Op::MaxPool2 { input, second } => {
                    let dx = ops::maxpool2_backward(dy.data(), second);
                    accumulate(&mut grads, *input, self.shape(*input), dx);
                }
                Op::Dense {
                    input,
                    weight,
                    bias,
                    act,
                } => {
                    let d_in = *self.shape(*input).last().unwrap();
                    let d_out = self.shape(*weight)[1];
                    let g = ops::dense_backward(
                        self.value(*input).data(),
                        self.value(*weight).data(),
                        node.value.data(),
                        dy.data(),
                        d_in,
                        d_out,
                        *act,
                    );
                    accumulate(&mut grads, *input, self.shape(*input), g.dx);
                    accumulate(&mut grads, *weight, self.shape(*weight), g.dw);
                    if let Some(b) = bias {
                        accumulate(&mut grads, *b, self.shape(*b), g.db);
                    }
                }
                Op::Relu { input } => {
                    let dx = node
                        .value
                        .data()
                        .iter()
                        .zip(dy.data())
                        .map(|(&o, &d)| if o > T::zero() { d } else { T::zero() })
                        .collect();
                    accumulate(&mut grads, *input, self.shape(*input), dx);
                }
                Op::Add { a, b } => {
                    accumulate(&mut grads, *a, self.shape(*a), dy.data().to_vec());
                    accumulate(&mut grads, *b, self.shape(*b), dy.into_data());
                }
                Op::Reshape { input } => {
                    accumulate(&mut grads, *input, self.shape(*input), dy.into_data());
                }
                Op::Transpose12 { input } => {
                    let s = node.value.shape();
                    let dx = ops::transpose12(dy.data(), s[0], s[1], s[2]);
                    accumulate(&mut grads, *input, self.shape(*input), dx);
                }
                Op::MaskedCe {
                    logits,
                    probs,
                    targets,
                    n_valid,
                } => {
                    let classes = *self.shape(*logits).last().unwrap();
                    let dl = ops::masked_ce_backward(probs, targets, classes, *n_valid, dy.data()[0]);
                    accumulate(&mut grads, *logits, self.shape(*logits), dl);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Tensor<T>>], v: Var, shape: &[usize], g: Vec<T>) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (a, b) in existing.data_mut().iter_mut().zip(g) {
                *a += b;
            }
        }
        slot @ None => {
            *slot = Some(Tensor::new(shape.to_vec(), g).expect("gradient matches value shape"));
        }
    }
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}
