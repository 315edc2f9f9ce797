//! Forward and backward kernels over flat slices.
//!
//! Layout is channel-major: a sequence batch is `[batch, channels, length]`
//! and convolution kernels are `[k, c_in, c_out]`. Convolution is
//! cross-correlation. Work is split over batch items; weight-gradient
//! partials are formed per fixed-size chunk of items and summed in chunk
//! order, so results do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tensor::Real;
use crate::{Error, Result};

/// Batch items per weight-gradient partial.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Same,
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<T: Real>(self, v: T) -> T {
        match self {
            Activation::Relu => v.max(T::zero()),
            Activation::Identity => v,
        }
    }

    /// Gradient gate computed from the activation's output.
    #[inline]
    fn gate<T: Real>(self, out: T, dy: T) -> T {
        match self {
            Activation::Relu => {
                if out > T::zero() {
                    dy
                } else {
                    T::zero()
                }
            }
            Activation::Identity => dy,
        }
    }
}

/// Sum of products with eight independent accumulators so the loop
/// vectorizes; the final combination order is fixed.
#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for j in 0..8 {
            acc[j] += x[j] * y[j];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

#[inline]
fn sum<T: Real>(x: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let mut c = x.chunks_exact(8);
    for v in &mut c {
        for j in 0..8 {
            acc[j] += v[j];
        }
    }
    let tail: T = c.remainder().iter().copied().sum();
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Sums per-chunk partial gradients in chunk order.
fn reduce_partials<T: Real>(parts: Vec<Vec<T>>, len: usize) -> Vec<T> {
    let mut total = vec![T::zero(); len];
    for p in parts {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub len_in: usize,
    pub len_out: usize,
    pub k: usize,
    pub dilation: usize,
    pub pad_left: usize,
}

impl ConvGeom {
    pub fn new(input: &[usize], kernel: &[usize], dilation: usize, padding: Padding) -> Result<Self> {
        let [batch, c_in, len_in] = *input else {
            return Err(Error::Shape(format!("conv1d input must be [batch, c_in, len], got {input:?}")));
        };
        let [k, kc_in, c_out] = *kernel else {
            return Err(Error::Shape(format!("conv1d kernel must be [k, c_in, c_out], got {kernel:?}")));
        };
        if kc_in != c_in {
            return Err(Error::Shape(format!(
                "conv1d kernel expects {kc_in} input channels, input has {c_in}"
            )));
        }
        if k < 1 || dilation < 1 {
            return Err(Error::Shape(format!("conv1d needs k >= 1 and dilation >= 1 (k={k}, d={dilation})")));
        }
        let span = (k - 1) * dilation;
        let (len_out, pad_left) = match padding {
            Padding::Same => (len_in, span / 2),
            Padding::Valid => {
                if span >= len_in {
                    return Err(Error::Shape(format!(
                        "kernel span {} wider than input length {len_in}",
                        span + 1
                    )));
                }
                (len_in - span, 0)
            }
        };
        Ok(Self {
            batch,
            c_in,
            c_out,
            len_in,
            len_out,
            k,
            dilation,
            pad_left,
        })
    }

    /// Output range `[t0, t1)` touched by tap `k` and the matching input
    /// start. `None` when the tap falls entirely in the padding.
    #[inline]
    fn tap(&self, k: usize) -> Option<(usize, usize, usize)> {
        let off = (k * self.dilation) as isize - self.pad_left as isize;
        let t0 = (-off).max(0);
        let t1 = (self.len_in as isize - off).min(self.len_out as isize);
        (t1 > t0).then(|| (t0 as usize, t1 as usize, (t0 + off) as usize))
    }

    pub fn out_shape(&self) -> [usize; 3] {
        [self.batch, self.c_out, self.len_out]
    }
}

pub fn conv1d_forward<T: Real>(
    x: &[T],
    w: &[T],
    bias: Option<&[T]>,
    g: &ConvGeom,
    act: Activation,
) -> Vec<T> {
    let in_item = g.c_in * g.len_in;
    let out_item = g.c_out * g.len_out;
    let mut y = vec![T::zero(); g.batch * out_item];
    y.par_chunks_mut(out_item)
        .zip(x.par_chunks(in_item))
        .for_each(|(yb, xb)| {
            for co in 0..g.c_out {
                let yr = &mut yb[co * g.len_out..(co + 1) * g.len_out];
                if let Some(b) = bias {
                    yr.iter_mut().for_each(|v| *v = b[co]);
                }
                for ci in 0..g.c_in {
                    let xr = &xb[ci * g.len_in..(ci + 1) * g.len_in];
                    for k in 0..g.k {
                        let wv = w[(k * g.c_in + ci) * g.c_out + co];
                        let Some((t0, t1, s0)) = g.tap(k) else { continue };
                        axpy(wv, &xr[s0..s0 + (t1 - t0)], &mut yr[t0..t1]);
                    }
                }
                if act != Activation::Identity {
                    yr.iter_mut().for_each(|v| *v = act.apply(*v));
                }
            }
        });
    y
}

pub struct ConvGrads<T> {
    pub dx: Vec<T>,
    pub dw: Vec<T>,
    pub db: Vec<T>,
}

/// `out` is the forward output (post-activation); `dy` its gradient.
pub fn conv1d_backward<T: Real>(
    x: &[T],
    w: &[T],
    out: &[T],
    dy: &[T],
    g: &ConvGeom,
    act: Activation,
) -> ConvGrads<T> {
    let in_item = g.c_in * g.len_in;
    let out_item = g.c_out * g.len_out;
    let gy: Vec<T> = out.iter().zip(dy).map(|(&o, &d)| act.gate(o, d)).collect();
    let mut dx = vec![T::zero(); x.len()];
    let wlen = g.k * g.c_in * g.c_out;

    let parts: Vec<(Vec<T>, Vec<T>)> = dx
        .par_chunks_mut(GRAD_CHUNK * in_item)
        .zip(x.par_chunks(GRAD_CHUNK * in_item))
        .zip(gy.par_chunks(GRAD_CHUNK * out_item))
        .map(|((dxc, xc), gyc)| {
            let mut dw = vec![T::zero(); wlen];
            let mut db = vec![T::zero(); g.c_out];
            for ((dxb, xb), gyb) in dxc.chunks_mut(in_item).zip(xc.chunks(in_item)).zip(gyc.chunks(out_item)) {
                for co in 0..g.c_out {
                    let gr = &gyb[co * g.len_out..(co + 1) * g.len_out];
                    db[co] += sum(gr);
                    for ci in 0..g.c_in {
                        let xr = &xb[ci * g.len_in..(ci + 1) * g.len_in];
                        let dxr = &mut dxb[ci * g.len_in..(ci + 1) * g.len_in];
                        for k in 0..g.k {
                            let wi = (k * g.c_in + ci) * g.c_out + co;
                            let Some((t0, t1, s0)) = g.tap(k) else { continue };
                            let s1 = s0 + (t1 - t0);
                            dw[wi] += dot(&gr[t0..t1], &xr[s0..s1]);
                            axpy(w[wi], &gr[t0..t1], &mut dxr[s0..s1]);
                        }
                    }
                }
            }
            (dw, db)
        })
        .collect();

    let (dws, dbs): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    ConvGrads {
        dx,
        dw: reduce_partials(dws, wlen),
        db: reduce_partials(dbs, g.c_out),
    }
}

/// Max over disjoint pairs along the last axis of `[rows, len]`. Returns the
/// pooled values and, per output, whether the second element won (ties go
/// to the first).
pub fn maxpool2_forward<T: Real>(x: &[T], len: usize) -> Result<(Vec<T>, Vec<bool>)> {
    if len % 2 != 0 {
        return Err(Error::Shape(format!("max-pool over odd length {len}")));
    }
    let mut y = Vec::with_capacity(x.len() / 2);
    let mut second = Vec::with_capacity(x.len() / 2);
    for pair in x.chunks_exact(2) {
        let pick = pair[1] > pair[0];
        y.push(if pick { pair[1] } else { pair[0] });
        second.push(pick);
    }
    Ok((y, second))
}

pub fn maxpool2_backward<T: Real>(dy: &[T], second: &[bool]) -> Vec<T> {
    let mut dx = vec![T::zero(); dy.len() * 2];
    for (i, (&d, &s)) in dy.iter().zip(second).enumerate() {
        dx[2 * i + s as usize] = d;
    }
    dx
}

/// Affine map over the last axis: `x [rows, d_in] · w [d_in, d_out] + b`.
pub fn dense_forward<T: Real>(
    x: &[T],
    w: &[T],
    bias: Option<&[T]>,
    d_in: usize,
    d_out: usize,
    act: Activation,
) -> Vec<T> {
    let mut y = vec![T::zero(); x.len() / d_in * d_out];
    y.par_chunks_mut(d_out).zip(x.par_chunks(d_in)).for_each(|(yr, xr)| {
        if let Some(b) = bias {
            yr.copy_from_slice(b);
        }
        for (i, &xv) in xr.iter().enumerate() {
            axpy(xv, &w[i * d_out..(i + 1) * d_out], yr);
        }
        if act != Activation::Identity {
            yr.iter_mut().for_each(|v| *v = act.apply(*v));
        }
    });
    y
}

pub struct DenseGrads<T> {
    pub dx: Vec<T>,
    pub dw: Vec<T>,
    pub db: Vec<T>,
}

pub fn dense_backward<T: Real>(
    x: &[T],
    w: &[T],
    out: &[T],
    dy: &[T],
    d_in: usize,
    d_out: usize,
    act: Activation,
) -> DenseGrads<T> {
    let gy: Vec<T> = out.iter().zip(dy).map(|(&o, &d)| act.gate(o, d)).collect();
    let mut dx = vec![T::zero(); x.len()];
    let parts: Vec<(Vec<T>, Vec<T>)> = dx
        .par_chunks_mut(GRAD_CHUNK * d_in)
        .zip(x.par_chunks(GRAD_CHUNK * d_in))
        .zip(gy.par_chunks(GRAD_CHUNK * d_out))
        .map(|((dxc, xc), gyc)| {
            let mut dw = vec![T::zero(); d_in * d_out];
            let mut db = vec![T::zero(); d_out];
            for ((dxr, xr), gr) in dxc.chunks_mut(d_in).zip(xc.chunks(d_in)).zip(gyc.chunks(d_out)) {
                for (dbv, &gv) in db.iter_mut().zip(gr) {
                    *dbv += gv;
                }
                for i in 0..d_in {
                    let wr = &w[i * d_out..(i + 1) * d_out];
                    dxr[i] = dot(gr, wr);
                    axpy(xr[i], gr, &mut dw[i * d_out..(i + 1) * d_out]);
                }
            }
            (dw, db)
        })
        .collect();
    let (dws, dbs): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    DenseGrads {
        dx,
        dw: reduce_partials(dws, d_in * d_out),
        db: reduce_partials(dbs, d_out),
    }
}

/// Row-wise softmax over the last axis of width `classes`, max-subtracted.
pub fn softmax_rows<T: Real>(logits: &[T], classes: usize) -> Vec<T> {
    let mut p = logits.to_vec();
    for row in p.chunks_mut(classes) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut z = T::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v = *v / z;
        }
    }
    p
}

/// Mean cross-entropy over positions with a target. Returns the loss, the
/// softmax probabilities and the number of contributing positions.
pub fn masked_ce_forward<T: Real>(
    logits: &[T],
    targets: &[Option<usize>],
    classes: usize,
) -> Result<(T, Vec<T>, usize)> {
    if logits.len() != targets.len() * classes {
        return Err(Error::Shape(format!(
            "{} logits for {} positions of {classes} classes",
            logits.len(),
            targets.len()
        )));
    }
    let n_valid = targets.iter().filter(|t| t.is_some()).count();
    if n_valid == 0 {
        return Err(Error::EmptyBatch);
    }
    let mut total = T::zero();
    for (row, target) in logits.chunks(classes).zip(targets) {
        let Some(c) = *target else { continue };
        if c >= classes {
            return Err(Error::Shape(format!("target class {c} out of range")));
        }
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = row.iter().map(|&v| (v - m).exp()).sum::<T>().ln() + m;
        total += lse - row[c];
    }
    let probs = softmax_rows(logits, classes);
    Ok((total / T::of(n_valid as f64), probs, n_valid))
}

pub fn masked_ce_backward<T: Real>(
    probs: &[T],
    targets: &[Option<usize>],
    classes: usize,
    n_valid: usize,
    dloss: T,
) -> Vec<T> {
    let scale = dloss / T::of(n_valid as f64);
    let mut dl = vec![T::zero(); probs.len()];
    for ((drow, prow), target) in dl.chunks_mut(classes).zip(probs.chunks(classes)).zip(targets) {
        let Some(c) = *target else { continue };
        for (d, &p) in drow.iter_mut().zip(prow) {
            *d = p * scale;
        }
        drow[c] -= scale;
    }
    dl
}

/// `[batch, a, b]` to `[batch, b, a]`.
pub fn transpose12<T: Real>(x: &[T], batch: usize, a: usize, b: usize) -> Vec<T> {
    let mut y = vec![T::zero(); x.len()];
    for n in 0..batch {
        let src = &x[n * a * b..(n + 1) * a * b];
        let dst = &mut y[n * a * b..(n + 1) * a * b];
        for i in 0..a {
            for j in 0..b {
                dst[j * a + i] = src[i * b + j];
            }
        }
    }
    y
}
