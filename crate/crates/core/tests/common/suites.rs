//! Gradient-check suites, each returning the worst relative error over the
//! given seeds.

use std::ops::Range;

use ppgstage::model::{init_params, res_block_forward, forward_logits, BoundParams, ModelSpec};
use ppgstage::tensorcore::{Activation, Padding, Tape, Tensor, Var};
use ppgstage::WINDOW_SAMPLES;
use rand::Rng;

use super::{grad_check, max_rel, project, rand_tensor, rng, GradSums};

pub const H: f64 = 1e-5;
pub const DILATIONS: [usize; 6] = [1, 2, 4, 8, 16, 32];

fn act(rng: &mut impl Rng) -> Activation {
    if rng.gen_bool(0.5) {
        Activation::Relu
    } else {
        Activation::Identity
    }
}

/// Same-padded convolutions over every dilation in 1..32 with kernels 3
/// and 7, plus valid-padded ones where the span fits.
pub fn conv1d(seeds: Range<u64>) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in seeds {
        let mut r = rng(seed);
        for &d in &DILATIONS {
            let k = if r.gen_bool(0.5) { 3 } else { 7 };
            let (cin, cout, len) = (r.gen_range(1..4), r.gen_range(1..4), r.gen_range(20..70));
            let padding = if (k - 1) * d + 1 < len && r.gen_bool(0.3) {
                Padding::Valid
            } else {
                Padding::Same
            };
            let a = act(&mut r);
            let x = rand_tensor(&mut r, &[2, cin, len], 1.0);
            let w = rand_tensor(&mut r, &[k, cin, cout], 0.5);
            let b = rand_tensor(&mut r, &[cout], 0.5);
            let out_len = match padding {
                Padding::Same => len,
                Padding::Valid => len - (k - 1) * d,
            };
            let proj = rand_tensor(&mut r, &[2 * cout * out_len, 1], 1.0);
            let build = |t: &mut Tape<f64>, v: &[Var]| {
                let y = t.conv1d(v[0], v[1], Some(v[2]), d, padding, a).unwrap();
                project(t, y, &proj)
            };
            worst = worst.max(max_rel(&grad_check(&[x, w, b], &build, 40, H, &mut r)));
        }
    }
    worst
}

pub fn dense(seeds: Range<u64>) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in seeds {
        let mut r = rng(seed);
        let (n, din, dout) = (r.gen_range(1..5), r.gen_range(1..9), r.gen_range(1..6));
        let a = act(&mut r);
        let x = rand_tensor(&mut r, &[n, din], 1.0);
        let w = rand_tensor(&mut r, &[din, dout], 0.5);
        let b = rand_tensor(&mut r, &[dout], 0.5);
        let proj = rand_tensor(&mut r, &[n * dout, 1], 1.0);
        let build = |t: &mut Tape<f64>, v: &[Var]| {
            let y = t.dense(v[0], v[1], Some(v[2]), a).unwrap();
            project(t, y, &proj)
        };
        worst = worst.max(max_rel(&grad_check(&[x, w, b], &build, 64, H, &mut r)));
    }
    worst
}

pub fn maxpool(seeds: Range<u64>) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in seeds {
        let mut r = rng(seed);
        let (c, len) = (r.gen_range(1..4), 2 * r.gen_range(1..15));
        let x = rand_tensor(&mut r, &[2, c, len], 1.0);
        let proj = rand_tensor(&mut r, &[2 * c * (len / 2), 1], 1.0);
        let build = |t: &mut Tape<f64>, v: &[Var]| {
            let y = t.maxpool2(v[0]).unwrap();
            project(t, y, &proj)
        };
        worst = worst.max(max_rel(&grad_check(&[x], &build, 64, H, &mut r)));
    }
    worst
}

/// One feature block with a 1×1 skip (input and filter counts differ),
/// checked with respect to its input and all of its parameters.
pub fn res_block(seeds: Range<u64>) -> f64 {
    let spec = ModelSpec::reduced();
    let mut worst: f64 = 0.0;
    for seed in seeds {
        let mut r = rng(seed);
        let index = 2 * r.gen_range(1..4);
        let block = spec.block(index).unwrap();
        assert_ne!(block.m, block.i);
        let store = init_params::<f64>(&spec, seed).unwrap();
        let prefix = format!("feature.{index}.");
        let names: Vec<String> = store.names().filter(|n| n.starts_with(&prefix)).map(String::from).collect();
        let len = 2 * r.gen_range(4..12);
        let mut inputs = vec![rand_tensor(&mut r, &[2, block.m, len], 1.0)];
        // Perturb biases away from zero so the check covers them too.
        inputs.extend(names.iter().map(|n| {
            let mut t = store.get(n).unwrap().clone();
            for v in t.data_mut() {
                *v += r.gen_range(-0.1..0.1);
            }
            t
        }));
        let proj = rand_tensor(&mut r, &[2 * block.i * (len / 2), 1], 1.0);
        let build = |t: &mut Tape<f64>, v: &[Var]| {
            let bound = BoundParams::from_vars(names.iter().cloned().zip(v[1..].iter().copied()).collect());
            let y = res_block_forward(t, &bound, &block, Activation::Relu, v[0]).unwrap();
            project(t, y, &proj)
        };
        worst = worst.max(max_rel(&grad_check(&inputs, &build, 24, H, &mut r)));
    }
    worst
}

/// The reduced-width model end to end under masked cross-entropy; the
/// error is pooled over sampled coordinates of every parameter.
pub fn full_model(seeds: Range<u64>) -> f64 {
    seeds.map(|seed| full_model_seed(seed, H)).fold(0.0, f64::max)
}

pub fn full_model_seed(seed: u64, h: f64) -> f64 {
    let spec = ModelSpec::reduced();
    {
        let mut r = rng(seed);
        let store = init_params::<f64>(&spec, seed).unwrap();
        let names: Vec<String> = store.names().map(String::from).collect();
        let (b, q) = (2, 2);
        let x = rand_tensor(&mut r, &[b, q * WINDOW_SAMPLES], 1.5);
        let targets: Vec<Option<usize>> = (0..b * q)
            .map(|i| if i == 1 { None } else { Some(r.gen_range(0..4)) })
            .collect();
        // Zero-initialized biases put some ReLU inputs exactly on the kink
        // (a receptive field of all-zero activations); jitter them so the
        // check runs at a differentiable point.
        let mut inputs: Vec<Tensor<f64>> = names
            .iter()
            .map(|n| {
                let mut t = store.get(n).unwrap().clone();
                if n.ends_with("bias") {
                    for v in t.data_mut() {
                        *v += r.gen_range(-0.05..0.05);
                    }
                }
                t
            })
            .collect();
        inputs.push(x);
        let build = |t: &mut Tape<f64>, v: &[Var]| {
            let bound = BoundParams::from_vars(names.iter().cloned().zip(v.iter().copied()).collect());
            let logits = forward_logits(t, &bound, &spec, *v.last().unwrap()).unwrap();
            t.masked_softmax_ce(logits, &targets).unwrap()
        };
        let sums = grad_check(&inputs, &build, 2, h, &mut r);
        GradSums::combine(&sums).rel()
    }
}
