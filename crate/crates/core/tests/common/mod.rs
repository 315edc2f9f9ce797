//! Oracles and helpers shared by the integration tests and the acceptance
//! suite. Everything here is computed independently of the library code it
//! checks.

#![allow(dead_code)]

pub mod mask;
pub mod suites;

use ppgstage::sigprep::WindowGrid;
use ppgstage::tensorcore::{Activation, Tape, Tensor, Var};
use ppgstage::traineval::StageLabel;
use ppgstage::WINDOW_SAMPLES;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_tensor(rng: &mut impl Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

/// Reduces any tape value to a scalar through a fixed random projection,
/// so every output element carries a distinct weight.
pub fn project(tape: &mut Tape<f64>, out: Var, weights: &Tensor<f64>) -> Var {
    let n = tape.value(out).len();
    let flat = tape.reshape(out, &[1, n]).unwrap();
    let w = tape.leaf(weights.clone());
    tape.dense(flat, w, None, Activation::Identity).unwrap()
}

/// Squared-norm sums over the checked coordinates of one input.
#[derive(Debug, Clone, Copy, Default)]
pub struct GradSums {
    pub diff: f64,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradSums {
    /// Norm-wise relative error `‖a − n‖ / max(‖a‖, ‖n‖)`.
    pub fn rel(&self) -> f64 {
        let scale = self.analytic.sqrt().max(self.numeric.sqrt());
        if scale == 0.0 {
            0.0
        } else {
            self.diff.sqrt() / scale
        }
    }

    pub fn combine(all: &[GradSums]) -> GradSums {
        all.iter().fold(GradSums::default(), |a, b| GradSums {
            diff: a.diff + b.diff,
            analytic: a.analytic + b.analytic,
            numeric: a.numeric + b.numeric,
        })
    }
}

/// Relative disagreement of the two one-sided slopes above which the
/// interval `[x - h, x + h]` is taken to contain a switch point (a ReLU or
/// max-pool kink) rather than smooth curvature.
const KINK_TOL: f64 = 1e-3;
/// Step reductions (each by 10×) tried on a coordinate whose interval
/// contains a switch point.
const KINK_RETRIES: usize = 3;

/// Compares analytic gradients of the scalar built by `build` against
/// central differences, over up to `coords` random coordinates per input.
///
/// Piecewise-linear layers make the loss non-differentiable on a set of
/// measure zero, and a central difference whose interval straddles such a
/// point measures the average of two slopes. Each coordinate is therefore
/// checked for a kink (forward and backward slopes disagreeing) and, if one
/// is found, re-measured with a smaller step. Every sampled coordinate
/// counts towards the error.
pub fn grad_check(
    inputs: &[Tensor<f64>],
    build: &dyn Fn(&mut Tape<f64>, &[Var]) -> Var,
    coords: usize,
    h: f64,
    rng: &mut impl Rng,
) -> Vec<GradSums> {
    let eval = |xs: &[Tensor<f64>]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x.clone())).collect();
        let loss = build(&mut tape, &vars);
        tape.value(loss).data()[0]
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone())).collect();
    let loss = build(&mut tape, &vars);
    let grads = tape.backward(loss).unwrap();

    let base = tape.value(loss).data()[0];
    let mut out = Vec::with_capacity(inputs.len());
    let mut xs = inputs.to_vec();
    for (i, x) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[i]).map(|g| g.data().to_vec()).unwrap_or_else(|| vec![0.0; x.len()]);
        let picks: Vec<usize> = if x.len() <= coords {
            (0..x.len()).collect()
        } else {
            (0..coords).map(|_| rng.gen_range(0..x.len())).collect()
        };
        let mut s = GradSums::default();
        for &c in &picks {
            let orig = xs[i].data()[c];
            let mut step = h;
            let numeric = loop {
                xs[i].data_mut()[c] = orig + step;
                let up = eval(&xs);
                xs[i].data_mut()[c] = orig - step;
                let down = eval(&xs);
                xs[i].data_mut()[c] = orig;
                let (fwd, bwd) = ((up - base) / step, (base - down) / step);
                let kinked = (fwd - bwd).abs() > KINK_TOL * fwd.abs().max(bwd.abs()) + 1e-10;
                if !kinked || step <= h * 0.1f64.powi(KINK_RETRIES as i32) * 1.5 {
                    break (up - down) / (2.0 * step);
                }
                step *= 0.1;
            };
            s.diff += (analytic[c] - numeric).powi(2);
            s.analytic += analytic[c].powi(2);
            s.numeric += numeric.powi(2);
        }
        out.push(s);
    }
    out
}

/// Largest per-input relative error.
pub fn max_rel(sums: &[GradSums]) -> f64 {
    sums.iter().map(GradSums::rel).fold(0.0, f64::max)
}

/// Accuracy, kappa, weighted F1 and macro F1 straight from label pairs.
pub fn brute_metrics(truth: &[usize], pred: &[usize]) -> [f64; 4] {
    let n = truth.len() as f64;
    let agree = truth.iter().zip(pred).filter(|(t, p)| t == p).count() as f64;
    let p_o = agree / n;
    let count = |v: &[usize], k: usize| v.iter().filter(|&&x| x == k).count() as f64;
    let p_e: f64 = (0..4).map(|k| count(truth, k) / n * count(pred, k) / n).sum();
    let single = truth.iter().chain(pred).all(|&x| x == truth[0]);
    let kappa = if single { 1.0 } else { (p_o - p_e) / (1.0 - p_e) };

    let mut weighted = 0.0;
    let mut macro_sum = 0.0;
    let mut present = 0.0;
    for k in 0..4 {
        let tp = truth.iter().zip(pred).filter(|(&t, &p)| t == k && p == k).count() as f64;
        let fp = truth.iter().zip(pred).filter(|(&t, &p)| t != k && p == k).count() as f64;
        let fn_ = truth.iter().zip(pred).filter(|(&t, &p)| t == k && p != k).count() as f64;
        if tp + fp + fn_ == 0.0 {
            continue;
        }
        let f1 = 2.0 * tp / (2.0 * tp + fp + fn_);
        weighted += f1 * count(truth, k);
        macro_sum += f1;
        present += 1.0;
    }
    [p_o, kappa, weighted / n, macro_sum / present]
}

/// Source indices of contiguous super-windows by direct enumeration.
pub fn brute_contiguous(w: usize, n: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < w {
        out.push((start..start + n).map(|j| if j < w { j as i64 } else { -1 }).collect());
        start += n;
    }
    out
}

/// Source indices of sparse super-windows by direct enumeration.
pub fn brute_sparse(w: usize, k: usize, stride: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for s in 0..w {
        let idx: Vec<usize> = (0..k).map(|j| s + j * stride).collect();
        if idx.iter().all(|&i| i < w) {
            out.push(idx.into_iter().map(|i| i as i64).collect());
        }
    }
    out
}

/// A grid whose window `j` is filled with the value `j` and labeled from
/// `labels` cyclically.
pub fn indexed_grid(id: &str, w: usize, labels: &[StageLabel]) -> WindowGrid {
    let windows = (0..w).flat_map(|j| std::iter::repeat(j as f32).take(WINDOW_SAMPLES)).collect();
    let labels = (0..w).map(|j| labels[j % labels.len()]).collect();
    WindowGrid::new(id, windows, labels).unwrap()
}

/// A grid of random unit-scale windows with random labels (about a tenth
/// unscored).
pub fn random_grid(id: &str, w: usize, rng: &mut impl Rng) -> WindowGrid {
    let windows = (0..w * WINDOW_SAMPLES).map(|_| rng.gen_range(-1.5f32..1.5)).collect();
    let labels = (0..w)
        .map(|_| {
            if rng.gen_bool(0.1) {
                StageLabel::Unscored
            } else {
                StageLabel::CLASSES[rng.gen_range(0..4)]
            }
        })
        .collect();
    WindowGrid::new(id, windows, labels).unwrap()
}

/// Magnitude at `f` of the DFT of a finite real sequence sampled at `fs`.
pub fn dft_magnitude(h: &[f64], f: f64, fs: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * f / fs;
    let (mut re, mut im) = (0.0, 0.0);
    for (n, &v) in h.iter().enumerate() {
        let (s, c) = (w * n as f64).sin_cos();
        re += v * c;
        im -= v * s;
    }
    re.hypot(im)
}

/// The first `len` samples of the causal impulse response.
pub fn impulse_response(filter: &ppgstage::sigprep::SosFilter, len: usize) -> Vec<f64> {
    let mut x = vec![0.0; len];
    x[0] = 1.0;
    filter.filter(&x)
}

/// Worst stopband attenuation (dB) over a 256-point grid from the edge to
/// Nyquist, and the DC gain, both from the measured impulse response.
pub fn measured_filter(spec: &ppgstage::sigprep::FilterSpec, fs: f64) -> (f64, f64) {
    let filter = ppgstage::sigprep::design_lowpass(spec, fs).unwrap();
    let h = impulse_response(&filter, (40.0 * fs) as usize);
    let nyq = fs / 2.0;
    let worst = (0..256)
        .map(|i| spec.edge_hz + (nyq - spec.edge_hz) * i as f64 / 255.0)
        .map(|f| -20.0 * dft_magnitude(&h, f, fs).log10())
        .fold(f64::INFINITY, f64::min);
    (worst, h.iter().sum())
}

/// Random label/prediction pairs, some drawn from a single class and some
/// with a skewed predictor.
pub fn metric_case(r: &mut impl Rng) -> (Vec<usize>, Vec<usize>) {
    let n = r.gen_range(1..300);
    match r.gen_range(0..5) {
        0 => {
            let k = r.gen_range(0..4);
            (vec![k; n], vec![k; n])
        }
        1 => {
            let k = r.gen_range(0..4);
            (vec![k; n], (0..n).map(|_| r.gen_range(0..4)).collect())
        }
        2 => {
            let k = r.gen_range(0..4);
            ((0..n).map(|_| r.gen_range(0..4)).collect(), vec![k; n])
        }
        _ => {
            let classes = r.gen_range(1..=4);
            let truth: Vec<usize> = (0..n).map(|_| r.gen_range(0..classes)).collect();
            let pred = truth
                .iter()
                .map(|&t| if r.gen_bool(0.6) { t } else { r.gen_range(0..4) })
                .collect();
            (truth, pred)
        }
    }
}
