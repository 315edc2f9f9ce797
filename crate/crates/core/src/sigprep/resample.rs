//! Windowed-sinc downsampling onto the fixed 1024-samples-per-epoch grid.

use std::f64::consts::PI;

use crate::{Error, Result, EPOCH_SECONDS, WINDOW_SAMPLES};

/// Output rate: exactly 1024 samples per 30 s epoch.
pub const TARGET_RATE_HZ: f64 = WINDOW_SAMPLES as f64 / EPOCH_SECONDS;

/// Zero crossings of the sinc kept on each side of the kernel centre.
const ZERO_CROSSINGS: usize = 24;
/// Table entries per zero crossing (the polyphase resolution).
const PHASES: usize = 512;
/// Kernel cutoff as a fraction of the output Nyquist rate.
const ROLLOFF: f64 = 0.9;
/// Order of the linear predictor used to extend the signal past its ends.
const PREDICTOR_ORDER: usize = 32;

/// Polyphase windowed-sinc kernel for one source rate. Fractional phases
/// between table entries are linearly interpolated.
#[derive(Debug, Clone)]
pub struct SincResampler {
    source_hz: f64,
    /// Kernel cutoff in cycles per input sample, times two.
    bandwidth: f64,
    half_len: f64,
    table: Vec<f64>,
}

impl SincResampler {
    pub fn new(source_hz: f64) -> Result<Self> {
        // allow for the rounding of rates given as decimals
        if !source_hz.is_finite() || source_hz < TARGET_RATE_HZ * (1.0 - 1e-9) {
            return Err(Error::UnsupportedRate {
                source_hz,
                target_hz: TARGET_RATE_HZ,
            });
        }
        let ratio = (TARGET_RATE_HZ / source_hz).min(1.0);
        let bandwidth = ratio * ROLLOFF;
        let half_len = ZERO_CROSSINGS as f64 / bandwidth;
        let table = (0..=ZERO_CROSSINGS * PHASES + 1)
            .map(|j| {
                let u = j as f64 / PHASES as f64;
                sinc(u) * blackman(u / ZERO_CROSSINGS as f64)
            })
            .collect();
        Ok(Self {
            source_hz,
            bandwidth,
            half_len,
            table,
        })
    }

    fn kernel(&self, offset: f64) -> f64 {
        let u = offset.abs() * self.bandwidth * PHASES as f64;
        let j = u as usize;
        if j >= ZERO_CROSSINGS * PHASES {
            return 0.0;
        }
        let frac = u - j as f64;
        self.table[j] * (1.0 - frac) + self.table[j + 1] * frac
    }

    /// Output length for `n` input samples: whole epochs only.
    pub fn output_len(&self, n: usize) -> usize {
        whole_epochs(n, self.source_hz) * WINDOW_SAMPLES
    }

    pub fn process(&self, x: &[f64]) -> Vec<f64> {
        let out_len = self.output_len(x.len());
        if out_len == 0 {
            return Vec::new();
        }
        let step = self.source_hz / TARGET_RATE_HZ;
        let pad = self.half_len.ceil() as usize + 1;
        let ext = extend(x, pad);
        let mut out = Vec::with_capacity(out_len);
        for m in 0..out_len {
            let centre = m as f64 * step;
            let lo = (centre - self.half_len).ceil() as isize;
            let hi = (centre + self.half_len).floor() as isize;
            let mut acc = 0.0;
            let mut norm = 0.0;
            for k in lo..=hi {
                let w = self.kernel(centre - k as f64);
                acc += w * ext[(k + pad as isize) as usize];
                norm += w;
            }
            out.push(acc / norm);
        }
        out
    }
}

/// Number of complete 30 s epochs in `n` samples at `rate_hz`.
pub fn whole_epochs(n: usize, rate_hz: f64) -> usize {
    // exact when the epoch spans an integral number of samples
    let per_epoch = EPOCH_SECONDS * rate_hz;
    let mut epochs = (n as f64 / per_epoch).floor() as usize;
    if epochs > 0 && epochs as f64 * per_epoch > n as f64 {
        epochs -= 1;
    }
    if (epochs + 1) as f64 * per_epoch <= n as f64 {
        epochs += 1;
    }
    epochs
}

/// `x` with `pad` samples added at each end, predicted from the nearest
/// stretch of signal so that band-limited content continues smoothly. Falls
/// back to odd reflection when the signal is too short to fit a predictor or
/// the prediction runs away.
fn extend(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n + 2 * pad);
    let head: Vec<f64> = x[..n.min(4 * pad)].iter().rev().copied().collect();
    let mut before = predict_past_end(&head, pad).unwrap_or_else(|| odd_reflection(&head, pad));
    before.reverse();
    out.extend(before);
    out.extend_from_slice(x);
    let tail = &x[n - n.min(4 * pad)..];
    out.extend(predict_past_end(tail, pad).unwrap_or_else(|| odd_reflection(tail, pad)));
    out
}

/// `pad` samples continuing `seg` by odd reflection about its last sample.
fn odd_reflection(seg: &[f64], pad: usize) -> Vec<f64> {
    let n = seg.len();
    let last = seg[n - 1];
    (1..=pad).map(|k| 2.0 * last - seg[n - 1 - k.min(n - 1)]).collect()
}

/// Continues `seg` by `pad` samples with a Burg autoregressive predictor
/// fitted to its mean-removed values.
fn predict_past_end(seg: &[f64], pad: usize) -> Option<Vec<f64>> {
    let n = seg.len();
    let order = PREDICTOR_ORDER.min(n / 4);
    if order < 2 {
        return None;
    }
    let mean = seg.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = seg.iter().map(|v| v - mean).collect();
    let spread = centred.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if spread == 0.0 {
        return Some(vec![mean; pad]);
    }
    let a = burg(&centred, order);
    let mut hist = centred;
    for _ in 0..pad {
        let t = hist.len();
        let next = -(1..a.len()).map(|i| a[i] * hist[t - i]).sum::<f64>();
        if !next.is_finite() || next.abs() > 4.0 * spread {
            return None;
        }
        hist.push(next);
    }
    Some(hist[n..].iter().map(|v| v + mean).collect())
}

/// Prediction-error filter `[1, a1, .., ap]` by Burg's recursion, so that
/// `x[t] ≈ -Σ a_i x[t-i]`. Reflection coefficients stay inside the unit
/// interval, which keeps the predictor stable.
fn burg(x: &[f64], order: usize) -> Vec<f64> {
    let n = x.len();
    let mut a = vec![1.0];
    let mut f = x.to_vec();
    let mut b = x.to_vec();
    for m in 1..=order {
        let (mut num, mut den) = (0.0, 0.0);
        for t in m..n {
            num += f[t] * b[t - 1];
            den += f[t] * f[t] + b[t - 1] * b[t - 1];
        }
        if den <= f64::MIN_POSITIVE {
            break;
        }
        let k = -2.0 * num / den;
        a.push(0.0);
        let prev = a.clone();
        for i in 1..=m {
            a[i] = prev[i] + k * prev[m - i];
        }
        for t in (m..n).rev() {
            let (ft, bt) = (f[t], b[t - 1]);
            f[t] = ft + k * bt;
            b[t] = bt + k * ft;
        }
    }
    a
}

fn sinc(u: f64) -> f64 {
    if u == 0.0 {
        1.0
    } else {
        (PI * u).sin() / (PI * u)
    }
}

/// Blackman window on `[-1, 1]`.
fn blackman(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return 0.0;
    }
    0.42 + 0.5 * (PI * x).cos() + 0.08 * (2.0 * PI * x).cos()
}

/// Resamples so every complete 30 s epoch yields exactly 1024 samples; the
/// trailing partial epoch is dropped. Upsampling is rejected.
pub fn resample_to_grid(samples: &[f64], sample_rate_hz: f64) -> Result<Vec<f64>> {
    Ok(SincResampler::new(sample_rate_hz)?.process(samples))
}
