//! Chebyshev type II low-pass design as cascaded second-order sections,
//! plus causal and zero-phase (forward-backward) filtering.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Low-pass design parameters. `edge_hz` is the stopband edge: the first
/// frequency at which `stopband_atten_db` of attenuation is reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub order: usize,
    pub stopband_atten_db: f64,
    pub edge_hz: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            order: 8,
            stopband_atten_db: 40.0,
            edge_hz: 8.0,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if self.order < 2 || self.order % 2 != 0 {
            return Err(Error::InvalidSpec(format!(
                "order must be even and >= 2, got {}",
                self.order
            )));
        }
        if !(self.stopband_atten_db > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "stopband attenuation must be positive, got {} dB",
                self.stopband_atten_db
            )));
        }
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if !(self.edge_hz > 0.0) || self.edge_hz >= sample_rate_hz / 2.0 {
            return Err(Error::InvalidSpec(format!(
                "edge {} Hz must lie in (0, {}) Hz",
                self.edge_hz,
                sample_rate_hz / 2.0
            )));
        }
        Ok(())
    }
}

/// One biquad, `a[0]` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z_inv2 = z_inv * z_inv;
        let num = self.b[0] + z_inv * self.b[1] + z_inv2 * self.b[2];
        let den = self.a[0] + z_inv * self.a[1] + z_inv2 * self.a[2];
        num / den
    }

    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Transposed direct form II state reached after a unit step.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b[2] - self.a[2] * g;
        let z1 = self.b[1] - self.a[1] * g + z2;
        [z1, z2]
    }
}

/// Digital zeros, poles and gain before the pairing into sections.
#[derive(Debug, Clone)]
pub struct Zpk {
    pub zeros: Vec<Complex64>,
    pub poles: Vec<Complex64>,
    pub gain: f64,
}

impl Zpk {
    pub fn response(&self, freq_hz: f64, sample_rate_hz: f64) -> Complex64 {
        let z = Complex64::from_polar(1.0, 2.0 * PI * freq_hz / sample_rate_hz);
        let num: Complex64 = self.zeros.iter().map(|&q| z - q).product();
        let den: Complex64 = self.poles.iter().map(|&p| z - p).product();
        num / den * self.gain
    }
}

#[derive(Debug, Clone)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
    pub sample_rate_hz: f64,
    zpk: Zpk,
}

/// Designs a Chebyshev type II low-pass via the bilinear transform with
/// the stopband edge prewarped. Each section is scaled to unit DC gain.
pub fn design_lowpass(spec: &FilterSpec, sample_rate_hz: f64) -> Result<SosFilter> {
    spec.validate(sample_rate_hz)?;
    let n = spec.order;

    // analog prototype, stopband edge at 1 rad/s
    let eps = 1.0 / (10f64.powf(spec.stopband_atten_db / 10.0) - 1.0).sqrt();
    let mu = (1.0 / eps).asinh() / n as f64;
    let mut zeros = Vec::with_capacity(n);
    let mut poles = Vec::with_capacity(n);
    for k in 0..n {
        let theta = PI * (2 * k + 1) as f64 / (2 * n) as f64;
        let cheb1 = Complex64::new(-mu.sinh() * theta.sin(), mu.cosh() * theta.cos());
        poles.push(cheb1.inv());
        zeros.push(Complex64::new(0.0, 1.0 / theta.cos()));
    }

    let fs2 = 2.0 * sample_rate_hz;
    let warped = fs2 * (PI * spec.edge_hz / sample_rate_hz).tan();
    let to_digital = |s: Complex64| (fs2 + s * warped) / (fs2 - s * warped);
    let dz: Vec<Complex64> = zeros.iter().map(|&s| to_digital(s)).collect();
    let dp: Vec<Complex64> = poles.iter().map(|&s| to_digital(s)).collect();

    // analog gain makes H(0) = 1; bilinear maps s = 0 to z = 1
    let num_at_one: Complex64 = dz.iter().map(|&q| Complex64::new(1.0, 0.0) - q).product();
    let den_at_one: Complex64 = dp.iter().map(|&p| Complex64::new(1.0, 0.0) - p).product();
    let gain = (den_at_one / num_at_one).re;

    let sections = pair_sections(&dz, &dp);
    Ok(SosFilter {
        sections,
        sample_rate_hz,
        zpk: Zpk {
            zeros: dz,
            poles: dp,
            gain,
        },
    })
}

fn pair_sections(zeros: &[Complex64], poles: &[Complex64]) -> Vec<Biquad> {
    let mut upper_poles: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > 0.0).collect();
    let mut free_zeros: Vec<Complex64> = zeros.iter().copied().filter(|z| z.im > 0.0).collect();
    // low-Q sections first, the pole nearest the unit circle last
    upper_poles.sort_by(|a, b| (1.0 - b.norm()).total_cmp(&(1.0 - a.norm())));

    let mut sections = Vec::with_capacity(upper_poles.len());
    for p in upper_poles {
        let (idx, _) = free_zeros
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (**a - p).norm().total_cmp(&(**b - p).norm()))
            .expect("zeros and poles come in equal numbers");
        let z = free_zeros.swap_remove(idx);
        let a = [1.0, -2.0 * p.re, p.norm_sqr()];
        let mut b = [1.0, -2.0 * z.re, z.norm_sqr()];
        let scale = a.iter().sum::<f64>() / b.iter().sum::<f64>();
        b.iter_mut().for_each(|v| *v *= scale);
        sections.push(Biquad { b, a });
    }
    sections
}

impl SosFilter {
    pub fn zpk(&self) -> &Zpk {
        &self.zpk
    }

    /// Complex frequency response of the section cascade.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / self.sample_rate_hz);
        self.sections
            .iter()
            .map(|s| s.response(z_inv))
            .product()
    }

    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }

    /// Causal filtering with zero initial state.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            run_section(s, &mut y, [0.0, 0.0]);
        }
        y
    }

    /// Zero-phase forward-backward filtering. The signal is extended by odd
    /// reflection at both ends and each pass starts from the steady state
    /// matching its first sample.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        if x.is_empty() {
            return Vec::new();
        }
        let n = x.len();
        let padlen = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * padlen);
        ext.extend((1..=padlen).rev().map(|k| 2.0 * x[0] - x[k]));
        ext.extend_from_slice(x);
        ext.extend((1..=padlen).map(|k| 2.0 * x[n - 1] - x[n - 1 - k]));

        self.run_steady(&mut ext);
        ext.reverse();
        self.run_steady(&mut ext);
        ext.reverse();
        ext.drain(..padlen);
        ext.truncate(n);
        ext
    }

    fn run_steady(&self, y: &mut [f64]) {
        // sections have unit DC gain, so every stage sees the same level
        let x0 = y[0];
        for s in &self.sections {
            let st = s.step_state();
            run_section(s, y, [st[0] * x0, st[1] * x0]);
        }
    }
}

fn run_section(s: &Biquad, y: &mut [f64], state: [f64; 2]) {
    let [b0, b1, b2] = s.b;
    let [_, a1, a2] = s.a;
    let [mut z1, mut z2] = state;
    for v in y.iter_mut() {
        let x = *v;
        let out = b0 * x + z1;
        z1 = b1 * x - a1 * out + z2;
        z2 = b2 * x - a2 * out;
        *v = out;
    }
}
