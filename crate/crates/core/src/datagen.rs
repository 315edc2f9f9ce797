//! Synthetic PPG-like recordings whose pulse rate depends on the sleep
//! stage, so the whole pipeline can be exercised without clinical data.
//!
//! Each subject gets a stage sequence from a four-state Markov chain (one
//! state per 30 s epoch, first state drawn from the stationary
//! distribution). Every epoch draws a pulse rate from its stage's normal
//! distribution; the waveform is a raised-cosine pulse train with
//! continuous phase plus white Gaussian noise.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sigprep::Recording;
use crate::traineval::labels::{AasmStage, StageLabel};
use crate::{Error, Result, EPOCH_SECONDS, NUM_CLASSES};

pub const MIN_BPM: f64 = 30.0;
pub const MAX_BPM: f64 = 180.0;
/// Fraction of each beat occupied by the pulse.
pub const PULSE_DUTY: f64 = 0.4;
/// Share of Light epochs scored as N1 rather than N2.
const N1_SHARE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateDist {
    pub mean_bpm: f64,
    pub std_bpm: f64,
}

impl RateDist {
    pub const fn new(mean_bpm: f64, std_bpm: f64) -> Self {
        Self { mean_bpm, std_bpm }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub subjects: usize,
    pub hours: f64,
    pub sample_rate_hz: f64,
    /// Row-stochastic, indexed by class (Wake, Light, Deep, REM).
    pub transitions: [[f64; NUM_CLASSES]; NUM_CLASSES],
    pub rates: [RateDist; NUM_CLASSES],
    pub noise_std: f64,
    pub unscored_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            subjects: 20,
            hours: 2.0,
            sample_rate_hz: 64.0,
            transitions: [
                [0.92, 0.06, 0.01, 0.01],
                [0.03, 0.90, 0.04, 0.03],
                [0.01, 0.06, 0.93, 0.00],
                [0.02, 0.05, 0.00, 0.93],
            ],
            rates: [
                RateDist::new(75.0, 6.0),
                RateDist::new(65.0, 4.0),
                RateDist::new(55.0, 2.0),
                RateDist::new(70.0, 8.0),
            ],
            noise_std: 0.1,
            unscored_fraction: 0.05,
            seed: 42,
        }
    }
}

impl SynthConfig {
    /// Default cohort with stage pulse-rate distributions pulled apart by
    /// several standard deviations, for end-to-end runs that should be
    /// learnable to near-perfect accuracy.
    pub fn separable() -> Self {
        Self {
            rates: [
                RateDist::new(90.0, 2.0),
                RateDist::new(66.0, 2.0),
                RateDist::new(48.0, 2.0),
                RateDist::new(78.0, 2.0),
            ],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.subjects == 0 {
            return bad("subjects must be >= 1".into());
        }
        if !(self.hours > 0.0 && self.hours.is_finite()) {
            return bad(format!("hours must be positive, got {}", self.hours));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad(format!("sample rate must be positive, got {}", self.sample_rate_hz));
        }
        for (i, row) in self.transitions.iter().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return bad(format!("transition row {i} has an entry outside [0, 1]"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return bad(format!("transition row {i} sums to {s}"));
            }
        }
        for (k, r) in self.rates.iter().enumerate() {
            if !(MIN_BPM..=MAX_BPM).contains(&r.mean_bpm) || !(r.std_bpm >= 0.0) {
                return bad(format!(
                    "stage {k} rate {}±{} bpm outside [{MIN_BPM}, {MAX_BPM}]",
                    r.mean_bpm, r.std_bpm
                ));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise std must be >= 0, got {}", self.noise_std));
        }
        if !(0.0..1.0).contains(&self.unscored_fraction) {
            return bad(format!("unscored fraction must be in [0, 1), got {}", self.unscored_fraction));
        }
        Ok(())
    }

    pub fn epochs_per_subject(&self) -> usize {
        (self.hours * 3600.0 / EPOCH_SECONDS).round() as usize
    }

    pub fn samples_per_epoch(&self) -> usize {
        (EPOCH_SECONDS * self.sample_rate_hz).round() as usize
    }

    /// Stationary distribution of the transition matrix by power iteration.
    pub fn stationary(&self) -> [f64; NUM_CLASSES] {
        stationary(&self.transitions)
    }
}

pub fn stationary(p: &[[f64; NUM_CLASSES]; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let mut pi = [1.0 / NUM_CLASSES as f64; NUM_CLASSES];
    for _ in 0..100_000 {
        let mut next = [0.0; NUM_CLASSES];
        for (i, row) in p.iter().enumerate() {
            for (j, &pij) in row.iter().enumerate() {
                next[j] += pi[i] * pij;
            }
        }
        let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if delta < 1e-15 {
            break;
        }
    }
    pi
}

pub fn subject_id(index: usize) -> String {
    format!("synth{index:03}")
}

fn subject_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

fn draw(rng: &mut impl Rng, probs: &[f64; NUM_CLASSES]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // Rounding left a sliver above the cumulative sum.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// One raised-cosine pulse per beat; `phase` in [0, 1).
pub fn pulse(phase: f64) -> f64 {
    if phase < PULSE_DUTY {
        0.5 * (1.0 - (2.0 * PI * phase / PULSE_DUTY).cos())
    } else {
        0.0
    }
}

/// Generates one subject. Identical `(cfg.seed, index)` give bit-identical
/// recordings.
pub fn gen_subject(cfg: &SynthConfig, index: usize) -> Result<Recording> {
    cfg.validate()?;
    let mut rng = subject_rng(cfg.seed, index);
    let epochs = cfg.epochs_per_subject();
    let per_epoch = cfg.samples_per_epoch();

    let mut stages = Vec::with_capacity(epochs);
    let mut state = draw(&mut rng, &cfg.stationary());
    for e in 0..epochs {
        if e > 0 {
            state = draw(&mut rng, &cfg.transitions[state]);
        }
        stages.push(state);
    }

    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let mut samples = Vec::with_capacity(epochs * per_epoch);
    let mut phase: f64 = rng.gen();
    for &s in &stages {
        let r = cfg.rates[s];
        let bpm = (r.mean_bpm + r.std_bpm * rng.sample::<f64, _>(rand_distr::StandardNormal)).clamp(MIN_BPM, MAX_BPM);
        let step = bpm / 60.0 / cfg.sample_rate_hz;
        for _ in 0..per_epoch {
            samples.push((pulse(phase) + noise.sample(&mut rng)) as f32);
            phase = (phase + step).fract();
        }
    }

    let mut labels: Vec<AasmStage> = stages
        .iter()
        .map(|&s| match StageLabel::from_class_index(s) {
            StageLabel::Wake => AasmStage::Wake,
            StageLabel::Light if rng.gen_bool(N1_SHARE) => AasmStage::N1,
            StageLabel::Light => AasmStage::N2,
            StageLabel::Deep => AasmStage::N3,
            _ => AasmStage::Rem,
        })
        .collect();
    let unscored = (cfg.unscored_fraction * epochs as f64).round() as usize;
    for e in sample(&mut rng, epochs, unscored.min(epochs)) {
        labels[e] = AasmStage::Unscored;
    }

    Ok(Recording {
        subject_id: subject_id(index),
        samples,
        sample_rate_hz: cfg.sample_rate_hz,
        labels,
    })
}

/// All subjects, generated in parallel; order follows the subject index.
pub fn gen_dataset(cfg: &SynthConfig) -> Result<Vec<Recording>> {
    cfg.validate()?;
    (0..cfg.subjects).into_par_iter().map(|i| gen_subject(cfg, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            subjects: 2,
            hours: 1.0,
            ..SynthConfig::default()
        }
    }

    fn count_peaks(x: &[f32]) -> usize {
        (1..x.len() - 1)
            .filter(|&i| x[i] > 0.5 && x[i] > x[i - 1] && x[i] >= x[i + 1])
            .count()
    }

    #[test]
    fn one_hour_is_120_labels() {
        let r = gen_subject(&small(), 0).unwrap();
        assert_eq!(r.labels.len(), 120);
        assert_eq!(r.samples.len(), 120 * 30 * 64);
        assert!(r.samples.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn sixty_bpm_gives_thirty_peaks() {
        let mut cfg = small();
        cfg.noise_std = 0.0;
        cfg.unscored_fraction = 0.0;
        cfg.transitions = [[0.0, 0.0, 1.0, 0.0]; 4];
        cfg.rates[2] = RateDist::new(60.0, 0.0);
        let r = gen_subject(&cfg, 3).unwrap();
        assert!(r.labels.iter().all(|&l| l == AasmStage::N3));
        for epoch in r.samples.chunks(30 * 64) {
            let n = count_peaks(epoch) as i64;
            assert!((n - 30).abs() <= 1, "{n} peaks");
        }
    }

    #[test]
    fn deterministic_and_index_separated() {
        let cfg = small();
        let a = gen_subject(&cfg, 1).unwrap();
        let b = gen_subject(&cfg, 1).unwrap();
        let c = gen_subject(&cfg, 0).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.labels, b.labels);
        assert_ne!(a.samples, c.samples);
        assert_ne!(a.subject_id, c.subject_id);
    }

    #[test]
    fn unscored_fraction_is_exact() {
        let mut cfg = small();
        cfg.unscored_fraction = 0.25;
        let r = gen_subject(&cfg, 0).unwrap();
        assert_eq!(r.labels.iter().filter(|&&l| l == AasmStage::Unscored).count(), 30);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = small();
        cfg.transitions[1][1] = 0.5;
        assert!(cfg.validate().is_err());
        let mut cfg = small();
        cfg.rates[0].mean_bpm = 200.0;
        assert!(cfg.validate().is_err());
        let mut cfg = small();
        cfg.subjects = 0;
        assert!(gen_dataset(&cfg).is_err());
    }

    #[test]
    fn power_iteration_fixed_point() {
        let p = [[0.5, 0.5, 0.0, 0.0], [0.25, 0.75, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
        let pi = stationary(&p);
        // uniform start mass on the first pair settles to (1/3, 2/3) of it
        assert!((pi[0] - 0.5 / 3.0).abs() < 1e-12);
        assert!((pi[1] - 1.0 / 3.0).abs() < 1e-12);
    }
}
