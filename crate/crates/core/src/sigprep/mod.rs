//! Raw PPG recording to a normalized grid of 30 s windows.
//!
//! Order of operations: negate, zero-phase low-pass, resample to 1024
//! samples per epoch, clip at mean ± 3σ, z-score, split into rows.
//! Clip and z-score statistics are per recording.

pub mod filter;
pub mod resample;

use serde::{Deserialize, Serialize};

pub use filter::{design_lowpass, Biquad, FilterSpec, SosFilter, Zpk};
pub use resample::{resample_to_grid, whole_epochs, SincResampler, TARGET_RATE_HZ};

use crate::traineval::labels::{merge_labels, AasmStage, StageLabel};
use crate::{Error, Result, EPOCH_SECONDS, WINDOW_SAMPLES};

/// Clip threshold in standard deviations.
pub const CLIP_SIGMAS: f64 = 3.0;
const FLAT_STD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub subject_id: String,
    pub samples: Vec<f32>,
    pub sample_rate_hz: f64,
    /// One code per complete 30 s epoch.
    pub labels: Vec<AasmStage>,
}

impl Recording {
    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn whole_epochs(&self) -> usize {
        whole_epochs(self.samples.len(), self.sample_rate_hz)
    }
}

/// W rows of 1024 normalized samples with aligned labels.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowGrid {
    pub subject_id: String,
    /// Row-major, `labels.len() * 1024` values.
    pub windows: Vec<f32>,
    pub labels: Vec<StageLabel>,
    pub valid: Vec<bool>,
}

impl WindowGrid {
    pub fn new(subject_id: impl Into<String>, windows: Vec<f32>, labels: Vec<StageLabel>) -> Result<Self> {
        if windows.len() != labels.len() * WINDOW_SAMPLES {
            return Err(Error::Shape(format!(
                "{} samples for {} windows",
                windows.len(),
                labels.len()
            )));
        }
        let valid = labels.iter().map(|l| l.is_scored()).collect();
        Ok(Self {
            subject_id: subject_id.into(),
            windows,
            labels,
            valid,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, w: usize) -> &[f32] {
        &self.windows[w * WINDOW_SAMPLES..(w + 1) * WINDOW_SAMPLES]
    }
}

/// Recording-level stats of what preprocessing did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrepStats {
    pub windows: usize,
    pub unscored: usize,
    pub clipped_samples: usize,
    pub discarded_seconds: f64,
}

pub fn preprocess(rec: &Recording, spec: &FilterSpec) -> Result<WindowGrid> {
    preprocess_with_stats(rec, spec).map(|(grid, _)| grid)
}

pub fn preprocess_with_stats(rec: &Recording, spec: &FilterSpec) -> Result<(WindowGrid, PrepStats)> {
    let duration = rec.duration_seconds();
    let epochs = rec.whole_epochs();
    if rec.samples.is_empty() || epochs == 0 {
        return Err(Error::EmptyGrid(duration));
    }
    let sos = design_lowpass(spec, rec.sample_rate_hz)?;

    let negated: Vec<f64> = rec.samples.iter().map(|&v| -(v as f64)).collect();
    let filtered = sos.filtfilt(&negated);
    let mut x = resample_to_grid(&filtered, rec.sample_rate_hz)?;
    debug_assert_eq!(x.len(), epochs * WINDOW_SAMPLES);

    let clipped_samples = clip_sigmas(&mut x, CLIP_SIGMAS);
    let (mean, std) = mean_std(&x);
    if !(std >= FLAT_STD) {
        return Err(Error::FlatSignal(std));
    }
    let windows: Vec<f32> = x.iter().map(|&v| ((v - mean) / std) as f32).collect();

    let mut labels = merge_labels(&rec.labels);
    labels.resize(epochs, StageLabel::Unscored);
    let grid = WindowGrid::new(rec.subject_id.clone(), windows, labels)?;
    let stats = PrepStats {
        windows: epochs,
        unscored: grid.valid.iter().filter(|v| !**v).count(),
        clipped_samples,
        discarded_seconds: duration - epochs as f64 * EPOCH_SECONDS,
    };
    Ok((grid, stats))
}

/// Population mean and standard deviation.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Clips to `mean ± k·σ` using the statistics before clipping. Returns the
/// number of samples that were moved.
pub fn clip_sigmas(x: &mut [f64], k: f64) -> usize {
    let (mean, std) = mean_std(x);
    let lo = mean - k * std;
    let hi = mean + k * std;
    let mut moved = 0;
    for v in x.iter_mut() {
        if *v < lo || *v > hi {
            *v = v.clamp(lo, hi);
            moved += 1;
        }
    }
    moved
}
