//! Arranging window grids into model inputs.
//!
//! Five configurations are supported:
//!
//! | id  | arrangement                                   | n    |
//! |-----|-----------------------------------------------|------|
//! | c01 | first 10 h of the night, one per subject      | 1200 |
//! | c02 | consecutive non-overlapping blocks            | 120  |
//! | c03 | consecutive non-overlapping blocks            | 60   |
//! | c04 | consecutive non-overlapping blocks            | 2    |
//! | c05 | one window every 15 min, one per start window | 4    |
//!
//! Padding rows are all-zero and masked out. Super-windows never cross
//! subjects.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sigprep::WindowGrid;
use crate::traineval::labels::StageLabel;
use crate::{Error, Result, WINDOW_SAMPLES};

pub const C01_WINDOWS: usize = 1200;
/// Source index recorded for padding rows.
pub const PAD_INDEX: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuperWindowKind {
    C01,
    Contiguous,
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperWindowSpec {
    pub kind: SuperWindowKind,
    /// Windows per super-window.
    pub n: usize,
    /// Spacing between picked windows (sparse only).
    pub stride_windows: usize,
    /// Step between consecutive super-window start indices.
    pub overlap_step: usize,
}

impl SuperWindowSpec {
    pub fn c01() -> Self {
        Self {
            kind: SuperWindowKind::C01,
            n: C01_WINDOWS,
            stride_windows: 1,
            overlap_step: C01_WINDOWS,
        }
    }

    pub fn contiguous(n: usize) -> Self {
        Self {
            kind: SuperWindowKind::Contiguous,
            n,
            stride_windows: 1,
            overlap_step: n,
        }
    }

    pub fn sparse(k: usize, stride: usize) -> Self {
        Self {
            kind: SuperWindowKind::Sparse,
            n: k,
            stride_windows: stride,
            overlap_step: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.stride_windows < 1 || self.overlap_step < 1 {
            return Err(Error::Config(format!("degenerate super-window spec {self:?}")));
        }
        match self.kind {
            SuperWindowKind::C01 if self.n != C01_WINDOWS => Err(Error::Config(format!(
                "c01 requires n = {C01_WINDOWS}, got {}",
                self.n
            ))),
            SuperWindowKind::Sparse if self.n < 2 => {
                Err(Error::Config("sparse super-windows need at least 2 windows".into()))
            }
            _ => Ok(()),
        }
    }
}

/// The five named arrangements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfigId {
    C01,
    C02,
    C03,
    C04,
    C05,
}

impl ConfigId {
    pub const ALL: [ConfigId; 5] = [ConfigId::C01, ConfigId::C02, ConfigId::C03, ConfigId::C04, ConfigId::C05];

    pub fn spec(self) -> SuperWindowSpec {
        match self {
            ConfigId::C01 => SuperWindowSpec::c01(),
            ConfigId::C02 => SuperWindowSpec::contiguous(120),
            ConfigId::C03 => SuperWindowSpec::contiguous(60),
            ConfigId::C04 => SuperWindowSpec::contiguous(2),
            ConfigId::C05 => SuperWindowSpec::sparse(4, 30),
        }
    }

    pub fn default_batch_size(self) -> usize {
        match self {
            ConfigId::C01 => 8,
            ConfigId::C02 => 32,
            ConfigId::C03 => 64,
            ConfigId::C04 | ConfigId::C05 => 1024,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConfigId::C01 => "c01",
            ConfigId::C02 => "c02",
            ConfigId::C03 => "c03",
            ConfigId::C04 => "c04",
            ConfigId::C05 => "c05",
        }
    }
}

impl FromStr for ConfigId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown configuration id {s:?} (expected c01..c05)")))
    }
}

impl fmt::Display for ConfigId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperWindow {
    pub subject_id: String,
    /// Row-major, `n * 1024` values.
    pub windows: Vec<f32>,
    pub labels: Vec<StageLabel>,
    pub valid: Vec<bool>,
    pub source_indices: Vec<i64>,
}

impl SuperWindow {
    fn gather(grid: &WindowGrid, indices: impl IntoIterator<Item = Option<usize>>) -> Self {
        let mut sw = SuperWindow {
            subject_id: grid.subject_id.clone(),
            windows: Vec::new(),
            labels: Vec::new(),
            valid: Vec::new(),
            source_indices: Vec::new(),
        };
        for idx in indices {
            match idx {
                Some(w) => {
                    sw.windows.extend_from_slice(grid.row(w));
                    sw.labels.push(grid.labels[w]);
                    sw.valid.push(grid.valid[w]);
                    sw.source_indices.push(w as i64);
                }
                None => {
                    sw.windows.extend(std::iter::repeat(0.0).take(WINDOW_SAMPLES));
                    sw.labels.push(StageLabel::Unscored);
                    sw.valid.push(false);
                    sw.source_indices.push(PAD_INDEX);
                }
            }
        }
        sw
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, j: usize) -> &[f32] {
        &self.windows[j * WINDOW_SAMPLES..(j + 1) * WINDOW_SAMPLES]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperWindowSet {
    pub spec: SuperWindowSpec,
    pub items: Vec<SuperWindow>,
}

impl SuperWindowSet {
    pub fn empty(spec: SuperWindowSpec) -> Self {
        Self {
            spec,
            items: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.items.iter().map(SuperWindow::valid_count).sum()
    }

    /// Appends another set built with the same spec.
    pub fn extend(&mut self, other: SuperWindowSet) -> Result<()> {
        if other.spec != self.spec {
            return Err(Error::Config(format!(
                "cannot merge super-window sets with specs {:?} and {:?}",
                self.spec, other.spec
            )));
        }
        self.items.extend(other.items);
        Ok(())
    }

    pub fn subset<'a>(&self, subjects: impl IntoIterator<Item = &'a str>) -> SuperWindowSet {
        let keep: std::collections::HashSet<&str> = subjects.into_iter().collect();
        SuperWindowSet {
            spec: self.spec,
            items: self
                .items
                .iter()
                .filter(|sw| keep.contains(sw.subject_id.as_str()))
                .cloned()
                .collect(),
        }
    }
}

/// One super-window of the first 1200 windows, zero-padded if shorter.
pub fn build_c01(grid: &WindowGrid) -> SuperWindowSet {
    let w = grid.len();
    let item = SuperWindow::gather(grid, (0..C01_WINDOWS).map(|j| (j < w).then_some(j)));
    SuperWindowSet {
        spec: SuperWindowSpec::c01(),
        items: vec![item],
    }
}

/// Non-overlapping blocks of `n`; the final partial block is padded.
pub fn build_contiguous(grid: &WindowGrid, n: usize) -> Result<SuperWindowSet> {
    if n < 1 {
        return Err(Error::Config("contiguous super-windows need n >= 1".into()));
    }
    let w = grid.len();
    let items = (0..w.div_ceil(n))
        .map(|b| SuperWindow::gather(grid, (b * n..(b + 1) * n).map(|j| (j < w).then_some(j))))
        .collect();
    Ok(SuperWindowSet {
        spec: SuperWindowSpec::contiguous(n),
        items,
    })
}

/// Super-window `i` holds windows `i, i+stride, …, i+(k-1)·stride`, one per
/// start index that fits entirely inside the grid.
pub fn build_sparse(grid: &WindowGrid, k: usize, stride: usize) -> Result<SuperWindowSet> {
    build_sparse_stepped(grid, k, stride, 1)
}

fn build_sparse_stepped(grid: &WindowGrid, k: usize, stride: usize, step: usize) -> Result<SuperWindowSet> {
    let spec = SuperWindowSpec {
        kind: SuperWindowKind::Sparse,
        n: k,
        stride_windows: stride,
        overlap_step: step,
    };
    spec.validate()?;
    let count = sparse_count(grid.len(), k, stride);
    let items = (0..count)
        .step_by(step)
        .map(|i| SuperWindow::gather(grid, (0..k).map(|j| Some(i + j * stride))))
        .collect();
    Ok(SuperWindowSet { spec, items })
}

pub fn contiguous_count(w: usize, n: usize) -> usize {
    w.div_ceil(n)
}

pub fn sparse_count(w: usize, k: usize, stride: usize) -> usize {
    w.saturating_sub((k - 1) * stride)
}

/// Builds the arrangement described by `spec`.
pub fn build(grid: &WindowGrid, spec: &SuperWindowSpec) -> Result<SuperWindowSet> {
    spec.validate()?;
    match spec.kind {
        SuperWindowKind::C01 => Ok(build_c01(grid)),
        SuperWindowKind::Contiguous => {
            if spec.overlap_step != spec.n {
                return Err(Error::Config("contiguous super-windows do not overlap".into()));
            }
            build_contiguous(grid, spec.n)
        }
        SuperWindowKind::Sparse => build_sparse_stepped(grid, spec.n, spec.stride_windows, spec.overlap_step),
    }
}

/// Builds the arrangement for every grid, in grid order.
pub fn build_all<'a>(grids: impl IntoIterator<Item = &'a WindowGrid>, spec: &SuperWindowSpec) -> Result<SuperWindowSet> {
    let mut set = SuperWindowSet::empty(*spec);
    for g in grids {
        set.extend(build(g, spec)?)?;
    }
    Ok(set)
}
