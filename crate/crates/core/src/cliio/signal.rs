//! Raw-signal container and the per-epoch label CSV.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::binfmt::{read_file, write_file, Reader, Writer};
use crate::traineval::labels::AasmStage;
use crate::{Error, Result};

pub const SIGNAL_MAGIC: &[u8; 4] = b"PPGS";
pub const SIGNAL_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SignalContainer {
    pub sample_rate_hz: f64,
    pub samples: Vec<f32>,
}

impl SignalContainer {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(SIGNAL_MAGIC, SIGNAL_VERSION);
        w.f64(self.sample_rate_hz);
        w.u64(self.samples.len() as u64);
        w.f32s(&self.samples);
        w.buf
    }

    pub fn from_bytes(data: &[u8], path: &Path) -> Result<Self> {
        let (mut r, _) = Reader::open(data, path, SIGNAL_MAGIC, &[SIGNAL_VERSION])?;
        let sample_rate_hz = r.f64("sample rate")?;
        let n = r.count("sample count", 4)?;
        let samples = r.f32s(n, "samples")?;
        r.finish()?;
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::Parse(format!("{}: sample rate {sample_rate_hz}", path.display())));
        }
        Ok(Self { sample_rate_hz, samples })
    }
}

pub fn save_signal(path: &Path, signal: &SignalContainer) -> Result<()> {
    write_file(path, &signal.to_bytes())
}

pub fn load_signal(path: &Path) -> Result<SignalContainer> {
    SignalContainer::from_bytes(&read_file(path)?, path)
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    epoch_index: usize,
    aasm_code: String,
}

pub fn labels_to_csv(labels: &[AasmStage]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (epoch_index, l) in labels.iter().enumerate() {
        w.serialize(LabelRow {
            epoch_index,
            aasm_code: l.code().to_string(),
        })
        .map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Parses `epoch_index,aasm_code` rows. Epochs missing from the file are
/// Unscored; a repeated index is an error.
pub fn labels_from_csv(text: &str, origin: &Path) -> Result<Vec<AasmStage>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out: Vec<Option<AasmStage>> = Vec::new();
    for row in r.deserialize::<LabelRow>() {
        let row = row.map_err(|e| Error::Parse(format!("{}: {e}", origin.display())))?;
        if row.epoch_index >= out.len() {
            out.resize(row.epoch_index + 1, None);
        }
        if out[row.epoch_index].is_some() {
            return Err(Error::Parse(format!(
                "{}: epoch {} labeled twice",
                origin.display(),
                row.epoch_index
            )));
        }
        out[row.epoch_index] = Some(row.aasm_code.parse().expect("infallible"));
    }
    Ok(out.into_iter().map(|l| l.unwrap_or(AasmStage::Unscored)).collect())
}

pub fn save_labels(path: &Path, labels: &[AasmStage]) -> Result<()> {
    write_file(path, labels_to_csv(labels)?.as_bytes())
}

pub fn load_labels(path: &Path) -> Result<Vec<AasmStage>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    labels_from_csv(&text, path)
}
