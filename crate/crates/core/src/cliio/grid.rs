//! Preprocessed window-grid container.
//!
//! Layout: magic `PPGW`, u16 version, u32-prefixed subject id, u32 window
//! length (1024), u64 window count, one label byte per window (255 =
//! unscored), then the samples as little-endian f32.

use std::path::Path;

use super::binfmt::{read_file, write_file, Reader, Writer};
use crate::sigprep::WindowGrid;
use crate::traineval::labels::StageLabel;
use crate::{Error, Result, WINDOW_SAMPLES};

pub const GRID_MAGIC: &[u8; 4] = b"PPGW";
pub const GRID_VERSION: u16 = 1;

pub fn grid_to_bytes(grid: &WindowGrid) -> Vec<u8> {
    let mut w = Writer::new(GRID_MAGIC, GRID_VERSION);
    w.str(&grid.subject_id);
    w.u32(WINDOW_SAMPLES as u32);
    w.u64(grid.len() as u64);
    let labels: Vec<u8> = grid.labels.iter().map(|l| l.to_byte()).collect();
    w.bytes(&labels);
    w.f32s(&grid.windows);
    w.buf
}

pub fn grid_from_bytes(data: &[u8], path: &Path) -> Result<WindowGrid> {
    let (mut r, _) = Reader::open(data, path, GRID_MAGIC, &[GRID_VERSION])?;
    let subject = r.str("subject id")?;
    let wlen = r.u32("window length")? as usize;
    if wlen != WINDOW_SAMPLES {
        return Err(Error::Parse(format!("{}: window length {wlen}", path.display())));
    }
    let n = r.count("window count", 1 + 4 * WINDOW_SAMPLES)?;
    let labels = r.bytes(n, "labels")?.iter().map(|&b| StageLabel::from_byte(b)).collect();
    let windows = r.f32s(n * WINDOW_SAMPLES, "windows")?;
    r.finish()?;
    WindowGrid::new(subject, windows, labels)
}

pub fn save_grid(path: &Path, grid: &WindowGrid) -> Result<()> {
    write_file(path, &grid_to_bytes(grid))
}

pub fn load_grid(path: &Path) -> Result<WindowGrid> {
    grid_from_bytes(&read_file(path)?, path)
}
