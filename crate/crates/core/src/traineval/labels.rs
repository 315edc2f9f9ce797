use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Raw per-epoch scoring code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AasmStage {
    Wake,
    N1,
    N2,
    N3,
    Rem,
    Unscored,
}

impl AasmStage {
    pub fn code(self) -> &'static str {
        match self {
            AasmStage::Wake => "W",
            AasmStage::N1 => "N1",
            AasmStage::N2 => "N2",
            AasmStage::N3 => "N3",
            AasmStage::Rem => "REM",
            AasmStage::Unscored => "?",
        }
    }
}

impl FromStr for AasmStage {
    type Err = std::convert::Infallible;

    /// Never fails: anything that is not a recognised code is `Unscored`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_uppercase().as_str() {
            "W" | "WAKE" | "WAKEFULNESS" => AasmStage::Wake,
            "N1" | "NREM1" => AasmStage::N1,
            "N2" | "NREM2" => AasmStage::N2,
            "N3" | "NREM3" => AasmStage::N3,
            "R" | "REM" => AasmStage::Rem,
            _ => AasmStage::Unscored,
        })
    }
}

impl fmt::Display for AasmStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Four-class target after merging NREM1 and NREM2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StageLabel {
    Wake,
    Light,
    Deep,
    Rem,
    Unscored,
}

impl StageLabel {
    pub const CLASSES: [StageLabel; 4] = [
        StageLabel::Wake,
        StageLabel::Light,
        StageLabel::Deep,
        StageLabel::Rem,
    ];

    pub fn class_index(self) -> Option<usize> {
        match self {
            StageLabel::Wake => Some(0),
            StageLabel::Light => Some(1),
            StageLabel::Deep => Some(2),
            StageLabel::Rem => Some(3),
            StageLabel::Unscored => None,
        }
    }

    pub fn from_class_index(i: usize) -> StageLabel {
        Self::CLASSES.get(i).copied().unwrap_or(StageLabel::Unscored)
    }

    /// One-byte code used in binary containers; 255 marks unscored.
    pub fn to_byte(self) -> u8 {
        self.class_index().map_or(u8::MAX, |i| i as u8)
    }

    pub fn from_byte(b: u8) -> StageLabel {
        Self::from_class_index(b as usize)
    }

    pub fn is_scored(self) -> bool {
        self != StageLabel::Unscored
    }

    pub fn name(self) -> &'static str {
        match self {
            StageLabel::Wake => "Wake",
            StageLabel::Light => "Light",
            StageLabel::Deep => "Deep",
            StageLabel::Rem => "REM",
            StageLabel::Unscored => "Unscored",
        }
    }
}

impl From<AasmStage> for StageLabel {
    fn from(s: AasmStage) -> Self {
        match s {
            AasmStage::Wake => StageLabel::Wake,
            AasmStage::N1 | AasmStage::N2 => StageLabel::Light,
            AasmStage::N3 => StageLabel::Deep,
            AasmStage::Rem => StageLabel::Rem,
            AasmStage::Unscored => StageLabel::Unscored,
        }
    }
}

pub fn merge_labels(raw: &[AasmStage]) -> Vec<StageLabel> {
    raw.iter().map(|&s| s.into()).collect()
}
