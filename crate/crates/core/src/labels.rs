use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground-truth orientation of a sample. `+1` normal, `−1` anomaly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Normal,
    Anomaly,
}

impl Polarity {
    pub fn from_i8(v: i8) -> Result<Self> {
        match v {
            1 => Ok(Polarity::Normal),
            -1 => Ok(Polarity::Anomaly),
            _ => Err(Error::invalid(format!("label must be +1 or -1, got {v}"))),
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Polarity::Normal => 1,
            Polarity::Anomaly => -1,
        }
    }

    pub fn is_anomaly(self) -> bool {
        self == Polarity::Anomaly
    }
}

/// Training-time label: `0` unlabeled, `+1` known normal, `−1` known anomaly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SemiLabel {
    Unlabeled,
    Normal,
    Anomaly,
}

impl SemiLabel {
    pub fn from_i8(v: i8) -> Result<Self> {
        match v {
            0 => Ok(SemiLabel::Unlabeled),
            1 => Ok(SemiLabel::Normal),
            -1 => Ok(SemiLabel::Anomaly),
            _ => Err(Error::invalid(format!(
                "semi-supervised label must be 0, +1 or -1, got {v}"
            ))),
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            SemiLabel::Unlabeled => 0,
            SemiLabel::Normal => 1,
            SemiLabel::Anomaly => -1,
        }
    }
}

impl From<Polarity> for SemiLabel {
    fn from(p: Polarity) -> Self {
        match p {
            Polarity::Normal => SemiLabel::Normal,
            Polarity::Anomaly => SemiLabel::Anomaly,
        }
    }
}
