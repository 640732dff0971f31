use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    RPeak,
    SlowWave,
    Rem,
    Spindle,
    Synthetic,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::RPeak => "r_peak",
            EventKind::SlowWave => "slow_wave",
            EventKind::Rem => "rem",
            EventKind::Spindle => "spindle",
            EventKind::Synthetic => "synthetic",
        }
    }
}

impl std::str::FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "r_peak" => Ok(EventKind::RPeak),
            "slow_wave" => Ok(EventKind::SlowWave),
            "rem" => Ok(EventKind::Rem),
            "spindle" => Ok(EventKind::Spindle),
            "synthetic" => Ok(EventKind::Synthetic),
            other => Err(Error::Config(format!("unknown landmark kind {other:?}"))),
        }
    }
}

/// Landmark sample indices on a record's preprocessed timeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventList {
    pub kind: EventKind,
    pub indices: Vec<usize>,
}

impl EventList {
    pub fn new(kind: EventKind, indices: Vec<usize>) -> Self {
        Self { kind, indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Checks strict ordering and that every index lies before `bound`.
    pub fn validate(&self, bound: usize) -> Result<()> {
        if self.indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Data(format!(
                "{} events are not strictly increasing",
                self.kind.as_str()
            )));
        }
        if let Some(&last) = self.indices.last() {
            if last >= bound {
                return Err(Error::Data(format!(
                    "{} event at {last} beyond signal length {bound}",
                    self.kind.as_str()
                )));
            }
        }
        Ok(())
    }
}
