use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Four-class diagnosis. Declaration order is the class-index order used
/// throughout (Acute, Recent, Normal, Old).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagnosisLabel {
    Acute,
    Recent,
    Normal,
    Old,
}

/// Binary view: any onset class is MI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryLabel {
    Mi,
    Normal,
}

impl DiagnosisLabel {
    pub const ALL: [DiagnosisLabel; 4] = [
        DiagnosisLabel::Acute,
        DiagnosisLabel::Recent,
        DiagnosisLabel::Normal,
        DiagnosisLabel::Old,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn binary(self) -> BinaryLabel {
        match self {
            DiagnosisLabel::Normal => BinaryLabel::Normal,
            _ => BinaryLabel::Mi,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DiagnosisLabel::Acute => "acute",
            DiagnosisLabel::Recent => "recent",
            DiagnosisLabel::Normal => "normal",
            DiagnosisLabel::Old => "old",
        }
    }
}

impl BinaryLabel {
    pub const ALL: [BinaryLabel; 2] = [BinaryLabel::Mi, BinaryLabel::Normal];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            BinaryLabel::Mi => "mi",
            BinaryLabel::Normal => "normal",
        }
    }
}

impl fmt::Display for DiagnosisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Classification target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// MI vs normal, two classes.
    Binary,
    /// Acute / recent / normal / old, four classes.
    Onset,
}

impl Task {
    pub fn n_classes(self) -> usize {
        match self {
            Task::Binary => 2,
            Task::Onset => 4,
        }
    }

    pub fn class_names(self) -> Vec<&'static str> {
        match self {
            Task::Binary => BinaryLabel::ALL.iter().map(|l| l.name()).collect(),
            Task::Onset => DiagnosisLabel::ALL.iter().map(|l| l.name()).collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Binary => "binary",
            Task::Onset => "onset",
        }
    }
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "binary" => Ok(Task::Binary),
            "onset" => Ok(Task::Onset),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

/// Label attached to a record. Public datasets sometimes only say "MI"
/// without an onset time; such records can only join the binary task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordLabel {
    Onset(DiagnosisLabel),
    Binary(BinaryLabel),
}

impl RecordLabel {
    pub fn binary(self) -> BinaryLabel {
        match self {
            RecordLabel::Onset(l) => l.binary(),
            RecordLabel::Binary(b) => b,
        }
    }

    /// Class index under `task`, or `None` when the label carries no
    /// onset information and `task` needs it.
    pub fn class_index(self, task: Task) -> Option<usize> {
        match (task, self) {
            (Task::Binary, l) => Some(l.binary().index()),
            (Task::Onset, RecordLabel::Onset(l)) => Some(l.index()),
            (Task::Onset, RecordLabel::Binary(BinaryLabel::Normal)) => {
                Some(DiagnosisLabel::Normal.index())
            }
            (Task::Onset, RecordLabel::Binary(BinaryLabel::Mi)) => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RecordLabel::Onset(l) => l.name(),
            RecordLabel::Binary(b) => b.name(),
        }
    }
}

impl FromStr for RecordLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "acute" => RecordLabel::Onset(DiagnosisLabel::Acute),
            "recent" => RecordLabel::Onset(DiagnosisLabel::Recent),
            "old" => RecordLabel::Onset(DiagnosisLabel::Old),
            "normal" | "healthy" => RecordLabel::Onset(DiagnosisLabel::Normal),
            "mi" => RecordLabel::Binary(BinaryLabel::Mi),
            other => return Err(format!("unknown label `{other}`")),
        })
    }
}

impl fmt::Display for RecordLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for RecordLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for RecordLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_view_is_consistent() {
        for l in DiagnosisLabel::ALL {
            assert_eq!(l.binary() == BinaryLabel::Mi, l != DiagnosisLabel::Normal);
        }
    }

    #[test]
    fn class_indices() {
        let acute = RecordLabel::Onset(DiagnosisLabel::Acute);
        assert_eq!(acute.class_index(Task::Onset), Some(0));
        assert_eq!(acute.class_index(Task::Binary), Some(0));
        let normal: RecordLabel = "normal".parse().unwrap();
        assert_eq!(normal.class_index(Task::Onset), Some(2));
        assert_eq!(normal.class_index(Task::Binary), Some(1));
        let mi: RecordLabel = "MI".parse().unwrap();
        assert_eq!(mi.class_index(Task::Onset), None);
        assert_eq!(mi.class_index(Task::Binary), Some(0));
    }
}
