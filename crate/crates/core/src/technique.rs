use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Localization families; techniques within a family share raw data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    HistoryBased,
    StackTrace,
    IrBased,
    Slicing,
    Sbfl,
    PredicateSwitching,
    Mbfl,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::HistoryBased,
        Family::StackTrace,
        Family::IrBased,
        Family::Slicing,
        Family::Sbfl,
        Family::PredicateSwitching,
        Family::Mbfl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::HistoryBased => "history-based",
            Family::StackTrace => "stack trace",
            Family::IrBased => "IR-based",
            Family::Slicing => "slicing",
            Family::Sbfl => "SBFL",
            Family::PredicateSwitching => "predicate switching",
            Family::Mbfl => "MBFL",
        }
    }

    pub fn techniques(self) -> &'static [Technique] {
        use Technique::*;
        match self {
            Family::HistoryBased => &[History],
            Family::StackTrace => &[StackTrace],
            Family::IrBased => &[Ir],
            Family::Slicing => &[SliceUnion, SliceIntersection, SliceFrequency],
            Family::Sbfl => &[Ochiai, DStar],
            Family::PredicateSwitching => &[PredicateSwitching],
            Family::Mbfl => &[Metallaxis, Muse],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    Ochiai,
    DStar,
    Metallaxis,
    Muse,
    SliceUnion,
    SliceIntersection,
    SliceFrequency,
    StackTrace,
    PredicateSwitching,
    Ir,
    History,
}

impl Technique {
    pub const ALL: [Technique; 11] = [
        Technique::Ochiai,
        Technique::DStar,
        Technique::Metallaxis,
        Technique::Muse,
        Technique::SliceUnion,
        Technique::SliceIntersection,
        Technique::SliceFrequency,
        Technique::StackTrace,
        Technique::PredicateSwitching,
        Technique::Ir,
        Technique::History,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Technique::Ochiai => "ochiai",
            Technique::DStar => "dstar",
            Technique::Metallaxis => "metallaxis",
            Technique::Muse => "muse",
            Technique::SliceUnion => "slice_union",
            Technique::SliceIntersection => "slice_intersection",
            Technique::SliceFrequency => "slice_frequency",
            Technique::StackTrace => "stack_trace",
            Technique::PredicateSwitching => "predicate_switching",
            Technique::Ir => "ir",
            Technique::History => "history",
        }
    }

    pub fn family(self) -> Family {
        match self {
            Technique::Ochiai | Technique::DStar => Family::Sbfl,
            Technique::Metallaxis | Technique::Muse => Family::Mbfl,
            Technique::SliceUnion | Technique::SliceIntersection | Technique::SliceFrequency => {
                Family::Slicing
            }
            Technique::StackTrace => Family::StackTrace,
            Technique::PredicateSwitching => Family::PredicateSwitching,
            Technique::Ir => Family::IrBased,
            Technique::History => Family::HistoryBased,
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Technique::ALL
            .into_iter()
            .find(|t| t.id() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "technique",
                value: s.to_string(),
            })
    }
}
