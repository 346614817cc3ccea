//! The closed set of obituary zones.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// One of the eight sentence-level zones of an obituary.
///
/// The declaration order is the canonical order: it fixes matrix axes,
/// tag indices and every tie-break in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Zone {
    PersonalInformation,
    BiographicalSketch,
    Family,
    Characteristics,
    Tribute,
    Gratitude,
    FuneralInformation,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown zone code {0:?} (expected one of PI, BS, FA, C, T, G, FI, O)")]
pub struct UnknownZone(pub String);

impl Zone {
    pub const COUNT: usize = 8;

    pub const ALL: [Zone; Zone::COUNT] = [
        Zone::PersonalInformation,
        Zone::BiographicalSketch,
        Zone::Family,
        Zone::Characteristics,
        Zone::Tribute,
        Zone::Gratitude,
        Zone::FuneralInformation,
        Zone::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Zone> {
        Zone::ALL.get(index).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            Zone::PersonalInformation => "PI",
            Zone::BiographicalSketch => "BS",
            Zone::Family => "FA",
            Zone::Characteristics => "C",
            Zone::Tribute => "T",
            Zone::Gratitude => "G",
            Zone::FuneralInformation => "FI",
            Zone::Other => "O",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Zone::PersonalInformation => "Personal Information",
            Zone::BiographicalSketch => "Biographical Sketch",
            Zone::Family => "Family",
            Zone::Characteristics => "Characteristics",
            Zone::Tribute => "Tribute",
            Zone::Gratitude => "Gratitude",
            Zone::FuneralInformation => "Funeral Information",
            Zone::Other => "Other",
        }
    }

    /// Parse a zone code. Codes are case-sensitive.
    pub fn from_code(code: &str) -> Result<Zone, UnknownZone> {
        Zone::ALL
            .iter()
            .copied()
            .find(|z| z.code() == code)
            .ok_or_else(|| UnknownZone(code.to_string()))
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Zone {
    type Err = UnknownZone;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Zone::from_code(s)
    }
}

impl Serialize for Zone {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Zone {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let code = String::deserialize(deserializer)?;
        Zone::from_code(&code).map_err(serde::de::Error::custom)
    }
}
