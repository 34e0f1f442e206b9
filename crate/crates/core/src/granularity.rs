//! Closed vocabularies for temporal and spatial granularity tags.
//!
//! Both enumerations are declared coarse to fine; `rank()` increases with
//! fineness.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TemporalGranularity {
    Year,
    Quarter,
    Month,
    Week,
    Day,
    Hour,
    Minute,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpatialGranularity {
    Continent,
    Country,
    #[serde(rename = "State/Province")]
    StateProvince,
    #[serde(rename = "County/District")]
    CountyDistrict,
    City,
    #[serde(rename = "Neighborhood/Region")]
    NeighborhoodRegion,
    #[serde(rename = "Zip Code/Postal Code")]
    ZipCode,
    #[serde(rename = "Street Address")]
    StreetAddress,
    #[serde(rename = "Residential Address")]
    ResidentialAddress,
    #[serde(rename = "Latitude/Longitude")]
    LatLon,
}

impl TemporalGranularity {
    pub const ALL: [TemporalGranularity; 8] = [
        Self::Year,
        Self::Quarter,
        Self::Month,
        Self::Week,
        Self::Day,
        Self::Hour,
        Self::Minute,
        Self::Second,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::Year => "Year",
            Self::Quarter => "Quarter",
            Self::Month => "Month",
            Self::Week => "Week",
            Self::Day => "Day",
            Self::Hour => "Hour",
            Self::Minute => "Minute",
            Self::Second => "Second",
        }
    }

    pub fn rank(self) -> usize {
        self as usize
    }
}

impl SpatialGranularity {
    pub const ALL: [SpatialGranularity; 10] = [
        Self::Continent,
        Self::Country,
        Self::StateProvince,
        Self::CountyDistrict,
        Self::City,
        Self::NeighborhoodRegion,
        Self::ZipCode,
        Self::StreetAddress,
        Self::ResidentialAddress,
        Self::LatLon,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::Continent => "Continent",
            Self::Country => "Country",
            Self::StateProvince => "State/Province",
            Self::CountyDistrict => "County/District",
            Self::City => "City",
            Self::NeighborhoodRegion => "Neighborhood/Region",
            Self::ZipCode => "Zip Code/Postal Code",
            Self::StreetAddress => "Street Address",
            Self::ResidentialAddress => "Residential Address",
            Self::LatLon => "Latitude/Longitude",
        }
    }

    pub fn rank(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownGranularity(pub String);

impl fmt::Display for UnknownGranularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown granularity {:?}", self.0)
    }
}

impl std::error::Error for UnknownGranularity {}

fn normalize(s: &str) -> String {
    s.trim().to_ascii_lowercase()
}

impl FromStr for TemporalGranularity {
    type Err = UnknownGranularity;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = normalize(s);
        Self::ALL
            .into_iter()
            .find(|g| g.label().to_ascii_lowercase() == wanted)
            .ok_or_else(|| UnknownGranularity(s.to_string()))
    }
}

impl FromStr for SpatialGranularity {
    type Err = UnknownGranularity;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = normalize(s);
        Self::ALL
            .into_iter()
            .find(|g| g.label().to_ascii_lowercase() == wanted)
            .ok_or_else(|| UnknownGranularity(s.to_string()))
    }
}

impl fmt::Display for TemporalGranularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl fmt::Display for SpatialGranularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GranularityTags {
    #[serde(default)]
    pub temporal: Option<TemporalGranularity>,
    #[serde(default)]
    pub spatial: Option<SpatialGranularity>,
}

impl GranularityTags {
    /// Coerces free-text provider output; anything outside the vocabularies
    /// (including the empty string) becomes absent.
    pub fn coerce(temporal: &str, spatial: &str) -> Self {
        Self { temporal: temporal.parse().ok(), spatial: spatial.parse().ok() }
    }
}
