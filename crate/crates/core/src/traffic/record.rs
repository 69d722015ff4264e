use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::slicing::SliceKind;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid {field} `{value}`")]
pub struct ParseFieldError {
    pub field: &'static str,
    pub value: String,
}

impl ParseFieldError {
    fn new(field: &'static str, value: &str) -> Self {
        ParseFieldError {
            field,
            value: value.to_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceClass {
    Healthcare,
    IntelligentTransport,
    SmartCity,
    IoT,
    Smartphone,
    Industry40,
    Unknown,
}

impl DeviceClass {
    pub const ALL: [DeviceClass; 7] = [
        DeviceClass::Healthcare,
        DeviceClass::IntelligentTransport,
        DeviceClass::SmartCity,
        DeviceClass::IoT,
        DeviceClass::Smartphone,
        DeviceClass::Industry40,
        DeviceClass::Unknown,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DeviceClass::Healthcare => "healthcare",
            DeviceClass::IntelligentTransport => "intelligent_transport",
            DeviceClass::SmartCity => "smart_city",
            DeviceClass::IoT => "iot",
            DeviceClass::Smartphone => "smartphone",
            DeviceClass::Industry40 => "industry_4_0",
            DeviceClass::Unknown => "unknown",
        }
    }
}

impl fmt::Display for DeviceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DeviceClass {
    type Err = ParseFieldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        DeviceClass::ALL
            .into_iter()
            .find(|c| c.as_str() == key)
            .ok_or_else(|| ParseFieldError::new("device class", s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weather {
    Normal,
    Harsh,
}

impl Weather {
    pub const ALL: [Weather; 2] = [Weather::Normal, Weather::Harsh];

    pub fn as_str(self) -> &'static str {
        match self {
            Weather::Normal => "normal",
            Weather::Harsh => "harsh",
        }
    }
}

impl FromStr for Weather {
    type Err = ParseFieldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(Weather::Normal),
            "harsh" => Ok(Weather::Harsh),
            _ => Err(ParseFieldError::new("weather", s)),
        }
    }
}

/// Maximum packet loss rate; the datasets only use three levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LossRate {
    /// 10⁻²
    PerHundred,
    /// 10⁻³
    PerThousand,
    /// 10⁻⁶
    PerMillion,
}

impl LossRate {
    pub const ALL: [LossRate; 3] = [
        LossRate::PerHundred,
        LossRate::PerThousand,
        LossRate::PerMillion,
    ];

    pub fn value(self) -> f64 {
        match self {
            LossRate::PerHundred => 1e-2,
            LossRate::PerThousand => 1e-3,
            LossRate::PerMillion => 1e-6,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LossRate::PerHundred => "1e-2",
            LossRate::PerThousand => "1e-3",
            LossRate::PerMillion => "1e-6",
        }
    }
}

impl fmt::Display for LossRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Accepts any decimal or exponent spelling within 10⁻⁹ relative of a level.
impl FromStr for LossRate {
    type Err = ParseFieldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| ParseFieldError::new("packet loss rate", s))?;
        LossRate::ALL
            .into_iter()
            .find(|l| ((v - l.value()) / l.value()).abs() < 1e-9)
            .ok_or_else(|| ParseFieldError::new("packet loss rate", s))
    }
}

/// One connection request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub id: u64,
    pub arrival: SimTime,
    pub device_class: DeviceClass,
    pub ue_category: u8,
    pub qci: u8,
    pub packet_loss_rate: LossRate,
    pub packet_delay_budget_ms: u32,
    pub day_of_week: u8,
    pub hour_of_day: u8,
    pub weather: Weather,
    pub ttl_s: u32,
    /// Ground-truth slice, when the source carries one.
    pub slice_type: Option<SliceKind>,
}

impl RequestRecord {
    /// Field-range checks shared by ingestion and generation.
    pub fn validate(&self) -> Result<(), ParseFieldError> {
        let bad = |field, v: &dyn fmt::Display| Err(ParseFieldError::new(field, &v.to_string()));
        if !(1..=9).contains(&self.qci) {
            return bad("qci", &self.qci);
        }
        if self.day_of_week > 6 {
            return bad("day_of_week", &self.day_of_week);
        }
        if self.hour_of_day > 23 {
            return bad("hour_of_day", &self.hour_of_day);
        }
        if self.ttl_s == 0 {
            return bad("ttl_s", &self.ttl_s);
        }
        if self.slice_type == Some(SliceKind::Master) {
            return bad("slice_type", &"master");
        }
        Ok(())
    }
}
