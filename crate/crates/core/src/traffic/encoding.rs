//! Fixed 32-wide feature layout:
//!
//! | index  | feature                     | encoding            |
//! |--------|-----------------------------|---------------------|
//! | 0      | packet delay budget (ms)    | min-max, [0, 300]   |
//! | 1      | ttl (s)                     | min-max, [0, 300]   |
//! | 2      | hour of day                 | min-max, [0, 23]    |
//! | 3      | UE category                 | min-max, [1, 20]    |
//! | 4..11  | device class (7)            | one-hot             |
//! | 11..13 | weather (normal, harsh)     | one-hot             |
//! | 13..20 | day of week (0..6)          | one-hot             |
//! | 20..29 | QCI (1..9)                  | one-hot             |
//! | 29..32 | loss rate (1e-2,1e-3,1e-6)  | one-hot             |
//!
//! The numeric bounds above are defaults; scenarios and checkpoints carry their own copy.

use serde::{Deserialize, Serialize};

use super::record::{DeviceClass, LossRate, RequestRecord};

pub const FEATURE_DIM: usize = 32;

const DEVICE_OFFSET: usize = 4;
const WEATHER_OFFSET: usize = DEVICE_OFFSET + 7;
const DAY_OFFSET: usize = WEATHER_OFFSET + 2;
const QCI_OFFSET: usize = DAY_OFFSET + 7;
const LOSS_OFFSET: usize = QCI_OFFSET + 9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EncodingError {
    #[error("{field} = {value} is outside the encoding bounds [{min}, {max}]")]
    OutOfBounds {
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("{field} = {value} has no one-hot slot")]
    BadCategory { field: &'static str, value: u32 },
    #[error("degenerate bounds for {0}: max must exceed min")]
    DegenerateBounds(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Range { min, max }
    }

    fn scale(&self, field: &'static str, value: f64) -> Result<f64, EncodingError> {
        // also rejects NaN bounds
        if self.max.partial_cmp(&self.min) != Some(std::cmp::Ordering::Greater) {
            return Err(EncodingError::DegenerateBounds(field));
        }
        if value < self.min || value > self.max {
            return Err(EncodingError::OutOfBounds {
                field,
                value,
                min: self.min,
                max: self.max,
            });
        }
        Ok((value - self.min) / (self.max - self.min))
    }
}

/// Frozen min-max bounds for the numeric features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingBounds {
    pub delay_budget_ms: Range,
    pub ttl_s: Range,
    pub hour_of_day: Range,
    pub ue_category: Range,
}

impl Default for EncodingBounds {
    fn default() -> Self {
        EncodingBounds {
            delay_budget_ms: Range::new(0.0, 300.0),
            ttl_s: Range::new(0.0, 300.0),
            hour_of_day: Range::new(0.0, 23.0),
            ue_category: Range::new(1.0, 20.0),
        }
    }
}

pub fn encode_features(
    record: &RequestRecord,
    bounds: &EncodingBounds,
) -> Result<[f64; FEATURE_DIM], EncodingError> {
    let mut v = [0.0; FEATURE_DIM];
    v[0] = bounds.delay_budget_ms.scale(
        "packet_delay_budget",
        f64::from(record.packet_delay_budget_ms),
    )?;
    v[1] = bounds.ttl_s.scale("ttl_s", f64::from(record.ttl_s))?;
    v[2] = bounds
        .hour_of_day
        .scale("hour_of_day", f64::from(record.hour_of_day))?;
    v[3] = bounds
        .ue_category
        .scale("ue_category", f64::from(record.ue_category))?;

    v[DEVICE_OFFSET + device_slot(record.device_class)] = 1.0;
    v[WEATHER_OFFSET + record.weather as usize] = 1.0;
    if record.day_of_week > 6 {
        return Err(EncodingError::BadCategory {
            field: "day_of_week",
            value: u32::from(record.day_of_week),
        });
    }
    v[DAY_OFFSET + usize::from(record.day_of_week)] = 1.0;
    if !(1..=9).contains(&record.qci) {
        return Err(EncodingError::BadCategory {
            field: "qci",
            value: u32::from(record.qci),
        });
    }
    v[QCI_OFFSET + usize::from(record.qci - 1)] = 1.0;
    v[LOSS_OFFSET + loss_slot(record.packet_loss_rate)] = 1.0;
    Ok(v)
}

fn device_slot(class: DeviceClass) -> usize {
    class.index()
}

fn loss_slot(loss: LossRate) -> usize {
    loss.index()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::SimTime;
    use crate::traffic::Weather;

    fn record() -> RequestRecord {
        RequestRecord {
            id: 1,
            arrival: SimTime::ZERO,
            device_class: DeviceClass::SmartCity,
            ue_category: 6,
            qci: 4,
            packet_loss_rate: LossRate::PerThousand,
            packet_delay_budget_ms: 60,
            day_of_week: 2,
            hour_of_day: 10,
            weather: Weather::Harsh,
            ttl_s: 90,
            slice_type: None,
        }
    }

    #[test]
    fn hand_computed_vector() {
        let v = encode_features(&record(), &EncodingBounds::default()).unwrap();
        let mut expected = [0.0; FEATURE_DIM];
        expected[0] = 60.0 / 300.0;
        expected[1] = 90.0 / 300.0;
        expected[2] = 10.0 / 23.0;
        expected[3] = 5.0 / 19.0;
        expected[4 + 2] = 1.0; // smart city
        expected[11 + 1] = 1.0; // harsh
        expected[13 + 2] = 1.0; // tuesday-ish, day 2
        expected[20 + 3] = 1.0; // qci 4
        expected[29 + 1] = 1.0; // 1e-3
        assert_eq!(v, expected);
        assert_eq!(v.iter().filter(|&&x| x == 1.0).count(), 5);
    }

    #[test]
    fn max_delay_maps_to_one() {
        let mut r = record();
        r.packet_delay_budget_ms = 300;
        let v = encode_features(&r, &EncodingBounds::default()).unwrap();
        assert_eq!(v[0], 1.0);
    }

    #[test]
    fn equal_records_equal_vectors() {
        let b = EncodingBounds::default();
        assert_eq!(
            encode_features(&record(), &b),
            encode_features(&record(), &b)
        );
    }

    #[test]
    fn out_of_bounds_rejected() {
        let mut r = record();
        r.packet_delay_budget_ms = 301;
        assert!(matches!(
            encode_features(&r, &EncodingBounds::default()),
            Err(EncodingError::OutOfBounds {
                field: "packet_delay_budget",
                ..
            })
        ));
        let mut r = record();
        r.qci = 0;
        assert!(matches!(
            encode_features(&r, &EncodingBounds::default()),
            Err(EncodingError::BadCategory { field: "qci", .. })
        ));
    }
}
