use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::profiles::DeviceProfile;
use super::record::{LossRate, RequestRecord, Weather};
use crate::slicing::{classify_kpis, SliceKind};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrafficError {
    #[error("mix fractions must be non-negative and sum to 1 (got {0:?})")]
    BadMix(MixFractions),
    #[error("duration must be positive (got {0} h)")]
    BadDuration(f64),
    #[error("no device profile can produce {0} traffic")]
    NoCompatibleProfile(SliceKind),
    #[error("profile `{0}` has an empty choice set or a zero duration")]
    InvalidProfile(String),
    #[error("invalid {field}: {reason}")]
    InvalidField { field: &'static str, reason: String },
}

/// Share of requests per slice class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixFractions {
    pub embb: f64,
    pub mmtc: f64,
    pub urllc: f64,
}

impl Default for MixFractions {
    fn default() -> Self {
        MixFractions {
            embb: 0.45,
            mmtc: 0.20,
            urllc: 0.35,
        }
    }
}

impl MixFractions {
    pub fn only(kind: SliceKind) -> Self {
        let mut m = MixFractions {
            embb: 0.0,
            mmtc: 0.0,
            urllc: 0.0,
        };
        match kind {
            SliceKind::Embb => m.embb = 1.0,
            SliceKind::Mmtc => m.mmtc = 1.0,
            SliceKind::Urllc => m.urllc = 1.0,
            SliceKind::Master => {}
        }
        m
    }

    pub fn get(&self, kind: SliceKind) -> f64 {
        match kind {
            SliceKind::Embb => self.embb,
            SliceKind::Mmtc => self.mmtc,
            SliceKind::Urllc => self.urllc,
            SliceKind::Master => 0.0,
        }
    }

    fn as_array(&self) -> [f64; 3] {
        [self.embb, self.mmtc, self.urllc]
    }

    pub fn is_valid(&self) -> bool {
        let parts = self.as_array();
        parts.iter().all(|p| p.is_finite() && *p >= 0.0)
            && (parts.iter().sum::<f64>() - 1.0).abs() < 1e-9
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArrivalProcess {
    /// Evenly spaced arrivals.
    #[default]
    UniformRate,
    /// Poisson arrivals conditioned on the total count (sorted uniform times).
    Poisson,
}

fn default_qci_low() -> Vec<u8> {
    vec![1, 2, 3]
}

fn default_qci_high() -> Vec<u8> {
    vec![4, 5, 6, 7, 8, 9]
}

fn default_ue_categories() -> Vec<u8> {
    (1..=20).collect()
}

/// How many requests to generate, over what horizon and in what mix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficMixConfig {
    #[serde(default)]
    pub mix: MixFractions,
    pub total_requests: u64,
    pub duration_hours: f64,
    #[serde(default)]
    pub arrival_process: ArrivalProcess,
    #[serde(default)]
    pub seed: u64,
    /// QCI choices for delay budgets of 50 ms or less.
    #[serde(default = "default_qci_low")]
    pub qci_low_latency: Vec<u8>,
    #[serde(default = "default_qci_high")]
    pub qci_other: Vec<u8>,
    #[serde(default = "default_ue_categories")]
    pub ue_categories: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pin_day: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pin_hour: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pin_weather: Option<Weather>,
}

impl Default for TrafficMixConfig {
    fn default() -> Self {
        TrafficMixConfig {
            mix: MixFractions::default(),
            total_requests: 500_000,
            duration_hours: 20.0,
            arrival_process: ArrivalProcess::UniformRate,
            seed: 0,
            qci_low_latency: default_qci_low(),
            qci_other: default_qci_high(),
            ue_categories: default_ue_categories(),
            pin_day: None,
            pin_hour: None,
            pin_weather: None,
        }
    }
}

impl TrafficMixConfig {
    pub fn duration(&self) -> SimTime {
        SimTime::from_secs_f64(self.duration_hours * 3600.0)
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        if !self.mix.is_valid() {
            return Err(TrafficError::BadMix(self.mix));
        }
        if !(self.duration_hours.is_finite() && self.duration_hours > 0.0)
            || self.duration() == SimTime::ZERO
        {
            return Err(TrafficError::BadDuration(self.duration_hours));
        }
        let field = |field, reason: &str| TrafficError::InvalidField {
            field,
            reason: reason.to_owned(),
        };
        for (name, set) in [
            ("qci_low_latency", &self.qci_low_latency),
            ("qci_other", &self.qci_other),
        ] {
            if set.is_empty() || set.iter().any(|q| !(1..=9).contains(q)) {
                return Err(field(name, "must be a non-empty set of values in 1..=9"));
            }
        }
        if self.ue_categories.is_empty() {
            return Err(field("ue_categories", "must not be empty"));
        }
        if self.pin_day.is_some_and(|d| d > 6) {
            return Err(field("pin_day", "must be in 0..=6"));
        }
        if self.pin_hour.is_some_and(|h| h > 23) {
            return Err(field("pin_hour", "must be in 0..=23"));
        }
        Ok(())
    }
}

struct ClassSource<'a> {
    profile: &'a DeviceProfile,
    combos: Vec<(LossRate, u32)>,
}

/// Profiles able to produce each class, with the (loss, delay) combinations
/// from their choice sets that classify to that class.
fn class_sources(profiles: &[DeviceProfile]) -> [Vec<ClassSource<'_>>; 3] {
    SliceKind::CLASSES.map(|class| {
        profiles
            .iter()
            .filter(|p| p.expected_slices.contains(&class))
            .filter_map(|profile| {
                let combos: Vec<_> = profile
                    .loss_rates
                    .iter()
                    .flat_map(|&l| profile.delay_budgets_ms.iter().map(move |&d| (l, d)))
                    .filter(|&(l, d)| classify_kpis(l, d).target_slice() == Some(class))
                    .collect();
                (!combos.is_empty()).then_some(ClassSource { profile, combos })
            })
            .collect()
    })
}

/// Generates `total_requests` requests over the configured horizon.
///
/// Each request first draws its slice class from the mix, then a device profile
/// able to serve that class, then KPI values from that profile's choice sets that
/// classify to the drawn class. The class is kept in `slice_type`. Output is a
/// pure function of `(config, profiles)`.
pub fn generate_stream(
    config: &TrafficMixConfig,
    profiles: &[DeviceProfile],
) -> Result<Vec<RequestRecord>, TrafficError> {
    config.validate()?;
    if let Some(p) = profiles.iter().find(|p| !p.is_valid()) {
        return Err(TrafficError::InvalidProfile(p.name.clone()));
    }
    let sources = class_sources(profiles);
    for (class, src) in SliceKind::CLASSES.iter().zip(&sources) {
        if config.mix.get(*class) > 0.0 && src.is_empty() {
            return Err(TrafficError::NoCompatibleProfile(*class));
        }
    }

    let n = config.total_requests;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let horizon = u128::from(config.duration().as_millis());
    let arrivals: Vec<SimTime> = match config.arrival_process {
        ArrivalProcess::UniformRate => (0..n)
            .map(|i| SimTime::from_millis((u128::from(i) * horizon / u128::from(n)) as u64))
            .collect(),
        ArrivalProcess::Poisson => {
            let mut t: Vec<SimTime> = (0..n)
                .map(|_| SimTime::from_millis(rng.random_range(0..horizon as u64)))
                .collect();
            t.sort_unstable();
            t
        }
    };

    let cumulative = {
        let m = config.mix.as_array();
        [m[0], m[0] + m[1]]
    };
    let mut out = Vec::with_capacity(n as usize);
    for (i, arrival) in arrivals.into_iter().enumerate() {
        let u: f64 = rng.random();
        let mut class = if u < cumulative[0] {
            0
        } else if u < cumulative[1] {
            1
        } else {
            2
        };
        // guard against rounding pushing a draw into a zero-weight class
        while sources[class].is_empty() {
            class = (class + 1) % 3;
        }
        let source = sources[class].choose(&mut rng).expect("non-empty sources");
        let &(loss, delay) = source.combos.choose(&mut rng).expect("non-empty combos");
        let ttl = *source
            .profile
            .durations_s
            .choose(&mut rng)
            .expect("validated");
        let qci_set = if delay <= 50 {
            &config.qci_low_latency
        } else {
            &config.qci_other
        };
        let qci = *qci_set.choose(&mut rng).expect("validated");
        let ue_category = *config.ue_categories.choose(&mut rng).expect("validated");
        let day_of_week = config.pin_day.unwrap_or_else(|| rng.random_range(0..7));
        let hour_of_day = config.pin_hour.unwrap_or_else(|| rng.random_range(0..24));
        let weather = config
            .pin_weather
            .unwrap_or_else(|| *Weather::ALL.choose(&mut rng).expect("two variants"));

        out.push(RequestRecord {
            id: i as u64,
            arrival,
            device_class: source.profile.device_class,
            ue_category,
            qci,
            packet_loss_rate: loss,
            packet_delay_budget_ms: delay,
            day_of_week,
            hour_of_day,
            weather,
            ttl_s: ttl,
            slice_type: SliceKind::from_class_index(class),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slicing::classify_need;
    use crate::traffic::profile_table;

    fn small(total: u64, seed: u64) -> TrafficMixConfig {
        TrafficMixConfig {
            total_requests: total,
            duration_hours: 1.0,
            seed,
            ..TrafficMixConfig::default()
        }
    }

    #[test]
    fn empty_stream() {
        let out = generate_stream(&small(0, 1), &profile_table()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn same_seed_same_stream() {
        let a = generate_stream(&small(2000, 9), &profile_table()).unwrap();
        let b = generate_stream(&small(2000, 9), &profile_table()).unwrap();
        assert_eq!(a, b);
        let c = generate_stream(&small(2000, 10), &profile_table()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn records_are_closed_over_their_profile() {
        let table = profile_table();
        for process in [ArrivalProcess::UniformRate, ArrivalProcess::Poisson] {
            let cfg = TrafficMixConfig {
                arrival_process: process,
                ..small(5000, 3)
            };
            let out = generate_stream(&cfg, &table).unwrap();
            assert!(out.windows(2).all(|w| w[0].arrival <= w[1].arrival));
            assert!(out.iter().all(|r| r.arrival < cfg.duration()));
            for r in &out {
                let p = table
                    .iter()
                    .find(|p| p.device_class == r.device_class)
                    .unwrap();
                assert!(p.loss_rates.contains(&r.packet_loss_rate));
                assert!(p.delay_budgets_ms.contains(&r.packet_delay_budget_ms));
                assert!(p.durations_s.contains(&r.ttl_s));
                assert_eq!(classify_need(r).target_slice(), r.slice_type);
                assert!(r.validate().is_ok());
            }
        }
    }

    #[test]
    fn missing_profile_for_class() {
        let only_phones: Vec<_> = profile_table()
            .into_iter()
            .filter(|p| p.name == "smartphones")
            .collect();
        assert_eq!(
            generate_stream(&small(10, 0), &only_phones),
            Err(TrafficError::NoCompatibleProfile(SliceKind::Mmtc))
        );
        let cfg = TrafficMixConfig {
            mix: MixFractions::only(SliceKind::Embb),
            ..small(10, 0)
        };
        assert_eq!(generate_stream(&cfg, &only_phones).unwrap().len(), 10);
    }

    #[test]
    fn bad_mix_rejected() {
        let cfg = TrafficMixConfig {
            mix: MixFractions {
                embb: 0.5,
                mmtc: 0.5,
                urllc: 0.5,
            },
            ..small(10, 0)
        };
        assert!(matches!(
            generate_stream(&cfg, &profile_table()),
            Err(TrafficError::BadMix(_))
        ));
    }

    #[test]
    fn pinned_fields() {
        let cfg = TrafficMixConfig {
            pin_day: Some(3),
            pin_hour: Some(17),
            pin_weather: Some(Weather::Harsh),
            ..small(200, 4)
        };
        let out = generate_stream(&cfg, &profile_table()).unwrap();
        assert!(out
            .iter()
            .all(|r| r.day_of_week == 3 && r.hour_of_day == 17 && r.weather == Weather::Harsh));
    }
}
