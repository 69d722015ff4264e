//! Built-in scenarios.

use super::scenario::{FailureEvent, Scenario, Surge};
use crate::slicing::SliceKind;
use crate::traffic::TrafficMixConfig;

const HOUR: u64 = 3600;

/// Outage windows 2:30 to 4:45 and 13:00 to 17:00.
const OUTAGES: [(u64, u64); 2] = [(9000, 17_100), (13 * HOUR, 17 * HOUR)];

fn baseline_traffic() -> TrafficMixConfig {
    TrafficMixConfig {
        total_requests: 500_000,
        duration_hours: 20.0,
        seed: 7,
        ..TrafficMixConfig::default()
    }
}

fn outage(name: &str, slice: SliceKind) -> Scenario {
    let mut s = Scenario::new(name, baseline_traffic());
    s.failures = OUTAGES
        .iter()
        .map(|&(start_s, end_s)| FailureEvent {
            slice,
            start_s,
            end_s,
        })
        .collect();
    s
}

pub fn preset_names() -> [&'static str; 4] {
    [
        "baseline-20h",
        "mmtc-outage",
        "urllc-outage",
        "mmtc-overload",
    ]
}

pub fn preset(name: &str) -> Option<Scenario> {
    match name {
        "baseline-20h" => Some(Scenario::new(name, baseline_traffic())),
        "mmtc-outage" => Some(outage(name, SliceKind::Mmtc)),
        "urllc-outage" => Some(outage(name, SliceKind::Urllc)),
        "mmtc-overload" => {
            // lighter base load keeps mMTC well under the threshold until the
            // 5x surge between 8:00 and 10:00
            let traffic = TrafficMixConfig {
                total_requests: 200_000,
                ..baseline_traffic()
            };
            let mut s = Scenario::new(name, traffic);
            s.surges.push(Surge {
                class: SliceKind::Mmtc,
                start_s: 8 * HOUR,
                end_s: 10 * HOUR,
                multiplier: 5.0,
            });
            Some(s)
        }
        _ => None,
    }
}

pub fn all_presets() -> Vec<Scenario> {
    preset_names()
        .iter()
        .map(|n| preset(n).expect("listed preset exists"))
        .collect()
}
