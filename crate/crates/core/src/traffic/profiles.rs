use serde::{Deserialize, Serialize};

use super::record::{DeviceClass, LossRate};
use crate::slicing::SliceKind;

/// KPI choice sets for one device family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub name: String,
    pub device_class: DeviceClass,
    pub loss_rates: Vec<LossRate>,
    pub delay_budgets_ms: Vec<u32>,
    pub durations_s: Vec<u32>,
    pub expected_slices: Vec<SliceKind>,
}

impl DeviceProfile {
    fn new(
        name: &str,
        device_class: DeviceClass,
        loss_rates: &[LossRate],
        delay_budgets_ms: &[u32],
        durations_s: &[u32],
        expected_slices: &[SliceKind],
    ) -> Self {
        DeviceProfile {
            name: name.to_owned(),
            device_class,
            loss_rates: loss_rates.to_vec(),
            delay_budgets_ms: delay_budgets_ms.to_vec(),
            durations_s: durations_s.to_vec(),
            expected_slices: expected_slices.to_vec(),
        }
    }

    pub fn is_valid(&self) -> bool {
        !self.loss_rates.is_empty()
            && !self.delay_budgets_ms.is_empty()
            && !self.durations_s.is_empty()
            && self.durations_s.iter().all(|&d| d > 0)
            && !self.expected_slices.is_empty()
            && !self.expected_slices.contains(&SliceKind::Master)
    }
}

/// The seven measured device families with their loss rates, delay budgets,
/// connection durations and observed slices.
pub fn profile_table() -> Vec<DeviceProfile> {
    use LossRate::{PerMillion as E6, PerThousand as E3};
    use SliceKind::{Embb, Mmtc, Urllc};
    vec![
        DeviceProfile::new(
            "healthcare",
            DeviceClass::Healthcare,
            &[E6],
            &[15],
            &[200],
            &[Urllc],
        ),
        DeviceProfile::new(
            "intelligent transportation",
            DeviceClass::IntelligentTransport,
            &[E6],
            &[15],
            &[50],
            &[Urllc],
        ),
        DeviceProfile::new(
            "smart cities",
            DeviceClass::SmartCity,
            &[E3],
            &[60, 300],
            &[90],
            &[Mmtc],
        ),
        DeviceProfile::new(
            "IoT devices",
            DeviceClass::IoT,
            &[E3],
            &[60, 300],
            &[50],
            &[Mmtc],
        ),
        DeviceProfile::new(
            "smartphones",
            DeviceClass::Smartphone,
            &[E3, E6],
            &[50, 75, 100, 130, 300],
            &[250],
            &[Embb],
        ),
        DeviceProfile::new(
            "Industry 4.0",
            DeviceClass::Industry40,
            &[E3, E6],
            &[15, 50],
            &[160],
            &[Mmtc, Urllc],
        ),
        DeviceProfile::new(
            "unknown devices",
            DeviceClass::Unknown,
            &[E3, E6],
            &[15, 50, 60, 75, 110, 150, 300],
            &[40, 110, 190],
            &[Embb, Mmtc, Urllc],
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_rows() {
        let table = profile_table();
        assert_eq!(table.len(), 7);
        assert!(table.iter().all(DeviceProfile::is_valid));

        let healthcare = &table[0];
        assert_eq!(healthcare.loss_rates, [LossRate::PerMillion]);
        assert_eq!(healthcare.delay_budgets_ms, [15]);
        assert_eq!(healthcare.durations_s, [200]);
        assert_eq!(healthcare.expected_slices, [SliceKind::Urllc]);

        let phones = &table[4];
        assert_eq!(
            phones.loss_rates,
            [LossRate::PerThousand, LossRate::PerMillion]
        );
        assert_eq!(phones.delay_budgets_ms, [50, 75, 100, 130, 300]);
        assert_eq!(phones.durations_s, [250]);
        assert_eq!(phones.expected_slices, [SliceKind::Embb]);

        let unknown = &table[6];
        assert_eq!(unknown.durations_s, [40, 110, 190]);
        assert_eq!(unknown.expected_slices, SliceKind::CLASSES);
    }
}
