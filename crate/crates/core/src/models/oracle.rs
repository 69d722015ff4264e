use crate::slicing::{classify_kpis, ServiceNeed, SliceKind};
use crate::traffic::{LossRate, RequestRecord};

/// Ground-truth labeler: the admission rule's need classification followed by
/// the need-to-slice map.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleOracle;

impl RuleOracle {
    pub fn label(&self, record: &RequestRecord) -> SliceKind {
        self.label_kpis(record.packet_loss_rate, record.packet_delay_budget_ms)
    }

    pub fn label_kpis(&self, loss: LossRate, delay_ms: u32) -> SliceKind {
        match classify_kpis(loss, delay_ms) {
            ServiceNeed::Unmatched => {
                log::debug!("unmatched KPIs (loss {loss}, delay {delay_ms} ms) labeled embb");
                SliceKind::Embb
            }
            need => need.target_slice().expect("matched need has a slice"),
        }
    }
}

/// Slice label for `record`; unmatched requests label as eMBB.
pub fn oracle_label(record: &RequestRecord) -> SliceKind {
    RuleOracle.label(record)
}
