use serde::{Deserialize, Serialize};

use crate::case::{EvidencePacket, LabValue, NormalRange, PacketBody};
use crate::text::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabStatus {
    InRange,
    Low,
    High,
    Mismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabFlag {
    pub item: String,
    pub status: LabStatus,
}

/// Flags each result of a lab panel against its normal range. Other packet
/// kinds have no results and yield an empty list.
pub fn flag_labs(packet: &EvidencePacket) -> Vec<LabFlag> {
    let PacketBody::LabPanel { labs } = &packet.body else {
        return Vec::new();
    };
    labs.iter()
        .map(|lab| {
            let status = match (&lab.value, &lab.normal_range) {
                (LabValue::Numeric(v), NormalRange::Interval { lo, hi }) => {
                    if v < lo {
                        LabStatus::Low
                    } else if v > hi {
                        LabStatus::High
                    } else {
                        LabStatus::InRange
                    }
                }
                (LabValue::Categorical(v), NormalRange::Expected(e)) if normalize(v) == normalize(e) => LabStatus::InRange,
                _ => LabStatus::Mismatch,
            };
            LabFlag { item: lab.item.clone(), status }
        })
        .collect()
}
