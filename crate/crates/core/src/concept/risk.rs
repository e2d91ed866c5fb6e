use serde::{Deserialize, Serialize};

use super::ConceptError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskItem {
    pub description: String,
    pub likelihood: u8,
    pub consequence: u8,
    pub mitigation: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RiskBand {
    Low,
    Medium,
    High,
}

/// Likelihood times consequence on a 5x5 grid: up to 4 is Low, 5 to 12
/// Medium, 15 and above High (13 and 14 are not products of 1..=5).
pub fn risk_score(item: &RiskItem) -> Result<(u8, RiskBand), ConceptError> {
    for (field, v) in [("likelihood", item.likelihood), ("consequence", item.consequence)] {
        if !(1..=5).contains(&v) {
            return Err(ConceptError::OutOfRange {
                field,
                value: i64::from(v),
            });
        }
    }
    let score = item.likelihood * item.consequence;
    let band = match score {
        0..=4 => RiskBand::Low,
        5..=12 => RiskBand::Medium,
        _ => RiskBand::High,
    };
    Ok((score, band))
}
