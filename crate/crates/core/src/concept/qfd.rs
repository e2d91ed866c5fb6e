use serde::{Deserialize, Serialize};

use super::ConceptError;

/// Allowed need/characteristic correlation strengths.
pub const CORRELATION_SCALE: [f64; 4] = [0.0, 1.0, 3.0, 9.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfdInput {
    pub needs: Vec<(String, f64)>,
    pub characteristics: Vec<String>,
    /// Rows follow `needs`, columns follow `characteristics`.
    pub correlation: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfdWeights {
    /// Normalized weights in declaration order.
    pub weights: Vec<(String, f64)>,
    /// Characteristics no need correlates with.
    pub flagged: Vec<String>,
}

impl QfdWeights {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.weights.iter().find(|(n, _)| n == name).map(|(_, w)| *w)
    }
}

impl QfdInput {
    pub fn validate(&self) -> Result<(), ConceptError> {
        if self.correlation.len() != self.needs.len() {
            return Err(ConceptError::DimensionMismatch(format!(
                "{} correlation rows for {} needs",
                self.correlation.len(),
                self.needs.len()
            )));
        }
        for (name, importance) in &self.needs {
            if !(importance.is_finite() && *importance > 0.0) {
                return Err(ConceptError::InvalidWeight {
                    name: name.clone(),
                    value: *importance,
                });
            }
        }
        for ((need, _), row) in self.needs.iter().zip(&self.correlation) {
            if row.len() != self.characteristics.len() {
                return Err(ConceptError::DimensionMismatch(format!(
                    "need {need:?} has {} correlations for {} characteristics",
                    row.len(),
                    self.characteristics.len()
                )));
            }
            for (ch, v) in self.characteristics.iter().zip(row) {
                if !CORRELATION_SCALE.contains(v) {
                    return Err(ConceptError::InvalidCorrelation {
                        need: need.clone(),
                        characteristic: ch.clone(),
                        value: *v,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Weight of each characteristic: the importance-weighted sum of its
/// correlations with the needs, normalized to sum to one.
pub fn qfd_weights(input: &QfdInput) -> Result<QfdWeights, ConceptError> {
    input.validate()?;
    let mut raw = vec![0.0; input.characteristics.len()];
    for ((_, importance), row) in input.needs.iter().zip(&input.correlation) {
        for (r, c) in raw.iter_mut().zip(row) {
            *r += importance * c;
        }
    }
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(ConceptError::DegenerateInput("all correlations are zero".into()));
    }
    let flagged = input
        .characteristics
        .iter()
        .zip(&raw)
        .filter(|(_, r)| **r == 0.0)
        .map(|(c, _)| c.clone())
        .collect();
    let weights = input
        .characteristics
        .iter()
        .cloned()
        .zip(raw.iter().map(|r| r / total))
        .collect();
    Ok(QfdWeights { weights, flagged })
}

/// The `k` heaviest names, heaviest first; ties keep declaration order.
pub fn select_top_k(weights: &[(String, f64)], k: usize) -> Vec<String> {
    let mut order: Vec<&(String, f64)> = weights.iter().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1));
    order.into_iter().take(k).map(|(n, _)| n.clone()).collect()
}
