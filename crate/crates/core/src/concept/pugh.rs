use serde::{Deserialize, Serialize};

use super::ConceptError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PughMode {
    /// Entries are -1/0/+1 relative to the datum concept.
    Screening { datum: String },
    /// Entries are numeric scores, one weight per criterion.
    Weighted { weights: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PughMatrix {
    pub concepts: Vec<String>,
    pub criteria: Vec<String>,
    /// Rows follow `concepts`, columns follow `criteria`.
    pub scores: Vec<Vec<f64>>,
    pub mode: PughMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenOutcome {
    /// Net score of every concept, in declaration order.
    pub scores: Vec<(String, i64)>,
    pub survivors: Vec<String>,
    pub eliminated: Vec<String>,
}

impl PughMatrix {
    fn check_shape(&self) -> Result<(), ConceptError> {
        if self.scores.len() != self.concepts.len() {
            return Err(ConceptError::DimensionMismatch(format!(
                "{} score rows for {} concepts",
                self.scores.len(),
                self.concepts.len()
            )));
        }
        for (c, row) in self.concepts.iter().zip(&self.scores) {
            if row.len() != self.criteria.len() {
                return Err(ConceptError::DimensionMismatch(format!(
                    "concept {c:?} has {} scores for {} criteria",
                    row.len(),
                    self.criteria.len()
                )));
            }
        }
        Ok(())
    }
}

/// Drops every concept whose net score is below the datum's zero.
pub fn pugh_screen(matrix: &PughMatrix) -> Result<ScreenOutcome, ConceptError> {
    let PughMode::Screening { datum } = &matrix.mode else {
        return Err(ConceptError::WrongMode {
            op: "pugh_screen",
            expected: "screening",
        });
    };
    matrix.check_shape()?;
    let datum_row = matrix
        .concepts
        .iter()
        .position(|c| c == datum)
        .ok_or_else(|| ConceptError::UnknownConcept(datum.clone()))?;
    for (j, v) in matrix.scores[datum_row].iter().enumerate() {
        if *v != 0.0 {
            return Err(ConceptError::DatumNotZero {
                datum: datum.clone(),
                criterion: matrix.criteria[j].clone(),
            });
        }
    }
    let mut out = ScreenOutcome {
        scores: Vec::new(),
        survivors: Vec::new(),
        eliminated: Vec::new(),
    };
    for (concept, row) in matrix.concepts.iter().zip(&matrix.scores) {
        let mut net = 0i64;
        for (criterion, v) in matrix.criteria.iter().zip(row) {
            if ![-1.0, 0.0, 1.0].contains(v) {
                return Err(ConceptError::InvalidScreeningScore {
                    concept: concept.clone(),
                    criterion: criterion.clone(),
                    value: *v,
                });
            }
            net += *v as i64;
        }
        out.scores.push((concept.clone(), net));
        if net < 0 {
            out.eliminated.push(concept.clone());
        } else {
            out.survivors.push(concept.clone());
        }
    }
    Ok(out)
}

/// Weighted totals, highest first; ties keep declaration order.
pub fn pugh_rank(matrix: &PughMatrix) -> Result<Vec<(String, f64)>, ConceptError> {
    let PughMode::Weighted { weights } = &matrix.mode else {
        return Err(ConceptError::WrongMode {
            op: "pugh_rank",
            expected: "weighted",
        });
    };
    matrix.check_shape()?;
    if weights.len() != matrix.criteria.len() {
        return Err(ConceptError::DimensionMismatch(format!(
            "{} weights for {} criteria",
            weights.len(),
            matrix.criteria.len()
        )));
    }
    for (name, w) in matrix.criteria.iter().zip(weights) {
        if !(w.is_finite() && *w > 0.0) {
            return Err(ConceptError::InvalidWeight {
                name: name.clone(),
                value: *w,
            });
        }
    }
    let mut totals: Vec<(String, f64)> = matrix
        .concepts
        .iter()
        .zip(&matrix.scores)
        .map(|(c, row)| (c.clone(), row.iter().zip(weights).map(|(s, w)| s * w).sum()))
        .collect();
    totals.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(totals)
}
