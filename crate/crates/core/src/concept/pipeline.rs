use serde::{Deserialize, Serialize};

use super::data::ScoreTable;
use super::plot::{two_axis_plot_data, PlotPoint};
use super::pugh::{pugh_rank, pugh_screen, PughMatrix, PughMode, ScreenOutcome};
use super::qfd::{qfd_weights, select_top_k, QfdInput};
use super::ConceptError;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalInputs {
    pub qfd: QfdInput,
    pub top_k: usize,
    /// Optional screening stage; eliminated concepts are not ranked.
    pub screening: Option<PughMatrix>,
    /// Concept x characteristic scores, weighted by the QFD weights.
    pub scores: ScoreTable,
    /// Concept x qualitative criterion scores, summed with equal weight.
    pub qualitative: Option<ScoreTable>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub weights: Vec<(String, f64)>,
    pub flagged: Vec<String>,
    pub top_k: Vec<String>,
    pub screening: Option<ScreenOutcome>,
    pub ranking: Vec<(String, f64)>,
    pub plot: Option<Vec<PlotPoint>>,
}

impl EvalOutput {
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("output serializes");
        serde_json::to_string_pretty(&value).expect("value serializes")
    }
}

/// QFD weights, top-k characteristics, optional screening, weighted ranking
/// of the remaining concepts and, given qualitative scores, plot data.
pub fn evaluate(inputs: &EvalInputs) -> Result<EvalOutput, ConceptError> {
    let weights = qfd_weights(&inputs.qfd)?;
    let top_k = select_top_k(&weights.weights, inputs.top_k);

    let screening = inputs.screening.as_ref().map(pugh_screen).transpose()?;

    // Characteristics nobody cares about carry no weight and are skipped.
    let mut criteria = Vec::new();
    let mut criterion_weights = Vec::new();
    let mut columns = Vec::new();
    for (j, c) in inputs.scores.columns.iter().enumerate() {
        let w = weights
            .get(c)
            .ok_or_else(|| ConceptError::DimensionMismatch(format!("score column {c:?} is not a characteristic")))?;
        if w > 0.0 {
            criteria.push(c.clone());
            criterion_weights.push(w);
            columns.push(j);
        }
    }
    if criteria.is_empty() {
        return Err(ConceptError::DegenerateInput("no weighted score columns".into()));
    }
    let mut concepts = Vec::new();
    let mut rows = Vec::new();
    for (name, row) in &inputs.scores.rows {
        if row.len() != inputs.scores.columns.len() {
            return Err(ConceptError::DimensionMismatch(format!(
                "concept {name:?} has {} scores for {} columns",
                row.len(),
                inputs.scores.columns.len()
            )));
        }
        if screening.as_ref().is_some_and(|s| s.eliminated.contains(name)) {
            continue;
        }
        concepts.push(name.clone());
        rows.push(columns.iter().map(|&j| row[j]).collect());
    }
    let ranking = pugh_rank(&PughMatrix {
        concepts,
        criteria,
        scores: rows,
        mode: PughMode::Weighted {
            weights: criterion_weights,
        },
    })?;

    let plot = match &inputs.qualitative {
        None => None,
        Some(q) => {
            let qualitative = q.totals();
            let technical: Vec<(String, f64)> = ranking
                .iter()
                .filter(|(c, _)| qualitative.iter().any(|(n, _)| n == c))
                .cloned()
                .collect();
            Some(two_axis_plot_data(&technical, &qualitative)?)
        }
    };

    Ok(EvalOutput {
        weights: weights.weights,
        flagged: weights.flagged,
        top_k,
        screening,
        ranking,
        plot,
    })
}
