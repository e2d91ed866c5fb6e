use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ConceptError;

/// Qualitative rating on x, technical rating on y, both in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub concept: String,
    pub x: f64,
    pub y: f64,
}

fn normalize(values: &[f64]) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        values.iter().map(|v| (v - min) / (max - min)).collect()
    } else {
        vec![1.0; values.len()]
    }
}

/// Min-max normalizes each axis. An axis where all concepts tie maps to 1.
/// Points come out in the order of `technical`.
pub fn two_axis_plot_data(
    technical: &[(String, f64)],
    qualitative: &[(String, f64)],
) -> Result<Vec<PlotPoint>, ConceptError> {
    let keys = |v: &[(String, f64)]| -> Result<BTreeSet<String>, ConceptError> {
        let mut set = BTreeSet::new();
        for (k, _) in v {
            if !set.insert(k.clone()) {
                return Err(ConceptError::Duplicate(k.clone()));
            }
        }
        Ok(set)
    };
    let (tk, qk) = (keys(technical)?, keys(qualitative)?);
    if tk != qk {
        let diff: Vec<&String> = tk.symmetric_difference(&qk).collect();
        return Err(ConceptError::KeyMismatch(format!("{diff:?}")));
    }
    let y = normalize(&technical.iter().map(|(_, v)| *v).collect::<Vec<_>>());
    let qual_values: Vec<f64> = technical
        .iter()
        .map(|(k, _)| qualitative.iter().find(|(q, _)| q == k).expect("same keys").1)
        .collect();
    let x = normalize(&qual_values);
    Ok(technical
        .iter()
        .zip(x.into_iter().zip(y))
        .map(|((concept, _), (x, y))| PlotPoint {
            concept: concept.clone(),
            x,
            y,
        })
        .collect())
}
