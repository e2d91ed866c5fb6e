use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::morph::MorphMatrix;
use super::pipeline::EvalInputs;
use super::pugh::{PughMatrix, PughMode};
use super::qfd::QfdInput;
use super::risk::RiskItem;
use super::ConceptError;

/// A CSV matrix: first column names the row, the header names the columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl ScoreTable {
    pub fn row_names(&self) -> Vec<String> {
        self.rows.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Screening matrix against `datum`.
    pub fn screening(&self, datum: impl Into<String>) -> PughMatrix {
        PughMatrix {
            concepts: self.row_names(),
            criteria: self.columns.clone(),
            scores: self.rows.iter().map(|(_, r)| r.clone()).collect(),
            mode: PughMode::Screening { datum: datum.into() },
        }
    }

    /// Row sums with every column weighted equally.
    pub fn totals(&self) -> Vec<(String, f64)> {
        self.rows.iter().map(|(n, r)| (n.clone(), r.iter().sum())).collect()
    }
}

fn csv_err(e: csv::Error) -> ConceptError {
    ConceptError::Csv {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

/// Parses a table whose first column is a label and the rest are numbers.
pub fn parse_score_table(text: &str) -> Result<ScoreTable, ConceptError> {
    let mut rdr = reader(text);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.len() < 2 {
        return Err(ConceptError::Csv {
            line: 1,
            message: "need a label column and at least one value column".into(),
        });
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let name = record[0].to_string();
        if rows.iter().any(|(n, _)| *n == name) {
            return Err(ConceptError::Duplicate(name));
        }
        let values = record
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<f64>().map_err(|_| ConceptError::Csv {
                    line,
                    message: format!("{v:?} is not a number"),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push((name, values));
    }
    Ok(ScoreTable { columns, rows })
}

/// Reads need importances (`need,importance`) and the need x characteristic
/// correlation table. Correlation rows may come in any order but must cover
/// each need exactly once.
pub fn parse_needs_correlation(needs_csv: &str, correlation_csv: &str) -> Result<QfdInput, ConceptError> {
    let needs_table = parse_score_table(needs_csv)?;
    if needs_table.columns.len() != 1 {
        return Err(ConceptError::DimensionMismatch(format!(
            "needs file has {} value columns, expected 1",
            needs_table.columns.len()
        )));
    }
    let needs: Vec<(String, f64)> = needs_table.rows.into_iter().map(|(n, v)| (n, v[0])).collect();
    let corr = parse_score_table(correlation_csv)?;
    let by_need: BTreeMap<&str, &Vec<f64>> = corr.rows.iter().map(|(n, r)| (n.as_str(), r)).collect();
    if by_need.len() != needs.len() {
        return Err(ConceptError::DimensionMismatch(format!(
            "{} correlation rows for {} needs",
            by_need.len(),
            needs.len()
        )));
    }
    let correlation = needs
        .iter()
        .map(|(n, _)| {
            by_need
                .get(n.as_str())
                .map(|r| r.to_vec())
                .ok_or_else(|| ConceptError::DimensionMismatch(format!("no correlation row for need {n:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let input = QfdInput {
        needs,
        characteristics: corr.columns,
        correlation,
    };
    input.validate()?;
    Ok(input)
}

pub fn parse_risk_register(text: &str) -> Result<Vec<RiskItem>, ConceptError> {
    reader(text)
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}

/// One engineering characteristic with its acceptable range and target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Characteristic {
    pub name: String,
    pub unit: String,
    pub range_min: f64,
    pub range_max: f64,
    pub target_min: f64,
    pub target_max: f64,
}

/// The bundled example instance.
///
/// The characteristic table carries published ranges and targets. The needs,
/// correlations and concept scores are a reconstruction: they are shaped to
/// give the published top-five characteristics, the published screening
/// eliminations and the published best concept, not taken from any source.
#[derive(Clone, Copy, Debug)]
pub struct Bundled {
    pub needs: &'static str,
    pub correlation: &'static str,
    pub screening: &'static str,
    pub screening_datum: &'static str,
    pub scores: &'static str,
    pub qualitative: &'static str,
    pub characteristics: &'static str,
    pub risks: &'static str,
}

pub fn bundled() -> Bundled {
    Bundled {
        needs: include_str!("../../data/needs.csv"),
        correlation: include_str!("../../data/correlation.csv"),
        screening: include_str!("../../data/screening.csv"),
        screening_datum: "Ultra Tool",
        scores: include_str!("../../data/scores.csv"),
        qualitative: include_str!("../../data/qualitative.csv"),
        characteristics: include_str!("../../data/characteristics.csv"),
        risks: include_str!("../../data/risks.csv"),
    }
}

impl Bundled {
    pub fn inputs(&self, top_k: usize) -> Result<EvalInputs, ConceptError> {
        Ok(EvalInputs {
            qfd: parse_needs_correlation(self.needs, self.correlation)?,
            top_k,
            screening: Some(parse_score_table(self.screening)?.screening(self.screening_datum)),
            scores: parse_score_table(self.scores)?,
            qualitative: Some(parse_score_table(self.qualitative)?),
        })
    }

    pub fn characteristics(&self) -> Result<Vec<Characteristic>, ConceptError> {
        reader(self.characteristics)
            .deserialize()
            .map(|r| r.map_err(csv_err))
            .collect()
    }

    pub fn risk_register(&self) -> Result<Vec<RiskItem>, ConceptError> {
        parse_risk_register(self.risks)
    }

    /// Function rows with short option labels, the five base concepts, and
    /// the two mix-and-match concepts derived from them.
    pub fn morph_matrix(&self) -> MorphMatrix {
        const F: [&str; 6] = [
            "Equipment monitoring",
            "Cavity identification",
            "Alerts and indications",
            "Staff communication",
            "Task management and reports",
            "Data and history storage",
        ];
        let mut m = MorphMatrix::new();
        let rows: [&[&str]; 6] = [
            &[
                "RFID tags, entrance readers, cart and detector",
                "Bluetooth and RFID tags with vending machine",
                "RFID tags with robot readers",
                "RFID tags with camera detection",
                "RFID tags with robot readers and cameras",
            ],
            &[
                "Handheld RFID detector",
                "Bluetooth tools and RFID detector",
                "Ultrasound bed",
                "RFID reader bed",
                "Infrared thermography",
            ],
            &[
                "Cart monitor and speaker, detector lights",
                "Smartphone paired with cart",
                "Cart monitor and ultrasound indicators",
                "Robot tablet and bed lights",
                "Cart tablet",
                "Robot tablet and detector lights",
            ],
            &["Cart computer", "Smartphone", "Robot", "Cart tablet"],
            &[
                "SQL and Python",
                "SQL and Matlab",
                "Cassandra and Python",
                "Oracle and Python",
                "Oracle and Matlab",
            ],
            &["Cloud", "External drive", "Internal drive", "Company servers"],
        ];
        for (f, options) in F.iter().zip(rows) {
            m.add_function(*f, options).expect("distinct functions");
        }
        let base: [(&str, [&str; 6]); 5] = [
            (
                "Dr. Tool",
                [
                    rows[0][0], rows[1][0], rows[2][0], rows[3][0], rows[4][0], rows[5][0],
                ],
            ),
            (
                "Blue Tool",
                [
                    rows[0][1], rows[1][1], rows[2][1], rows[3][1], rows[4][1], rows[5][0],
                ],
            ),
            (
                "Ultra Tool",
                [
                    rows[0][0], rows[1][2], rows[2][2], rows[3][0], rows[4][2], rows[5][1],
                ],
            ),
            (
                "Robi Tool",
                [
                    rows[0][2], rows[1][3], rows[2][3], rows[3][2], rows[4][3], rows[5][2],
                ],
            ),
            (
                "BB Tool",
                [
                    rows[0][3], rows[1][4], rows[2][4], rows[3][3], rows[4][4], rows[5][3],
                ],
            ),
        ];
        let pick = |choices: [&str; 6]| -> BTreeMap<String, String> {
            F.iter().map(|f| f.to_string()).zip(choices.iter().map(|c| c.to_string())).collect()
        };
        for (name, choices) in base {
            m.mix_and_match(name, &pick(choices)).expect("valid options");
        }
        m.mix_and_match(
            "Dr. Robi Tool",
            &pick([rows[0][2], rows[1][0], rows[2][5], rows[3][2], rows[4][0], rows[5][0]]),
        )
        .expect("valid options");
        m.mix_and_match(
            "Dr. RoBBi Tool",
            &pick([rows[0][4], rows[1][0], rows[2][5], rows[3][2], rows[4][4], rows[5][0]]),
        )
        .expect("valid options");
        m
    }
}
