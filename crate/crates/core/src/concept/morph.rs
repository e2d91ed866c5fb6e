use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ConceptError;

/// One option chosen per function, in function order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub name: String,
    pub choices: Vec<String>,
}

/// Functions (rows) with their solution options, plus named concepts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorphMatrix {
    functions: Vec<String>,
    options: Vec<Vec<String>>,
    concepts: Vec<Concept>,
}

impl MorphMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_function(&mut self, name: impl Into<String>, options: &[&str]) -> Result<(), ConceptError> {
        let name = name.into();
        if self.functions.contains(&name) {
            return Err(ConceptError::Duplicate(name));
        }
        if !self.concepts.is_empty() {
            return Err(ConceptError::InvalidOption {
                function: name,
                reason: "functions must be declared before concepts".into(),
            });
        }
        self.functions.push(name);
        self.options.push(options.iter().map(|s| s.to_string()).collect());
        Ok(())
    }

    pub fn functions(&self) -> &[String] {
        &self.functions
    }

    pub fn options(&self, function: &str) -> Option<&[String]> {
        let i = self.functions.iter().position(|f| f == function)?;
        Some(&self.options[i])
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn concept(&self, name: &str) -> Option<&Concept> {
        self.concepts.iter().find(|c| c.name == name)
    }

    /// The concept's choices keyed by function.
    pub fn selections(&self, name: &str) -> Option<BTreeMap<String, String>> {
        let c = self.concept(name)?;
        Some(self.functions.iter().cloned().zip(c.choices.iter().cloned()).collect())
    }

    /// Builds a concept from one option per function and appends it.
    pub fn mix_and_match(
        &mut self,
        name: impl Into<String>,
        selections: &BTreeMap<String, String>,
    ) -> Result<&Concept, ConceptError> {
        let name = name.into();
        if self.concept(&name).is_some() {
            return Err(ConceptError::Duplicate(name));
        }
        if let Some(extra) = selections.keys().find(|k| !self.functions.contains(k)) {
            return Err(ConceptError::InvalidOption {
                function: extra.clone(),
                reason: "no such function".into(),
            });
        }
        let mut choices = Vec::with_capacity(self.functions.len());
        for (function, options) in self.functions.iter().zip(&self.options) {
            let Some(choice) = selections.get(function) else {
                return Err(ConceptError::InvalidOption {
                    function: function.clone(),
                    reason: "no option selected".into(),
                });
            };
            if !options.contains(choice) {
                return Err(ConceptError::InvalidOption {
                    function: function.clone(),
                    reason: format!("{choice:?} is not an option"),
                });
            }
            choices.push(choice.clone());
        }
        self.concepts.push(Concept { name, choices });
        Ok(self.concepts.last().expect("just pushed"))
    }
}
