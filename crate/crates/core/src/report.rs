//! Verdict objects shared by the predicate checks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Evidence attached to a predicate verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// An eigenpair of the tested form.
    Eigen { value: f64, vector: Vec<f64> },
    /// A pair of sample indices and the offending value.
    Pair { i: usize, j: usize, value: f64 },
    /// A set of indices (channels, classes) that fails jointly.
    IndexSet { indices: Vec<usize> },
    /// A sign violation of a finite-difference probe.
    Order { order: usize, point: f64, value: f64 },
    /// A diagonal entry away from its required value.
    Diagonal { index: usize, value: f64 },
    /// A failing pivot of a pivoted form together with its lowest eigenpair.
    Pivot {
        pivot: usize,
        value: f64,
        vector: Vec<f64>,
    },
    /// A small matrix exhibiting the failure.
    Matrix { rows: Vec<Vec<f64>>, lambda_min: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub predicate: String,
    pub verdict: bool,
    pub witness: Option<Witness>,
    pub tolerances: BTreeMap<String, f64>,
    pub numbers: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ClassReport {
    pub fn new(predicate: &str, verdict: bool) -> Self {
        ClassReport {
            predicate: predicate.to_string(),
            verdict,
            witness: None,
            tolerances: BTreeMap::new(),
            numbers: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn with_witness(mut self, w: Option<Witness>) -> Self {
        self.witness = w;
        self
    }

    pub fn tol(mut self, name: &str, v: f64) -> Self {
        self.tolerances.insert(name.to_string(), v);
        self
    }

    pub fn num(mut self, name: &str, v: f64) -> Self {
        self.numbers.insert(name.to_string(), v);
        self
    }

    pub fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }
}
