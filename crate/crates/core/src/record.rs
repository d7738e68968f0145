//! Provenance of a transformation: what went in, what came out.

use serde::{Deserialize, Serialize};

use crate::{Expr, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    Moutard,
    Superposition,
    Darboux,
}

/// Expressions are stored as printed text so records serialize and
/// re-parse without loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub kind: TransformKind,
    pub seed_potential: String,
    pub seed_solutions: Vec<String>,
    pub params: Params,
    pub new_potential: String,
    pub new_solutions: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl TransformRecord {
    pub fn new(kind: TransformKind, seed_potential: &Expr, seed_solutions: &[&Expr], new_potential: &Expr) -> Self {
        TransformRecord {
            kind,
            seed_potential: seed_potential.to_string(),
            seed_solutions: seed_solutions.iter().map(|e| e.to_string()).collect(),
            params: Params::new(),
            new_potential: new_potential.to_string(),
            new_solutions: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn with_params(mut self, params: &Params) -> Self {
        self.params = params.clone();
        self
    }

    pub fn with_solution(mut self, y: &Expr) -> Self {
        self.new_solutions.push(y.to_string());
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}
