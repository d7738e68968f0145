//! Claimed identities as sums of terms.
//!
//! Every check in the crate is "this sum vanishes". Keeping the summands
//! separate lets the sampler scale each residual by the magnitude of the
//! terms that cancel, so thresholds stay meaningful near `r → 0`.

use crate::Expr;

#[derive(Debug, Clone)]
pub struct Identity {
    pub label: String,
    pub terms: Vec<Expr>,
}

impl Identity {
    pub fn new(label: impl Into<String>, terms: Vec<Expr>) -> Self {
        Identity { label: label.into(), terms }
    }

    /// `lhs − rhs = 0`.
    pub fn equality(label: impl Into<String>, lhs: &Expr, rhs: &Expr) -> Self {
        Identity::new(label, vec![lhs.clone(), (-rhs).fold()])
    }

    /// `lhs_terms − rhs = 0` with the left-hand side kept term by term.
    pub fn expanded(label: impl Into<String>, lhs_terms: Vec<Expr>, rhs: &Expr) -> Self {
        let mut terms = lhs_terms;
        terms.push((-rhs).fold());
        Identity::new(label, terms)
    }

    pub fn residual(&self) -> Expr {
        Expr::sum(self.terms.iter().cloned()).fold()
    }
}
