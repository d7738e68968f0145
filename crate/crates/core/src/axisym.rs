//! The cylindrical operator and the Fokker–Planck substitution `Y = P e^h`.
//!
//! With `u = −h_rr + h_r² + h_r/r + 1/r² − h_zz + h_z²` the Schrödinger
//! equation becomes a conservation law, whose flux pair defines the
//! nonlocal variable `Q` through
//!
//! ```text
//! Q_z =  e^{−h} (Y_r + h_r Y + Y/r)
//! Q_r = −e^{−h} (Y_z + h_z Y)
//! ```

use crate::expr::rho2;
use crate::{Expr, Identity, OneForm};

/// Schrödinger potential together with its exponent and distinguished solution.
#[derive(Debug, Clone)]
pub struct PotentialContext {
    pub u: Expr,
    pub h: Expr,
    pub yh: Expr,
}

impl PotentialContext {
    /// Context generated by an exponent: `u` from the exponent relation and
    /// `Y_h = e^{−h}/r`.
    pub fn from_h(h: &Expr) -> Self {
        PotentialContext { u: potential_from_h(h), h: h.clone(), yh: yh_from_h(h) }
    }

    /// Context generated by a positive solution `f` of the equation with potential `u`.
    pub fn from_solution(u: &Expr, f: &Expr) -> Self {
        PotentialContext { u: u.clone(), h: h_from_solution(f), yh: f.clone() }
    }

    /// Identities the context must satisfy as sampled checks.
    pub fn identities(&self) -> Vec<Identity> {
        vec![
            Identity::expanded("potential matches exponent", potential_from_h_terms(&self.h), &self.u),
            Identity::equality("distinguished solution", &self.yh, &yh_from_h(&self.h)),
            schrodinger_identity("distinguished solution solves", &self.u, &self.yh),
        ]
    }
}

/// Fokker–Planck density and nonlocal variable attached to a context.
#[derive(Debug, Clone)]
pub struct PQPair {
    pub p: Expr,
    pub q: Expr,
}

impl PQPair {
    /// Flux residuals `P_r + 2h_r P + P/r − Q_z` and `P_z + 2h_z P + Q_r`.
    pub fn identities(&self, h: &Expr) -> [Identity; 2] {
        let (p, q) = (&self.p, &self.q);
        let r = Expr::r();
        let first = Identity::new("radial flux", vec![p.dr(), (Expr::num(2) * h.dr() * p).fold(), (p / &r).fold(), (-q.dz()).fold()]);
        let second = Identity::new("axial flux", vec![p.dz(), (Expr::num(2) * h.dz() * p).fold(), q.dr()]);
        [first, second]
    }
}

pub fn laplacian_cyl_terms(y: &Expr) -> [Expr; 3] {
    let y_r = y.dr();
    [y_r.dr(), (&y_r / Expr::r()).fold(), y.dz().dz()]
}

/// `Y_rr + Y_r/r + Y_zz`.
pub fn laplacian_cyl(y: &Expr) -> Expr {
    Expr::sum(laplacian_cyl_terms(y)).fold()
}

/// Terms of `Δ_cyl Y − u Y`; their sum vanishes iff `Y` solves the equation.
pub fn schrodinger_terms(u: &Expr, y: &Expr) -> Vec<Expr> {
    let mut terms = laplacian_cyl_terms(y).to_vec();
    terms.push((-(u * y)).fold());
    terms
}

pub fn schrodinger_residual(u: &Expr, y: &Expr) -> Expr {
    Expr::sum(schrodinger_terms(u, y)).fold()
}

pub fn schrodinger_identity(label: impl Into<String>, u: &Expr, y: &Expr) -> Identity {
    Identity::new(label, schrodinger_terms(u, y))
}

pub fn potential_from_h_terms(h: &Expr) -> Vec<Expr> {
    let r = Expr::r();
    let (h_r, h_z) = (h.dr(), h.dz());
    vec![
        (-h_r.dr()).fold(),
        h_r.powi(2).fold(),
        (&h_r / &r).fold(),
        (Expr::one() / r.powi(2)).fold(),
        (-h_z.dz()).fold(),
        h_z.powi(2).fold(),
    ]
}

/// `−h_rr + h_r² + h_r/r + 1/r² − h_zz + h_z²`.
pub fn potential_from_h(h: &Expr) -> Expr {
    Expr::sum(potential_from_h_terms(h)).fold()
}

/// `h = −ln(r f)` for a solution `f` that is positive on the working domain.
pub fn h_from_solution(f: &Expr) -> Expr {
    (-(Expr::r() * f).ln()).fold()
}

/// `Y_h = e^{−h}/r`.
pub fn yh_from_h(h: &Expr) -> Expr {
    ((-h).exp() / Expr::r()).fold()
}

/// The closed one-form `dQ = A dr + B dz` attached to a solution `y`.
pub fn q_forms(h: &Expr, y: &Expr) -> OneForm {
    let weight = (-h).exp();
    let b = &weight * (y.dr() + h.dr() * y + y / Expr::r());
    let a = -(&weight * (y.dz() + h.dz() * y));
    OneForm::new(a.fold(), b.fold())
}

/// `−ln r + ½ ln(r² + z²)`, the exponent generated by `f = 1/√(r² + z²)` at `u = 0`.
pub fn h0() -> Expr {
    (-Expr::r().ln() + rho2().ln() / Expr::num(2)).fold()
}
