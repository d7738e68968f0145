//! The `V = 0` branch: generalized Moutard transformation and the twofold
//! superposition formula.
//!
//! Solutions are handled through the closed form for `G = r Y_h Ỹ`, which
//! is the superposition form with `Y₁ = Y_h`, `Y₂ = Y`. One quadrature
//! mechanism serves both.

use crate::axisym::schrodinger_identity;
use crate::record::{TransformKind, TransformRecord};
use crate::verify::{sample_identity_scaled, ResidualReport, SampleSpec, Scaling};
use crate::{Expr, Identity, OneForm, Params};

/// `u + 2h_rr + 2h_zz − 1/r²`.
pub fn moutard_potential_from_h(u: &Expr, h: &Expr) -> Expr {
    let two = Expr::num(2);
    (u + &two * h.dr().dr() + &two * h.dz().dz() - Expr::one() / Expr::r().powi(2)).fold()
}

/// `u − 2∂²_r ln Y_h − 2∂²_z ln Y_h + 1/r²`.
pub fn moutard_potential(u: &Expr, yh: &Expr) -> Expr {
    let log = yh.ln();
    let two = Expr::num(2);
    (u - &two * log.dr().dr() - &two * log.dz().dz() + Expr::one() / Expr::r().powi(2)).fold()
}

/// `(r Y_h)⁻¹`, the distinguished solution after the transformation.
pub fn trivial_solution(yh: &Expr) -> Expr {
    (Expr::one() / (Expr::r() * yh)).fold()
}

#[derive(Debug, Clone)]
pub struct MoutardResult {
    pub new_potential: Expr,
    pub new_yh: Expr,
    pub record: TransformRecord,
}

impl MoutardResult {
    pub fn identities(&self) -> Vec<Identity> {
        vec![schrodinger_identity("transformed distinguished solution", &self.new_potential, &self.new_yh)]
    }
}

pub fn moutard(u: &Expr, yh: &Expr) -> MoutardResult {
    let new_potential = moutard_potential(u, yh);
    let new_yh = trivial_solution(yh);
    let record = TransformRecord::new(TransformKind::Moutard, u, &[yh], &new_potential).with_solution(&new_yh);
    MoutardResult { new_potential, new_yh, record }
}

/// Closed form for `G = r Y_h Ỹ`:
/// `G_r = −r Y_h² ∂_z(Y/Y_h)`, `G_z = r Y_h² ∂_r(Y/Y_h)`.
pub fn moutard_solution_form(y: &Expr, yh: &Expr) -> OneForm {
    superpose_form(yh, y)
}

/// `Ỹ = G / (r Y_h)` for a primitive `G` of [`moutard_solution_form`].
pub fn moutard_solution(g: &Expr, yh: &Expr) -> Expr {
    (g / (Expr::r() * yh)).fold()
}

/// `F_r = −r(Y₂_z Y₁ − Y₂ Y₁_z)`, `F_z = r(Y₂_r Y₁ − Y₂ Y₁_r)`.
pub fn superpose_form(y1: &Expr, y2: &Expr) -> OneForm {
    let r = Expr::r();
    let a = -(&r * (y2.dz() * y1 - y2 * y1.dz()));
    let b = &r * (y2.dr() * y1 - y2 * y1.dr());
    OneForm::new(a.fold(), b.fold())
}

/// The coefficients of `ũ̃ = u + c₁/F + c₂/F²`; they depend on `Y₁, Y₂`
/// only, so a quadratured `F` can be plugged in pointwise.
#[derive(Debug, Clone)]
pub struct SuperposeCoefficients {
    pub c1: [Expr; 2],
    pub c2: [Expr; 2],
}

impl SuperposeCoefficients {
    pub fn new(y1: &Expr, y2: &Expr) -> Self {
        let (r, two) = (Expr::r(), Expr::num(2));
        let c1 = [(&two * y2.dz() * (&two * &r * y1.dr() + y1)).fold(), (-(&two * y1.dz() * (&two * &r * y2.dr() + y2))).fold()];
        let r2 = &two * r.powi(2);
        let c2 = [(&r2 * (y2.dr() * y1 - y2 * y1.dr()).powi(2)).fold(), (&r2 * (y2.dz() * y1 - y2 * y1.dz()).powi(2)).fold()];
        SuperposeCoefficients { c1, c2 }
    }

    /// `[u, c₁ F⁻¹ terms, c₂ F⁻² terms]`.
    pub fn potential_terms(&self, u: &Expr, f: &Expr) -> Vec<Expr> {
        let f2 = f.powi(2);
        let mut terms = vec![u.clone()];
        terms.extend(self.c1.iter().map(|c| (c / f).fold()));
        terms.extend(self.c2.iter().map(|c| (c / &f2).fold()));
        terms
    }

    /// Coefficients are summed before dividing so a degenerate pair
    /// (`c₁ = c₂ = 0`) folds back to `u`.
    pub fn potential(&self, u: &Expr, f: &Expr) -> Expr {
        (u + self.c1_sum() / f + self.c2_sum() / f.powi(2)).fold()
    }

    pub fn c1_sum(&self) -> Expr {
        (&self.c1[0] + &self.c1[1]).fold()
    }

    pub fn c2_sum(&self) -> Expr {
        (&self.c2[0] + &self.c2[1]).fold()
    }
}

#[derive(Debug, Clone)]
pub struct SuperposeResult {
    pub u: Expr,
    pub y1: Expr,
    pub y2: Expr,
    pub f: Expr,
    pub f_form: OneForm,
    /// Expanded rational form; no logarithms, so the sign of `F` is irrelevant.
    pub new_potential: Expr,
    /// `u − 2∂²_r ln|F| − 2∂²_z ln|F|`, kept as a cross-check.
    pub log_potential: Expr,
    pub sol1: Expr,
    pub sol2: Expr,
    pub record: TransformRecord,
}

impl SuperposeResult {
    pub fn identities(&self) -> Vec<Identity> {
        let [pr, pz] = self.f_form.primitive_identities(&self.f);
        let coeffs = SuperposeCoefficients::new(&self.y1, &self.y2);
        vec![
            Identity::new("F form is closed", self.f_form.compatibility_identity().terms),
            pr,
            pz,
            Identity::expanded("expanded potential matches log form", coeffs.potential_terms(&self.u, &self.f), &self.log_potential),
            schrodinger_identity("Y1/F solves the new equation", &self.new_potential, &self.sol1),
            schrodinger_identity("Y2/F solves the new equation", &self.new_potential, &self.sol2),
        ]
    }
}

/// Twofold superposition for a caller-supplied primitive `f` of
/// [`superpose_form`] (integration constant included).
pub fn superpose_potential(u: &Expr, y1: &Expr, y2: &Expr, f: &Expr) -> SuperposeResult {
    let coeffs = SuperposeCoefficients::new(y1, y2);
    let new_potential = coeffs.potential(u, f);
    let log = f.abs().ln();
    let two = Expr::num(2);
    let log_potential = (u - &two * log.dr().dr() - &two * log.dz().dz()).fold();
    let sol1 = (y1 / f).fold();
    let sol2 = (y2 / f).fold();
    let record = TransformRecord::new(TransformKind::Superposition, u, &[y1, y2], &new_potential)
        .with_solution(&sol1)
        .with_solution(&sol2)
        .with_note(format!("F = {f}"));
    SuperposeResult {
        u: u.clone(),
        y1: y1.clone(),
        y2: y2.clone(),
        f: f.clone(),
        f_form: superpose_form(y1, y2),
        new_potential,
        log_potential,
        sol1,
        sol2,
        record,
    }
}

/// Pointwise `|ũ̃(Y₁, Y₂, F) − ũ̃(Y₂, Y₁, −F)|`.
pub fn swap_check(u: &Expr, y1: &Expr, y2: &Expr, f: &Expr, params: &Params, spec: &SampleSpec) -> ResidualReport {
    let forward = superpose_potential(u, y1, y2, f).new_potential;
    let swapped = superpose_potential(u, y2, y1, &(-f).fold()).new_potential;
    let id = Identity::equality("swap invariance", &forward, &swapped);
    sample_identity_scaled(&id, params, spec, Scaling::Absolute)
}
